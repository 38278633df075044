//! Resistive crossbar electrical model: geometry, nodal IR-drop analysis,
//! far-corner programming voltage and read inaccuracy.
//!
//! Every row wire is a chain of `wire_res_per_cell` segments with one top
//! electrode node per crosspoint; every column wire likewise carries the bottom
//! electrode nodes. A cell connects top node `(i, j)` to bottom node `(i, j)`.
//! Rows are driven at their column-0 end and grounded (if ever) at their
//! far end; columns are driven at their row-0 end and grounded at their far
//! (last-row) end. Floating wires are removed together with their cells.

pub mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use solver::{CsrMatrix, LinePreconditioner, SkylineCholesky};

/// Wire resistance per crosspoint segment used when none is configured.
///
/// Calibration constant: with every row of a uniform 1000 x 1000 array driven,
/// it puts the worst-column read error near 20% at 10 kOhm cells and near
/// 0.25% at 1 MOhm cells.
pub const DEFAULT_WIRE_RES_PER_CELL: f64 = 3.0e-3;
/// 0.2 fF/um at 100 nm pitch.
pub const DEFAULT_WIRE_CAP_PER_CELL: f64 = 2.0e-17;
pub const DEFAULT_FULL_PITCH: f64 = 100e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Meters.
    pub full_pitch: f64,
    /// Ohms per segment.
    pub wire_res_per_cell: f64,
    /// Farads per segment.
    pub wire_cap_per_cell: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self::square(1000)
    }
}

impl ArrayGeometry {
    pub fn square(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            full_pitch: DEFAULT_FULL_PITCH,
            wire_res_per_cell: DEFAULT_WIRE_RES_PER_CELL,
            wire_cap_per_cell: DEFAULT_WIRE_CAP_PER_CELL,
        }
    }

    pub fn with_size(&self, rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            ..*self
        }
    }

    /// Dimensions and pitch must be positive; wire resistance may be zero
    /// (ideal wires) but not negative.
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "array {}x{} is empty",
                self.rows, self.cols
            )));
        }
        if !(self.full_pitch > 0.0 && self.wire_cap_per_cell > 0.0) {
            return Err(Error::InvalidParameter(
                "pitch and wire capacitance must be > 0".into(),
            ));
        }
        if !(self.wire_res_per_cell >= 0.0 && self.wire_res_per_cell.is_finite()) {
            return Err(Error::InvalidParameter(
                "wire resistance must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Crosspoint resistances in ohms, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    rows: usize,
    cols: usize,
    resistance: Vec<f64>,
}

impl CellGrid {
    pub fn uniform(rows: usize, cols: usize, ohms: f64) -> Result<Self> {
        Self::from_vec(rows, cols, vec![ohms; rows * cols])
    }

    pub fn from_vec(rows: usize, cols: usize, resistance: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || resistance.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "cell grid {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                resistance.len()
            )));
        }
        if let Some(r) = resistance.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "cell resistance {r} must be positive and finite"
            )));
        }
        Ok(Self {
            rows,
            cols,
            resistance,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.resistance[i * self.cols + j]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.resistance.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            resistance: t,
        }
    }
}

/// Boundary condition on one wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Terminal {
    Floating,
    /// Source voltage applied at the near end.
    Driven(f64),
    /// Tied to ground at the far end.
    Grounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveScenario {
    pub rows: Vec<Terminal>,
    pub cols: Vec<Terminal>,
    /// Ohms between each voltage source and its wire.
    pub source_resistance: f64,
}

impl DriveScenario {
    /// Drives the listed rows at `volts` and grounds the listed columns;
    /// everything else floats.
    pub fn rows_to_cols(
        rows: usize,
        cols: usize,
        driven_rows: &[usize],
        grounded_cols: &[usize],
        volts: f64,
    ) -> Self {
        let mut r = vec![Terminal::Floating; rows];
        let mut c = vec![Terminal::Floating; cols];
        for &i in driven_rows {
            r[i] = Terminal::Driven(volts);
        }
        for &j in grounded_cols {
            c[j] = Terminal::Grounded;
        }
        Self {
            rows: r,
            cols: c,
            source_resistance: 0.0,
        }
    }

    /// One row driven at its near end, every column grounded at its far end.
    pub fn single_row(rows: usize, cols: usize, row: usize, volts: f64) -> Self {
        Self::rows_to_cols(rows, cols, &[row], &(0..cols).collect::<Vec<_>>(), volts)
    }

    /// Every row driven, every column grounded (parallel read).
    pub fn all_rows(rows: usize, cols: usize, volts: f64) -> Self {
        Self::rows_to_cols(
            rows,
            cols,
            &(0..rows).collect::<Vec<_>>(),
            &(0..cols).collect::<Vec<_>>(),
            volts,
        )
    }

    pub fn transpose(&self) -> Self {
        Self {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            source_resistance: self.source_resistance,
        }
    }

    fn validate(&self, grid: &CellGrid) -> Result<()> {
        if self.rows.len() != grid.rows || self.cols.len() != grid.cols {
            return Err(Error::InvalidParameter(format!(
                "scenario is {}x{} but grid is {}x{}",
                self.rows.len(),
                self.cols.len(),
                grid.rows,
                grid.cols
            )));
        }
        if !(self.source_resistance >= 0.0 && self.source_resistance.is_finite()) {
            return Err(Error::InvalidParameter(
                "source resistance must be >= 0".into(),
            ));
        }
        let all = self.rows.iter().chain(&self.cols);
        let driven = all.clone().any(|t| matches!(t, Terminal::Driven(_)));
        let grounded = all.clone().any(|t| matches!(t, Terminal::Grounded));
        if !driven {
            return Err(Error::InvalidParameter("scenario drives no wire".into()));
        }
        if !grounded {
            return Err(Error::Connectivity("scenario grounds no wire".into()));
        }
        Ok(())
    }
}

/// Solver choice and tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target `||Av - b|| / ||b||`.
    pub tol: f64,
    /// Largest relative residual accepted once the iteration stagnates.
    pub accept: f64,
    /// Largest envelope (stored factor entries) handled by direct factorization.
    pub direct_envelope_limit: usize,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            accept: 1e-10,
            direct_envelope_limit: 4_000_000,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Trivial,
    Direct,
    Iterative { iterations: usize },
}

/// Node voltages of a solved crossbar. Nodes of floating wires are absent.
#[derive(Debug, Clone)]
pub struct VoltageField {
    pub rows: usize,
    pub cols: usize,
    top: Vec<Option<f64>>,
    bottom: Vec<Option<f64>>,
    pub method: SolveMethod,
    pub residual: f64,
}

impl VoltageField {
    /// Top-electrode (row wire) voltage at crosspoint `(i, j)`.
    pub fn top(&self, i: usize, j: usize) -> Option<f64> {
        self.top[i * self.cols + j]
    }

    /// Bottom-electrode (column wire) voltage at crosspoint `(i, j)`.
    pub fn bottom(&self, i: usize, j: usize) -> Option<f64> {
        self.bottom[i * self.cols + j]
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.top.iter().chain(&self.bottom).flatten().copied()
    }

    /// Current through each column, summed over its cells (top to bottom).
    pub fn column_currents(&self, grid: &CellGrid) -> Vec<f64> {
        (0..self.cols)
            .map(|j| {
                (0..self.rows)
                    .filter_map(|i| match (self.top(i, j), self.bottom(i, j)) {
                        (Some(t), Some(b)) => Some((t - b) / grid.get(i, j)),
                        _ => None,
                    })
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum NodeRef {
    Unknown(usize),
    Fixed(f64),
}

/// Node numbering for one wire: either one unknown per position, a single
/// collapsed unknown (ideal wire behind a source resistance), or a fixed
/// potential (ideal wire tied straight to a source or ground).
#[derive(Debug, Clone, Copy)]
enum WireNodes {
    Absent,
    PerPosition,
    Collapsed(usize),
    Fixed(f64),
}

struct Network {
    rows: usize,
    cols: usize,
    row_wires: Vec<WireNodes>,
    col_wires: Vec<WireNodes>,
    // Unknown index of each top/bottom node when the wire is PerPosition.
    top_ids: Vec<usize>,
    bottom_ids: Vec<usize>,
    n_unknowns: usize,
}

impl Network {
    fn number(geometry: &ArrayGeometry, grid: &CellGrid, scenario: &DriveScenario) -> Self {
        let (rows, cols) = (grid.rows, grid.cols);
        let ideal = geometry.wire_res_per_cell == 0.0;
        let classify = |t: &Terminal| match (t, ideal) {
            (Terminal::Floating, _) => WireNodes::Absent,
            (_, false) => WireNodes::PerPosition,
            (Terminal::Driven(v), true) if scenario.source_resistance == 0.0 => {
                WireNodes::Fixed(*v)
            }
            (Terminal::Driven(_), true) => WireNodes::Collapsed(usize::MAX),
            (Terminal::Grounded, true) => WireNodes::Fixed(0.0),
        };
        let mut row_wires: Vec<WireNodes> = scenario.rows.iter().map(classify).collect();
        let mut col_wires: Vec<WireNodes> = scenario.cols.iter().map(classify).collect();

        // Interleave top and bottom nodes crosspoint by crosspoint so that the
        // matrix bandwidth stays near 2 * cols.
        let mut next = 0usize;
        let mut top_ids = vec![usize::MAX; rows * cols];
        let mut bottom_ids = vec![usize::MAX; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                if matches!(row_wires[i], WireNodes::PerPosition) {
                    top_ids[i * cols + j] = next;
                    next += 1;
                }
                if matches!(col_wires[j], WireNodes::PerPosition) {
                    bottom_ids[i * cols + j] = next;
                    next += 1;
                }
            }
        }
        for w in row_wires.iter_mut().chain(col_wires.iter_mut()) {
            if let WireNodes::Collapsed(id) = w {
                *id = next;
                next += 1;
            }
        }
        Self {
            rows,
            cols,
            row_wires,
            col_wires,
            top_ids,
            bottom_ids,
            n_unknowns: next,
        }
    }

    fn top(&self, i: usize, j: usize) -> Option<NodeRef> {
        match self.row_wires[i] {
            WireNodes::Absent => None,
            WireNodes::PerPosition => Some(NodeRef::Unknown(self.top_ids[i * self.cols + j])),
            WireNodes::Collapsed(id) => Some(NodeRef::Unknown(id)),
            WireNodes::Fixed(v) => Some(NodeRef::Fixed(v)),
        }
    }

    fn bottom(&self, i: usize, j: usize) -> Option<NodeRef> {
        match self.col_wires[j] {
            WireNodes::Absent => None,
            WireNodes::PerPosition => Some(NodeRef::Unknown(self.bottom_ids[i * self.cols + j])),
            WireNodes::Collapsed(id) => Some(NodeRef::Unknown(id)),
            WireNodes::Fixed(v) => Some(NodeRef::Fixed(v)),
        }
    }
}

struct Assembly {
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl Assembly {
    fn stamp(&mut self, a: NodeRef, b: NodeRef, g: f64) {
        match (a, b) {
            (NodeRef::Unknown(p), NodeRef::Unknown(q)) => {
                if p == q {
                    return;
                }
                self.rows[p].push((p, g));
                self.rows[q].push((q, g));
                self.rows[p].push((q, -g));
                self.rows[q].push((p, -g));
            }
            (NodeRef::Unknown(p), NodeRef::Fixed(v)) | (NodeRef::Fixed(v), NodeRef::Unknown(p)) => {
                self.rows[p].push((p, g));
                self.rhs[p] += g * v;
            }
            (NodeRef::Fixed(_), NodeRef::Fixed(_)) => {}
        }
    }
}

/// Solves the Kirchhoff nodal equations of the crossbar.
pub fn solve_nodal(
    geometry: &ArrayGeometry,
    grid: &CellGrid,
    scenario: &DriveScenario,
) -> Result<VoltageField> {
    solve_nodal_with(geometry, grid, scenario, &SolveOptions::default())
}

pub fn solve_nodal_with(
    geometry: &ArrayGeometry,
    grid: &CellGrid,
    scenario: &DriveScenario,
    opts: &SolveOptions,
) -> Result<VoltageField> {
    scenario.validate(grid)?;
    if !(geometry.wire_res_per_cell >= 0.0 && geometry.wire_res_per_cell.is_finite()) {
        return Err(Error::InvalidParameter(
            "wire resistance must be >= 0".into(),
        ));
    }
    let net = Network::number(geometry, grid, scenario);
    let (rows, cols) = (net.rows, net.cols);
    let r = geometry.wire_res_per_cell;
    let mut asm = Assembly {
        rows: vec![Vec::with_capacity(5); net.n_unknowns],
        rhs: vec![0.0; net.n_unknowns],
    };

    // Cells.
    for i in 0..rows {
        for j in 0..cols {
            if let (Some(t), Some(b)) = (net.top(i, j), net.bottom(i, j)) {
                asm.stamp(t, b, 1.0 / grid.get(i, j));
            }
        }
    }
    // Wire segments and terminals.
    let mut lines: Vec<Vec<usize>> = Vec::new();
    for i in 0..rows {
        if matches!(net.row_wires[i], WireNodes::Absent) {
            continue;
        }
        let node = |j| net.top(i, j).unwrap();
        wire_terminal(
            &mut asm,
            scenario.rows[i],
            scenario.source_resistance,
            r,
            node(0),
            node(cols - 1),
        );
        if matches!(net.row_wires[i], WireNodes::PerPosition) {
            for j in 0..cols - 1 {
                asm.stamp(node(j), node(j + 1), 1.0 / r);
            }
            lines.push((0..cols).map(|j| net.top_ids[i * cols + j]).collect());
        }
    }
    for j in 0..cols {
        if matches!(net.col_wires[j], WireNodes::Absent) {
            continue;
        }
        let node = |i| net.bottom(i, j).unwrap();
        wire_terminal(
            &mut asm,
            scenario.cols[j],
            scenario.source_resistance,
            r,
            node(0),
            node(rows - 1),
        );
        if matches!(net.col_wires[j], WireNodes::PerPosition) {
            for i in 0..rows - 1 {
                asm.stamp(node(i), node(i + 1), 1.0 / r);
            }
            lines.push((0..rows).map(|i| net.bottom_ids[i * cols + j]).collect());
        }
    }

    let (x, method, residual) = if net.n_unknowns == 0 {
        (Vec::new(), SolveMethod::Trivial, 0.0)
    } else {
        let a = CsrMatrix::from_rows(asm.rows);
        if let Some(u) = (0..a.n).find(|&u| a.get(u, u) <= 0.0) {
            return Err(Error::Connectivity(format!(
                "unknown {u} has no conductive path"
            )));
        }
        let b = asm.rhs;
        let (x, method) = if a.envelope_size() <= opts.direct_envelope_limit {
            (SkylineCholesky::factor(&a)?.solve(&b), SolveMethod::Direct)
        } else {
            let pre = LinePreconditioner::new(&a, lines);
            let (x, iterations) = solver::pcg(&a, &b, &pre, opts.tol, opts.accept, opts.max_iter)?;
            (x, SolveMethod::Iterative { iterations })
        };
        let residual = a.relative_residual(&x, &b);
        (x, method, residual)
    };

    let value = |n: Option<NodeRef>| {
        n.map(|n| match n {
            NodeRef::Unknown(k) => x[k],
            NodeRef::Fixed(v) => v,
        })
    };
    let mut top = Vec::with_capacity(rows * cols);
    let mut bottom = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            top.push(value(net.top(i, j)));
            bottom.push(value(net.bottom(i, j)));
        }
    }
    Ok(VoltageField {
        rows,
        cols,
        top,
        bottom,
        method,
        residual,
    })
}

fn wire_terminal(
    asm: &mut Assembly,
    term: Terminal,
    r_src: f64,
    r_seg: f64,
    near: NodeRef,
    far: NodeRef,
) {
    match term {
        Terminal::Floating => {}
        Terminal::Driven(v) => {
            let r = r_src + r_seg;
            if r > 0.0 {
                asm.stamp(NodeRef::Fixed(v), near, 1.0 / r);
            }
        }
        Terminal::Grounded => {
            if r_seg > 0.0 {
                asm.stamp(far, NodeRef::Fixed(0.0), 1.0 / r_seg);
            }
        }
    }
}

/// Top-electrode voltage of the cell farthest from the supply on a single
/// driven row of an `n x n` uniform array with every column grounded.
pub fn far_corner_voltage(
    n: usize,
    r_cell: f64,
    geometry: &ArrayGeometry,
    supply: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("array side must be >= 1".into()));
    }
    let scenario = DriveScenario::single_row(n, n, 0, supply);
    far_corner_voltage_with(n, r_cell, geometry, &scenario)
}

/// As [`far_corner_voltage`] with an explicit scenario; reports the top
/// electrode of the last cell on the first driven row.
pub fn far_corner_voltage_with(
    n: usize,
    r_cell: f64,
    geometry: &ArrayGeometry,
    scenario: &DriveScenario,
) -> Result<f64> {
    let grid = CellGrid::uniform(n, n, r_cell)?;
    let row = scenario
        .rows
        .iter()
        .position(|t| matches!(t, Terminal::Driven(_)))
        .ok_or_else(|| Error::InvalidParameter("scenario drives no row".into()))?;
    let field = solve_nodal(&geometry.with_size(n, n), &grid, scenario)?;
    Ok(field.top(row, n - 1).expect("driven row is present"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadInaccuracy {
    pub per_column: Vec<f64>,
    pub worst: f64,
}

/// Relative error of each column's sensed current with every row driven at
/// `v_read`, against the ideal-wire current `sum_i v_read / R_ij`.
pub fn read_inaccuracy(
    geometry: &ArrayGeometry,
    grid: &CellGrid,
    v_read: f64,
) -> Result<ReadInaccuracy> {
    let scenario = DriveScenario::all_rows(grid.rows, grid.cols, v_read);
    let field = solve_nodal(&geometry.with_size(grid.rows, grid.cols), grid, &scenario)?;
    let real = field.column_currents(grid);
    let per_column: Vec<f64> = real
        .iter()
        .enumerate()
        .map(|(j, i_real)| {
            let ideal: f64 = (0..grid.rows).map(|i| v_read / grid.get(i, j)).sum();
            (i_real - ideal).abs() / ideal
        })
        .collect();
    let worst = per_column.iter().copied().fold(0.0, f64::max);
    Ok(ReadInaccuracy { per_column, worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(r: f64) -> ArrayGeometry {
        ArrayGeometry {
            wire_res_per_cell: r,
            ..ArrayGeometry::square(4)
        }
    }

    #[test]
    fn ideal_wires_hold_supply_on_driven_rows() {
        let grid = CellGrid::uniform(8, 8, 1e4).unwrap();
        let sc = DriveScenario::rows_to_cols(8, 8, &[1, 5], &[0, 2, 7], 1.0);
        let f = solve_nodal(&geom(0.0), &grid, &sc).unwrap();
        for i in [1, 5] {
            for j in 0..8 {
                assert_eq!(f.top(i, j), Some(1.0));
            }
        }
        assert_eq!(f.top(0, 0), None);
        assert_eq!(f.method, SolveMethod::Trivial);
    }

    #[test]
    fn ideal_wires_with_source_resistance_collapse_to_one_node() {
        // One row, two columns, each cell 1k to ground, 1k source: divider.
        let grid = CellGrid::uniform(1, 2, 1e3).unwrap();
        let mut sc = DriveScenario::single_row(1, 2, 0, 1.0);
        sc.source_resistance = 1e3;
        let f = solve_nodal(&geom(0.0), &grid, &sc).unwrap();
        let v = f.top(0, 1).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-14, "{v}");
    }

    #[test]
    fn two_by_two_ladder_closed_form() {
        let (r, rc, vs) = (1.0, 1e4, 1.0);
        let z = rc + 2.0 * r;
        let z_eq = 1.0 / (1.0 / z + 1.0 / (r + z));
        let v0 = vs * z_eq / (r + z_eq);
        let v1 = v0 * z / (r + z);
        let got = far_corner_voltage(2, rc, &geom(r), vs).unwrap();
        assert!(((got - v1) / v1).abs() < 1e-12, "{got} vs {v1}");
    }

    #[test]
    fn single_cell_zero_wire_is_supply() {
        assert_eq!(far_corner_voltage(1, 1e4, &geom(0.0), 1.0).unwrap(), 1.0);
    }

    #[test]
    fn no_ground_is_connectivity_error() {
        let grid = CellGrid::uniform(2, 2, 1e4).unwrap();
        let sc = DriveScenario::rows_to_cols(2, 2, &[0], &[], 1.0);
        assert!(matches!(
            solve_nodal(&geom(1.0), &grid, &sc),
            Err(Error::Connectivity(_))
        ));
    }

    #[test]
    fn direct_and_iterative_agree() {
        let n = 12;
        let res: Vec<f64> = (0..n * n)
            .map(|k| 1e3 * (1.0 + (k * 7 % 13) as f64))
            .collect();
        let grid = CellGrid::from_vec(n, n, res).unwrap();
        let sc = DriveScenario::all_rows(n, n, 0.3);
        let g = geom(2.5);
        let direct = solve_nodal(&g, &grid, &sc).unwrap();
        let it_opts = SolveOptions {
            direct_envelope_limit: 0,
            ..SolveOptions::default()
        };
        let iter = solve_nodal_with(&g, &grid, &sc, &it_opts).unwrap();
        assert_eq!(direct.method, SolveMethod::Direct);
        assert!(matches!(iter.method, SolveMethod::Iterative { .. }));
        for (a, b) in direct.values().zip(iter.values()) {
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-3), "{a} vs {b}");
        }
        assert!(iter.residual <= 1e-10);
    }

    #[test]
    fn iterative_column_currents_match_direct_at_extreme_conductance_ratio() {
        let n = 40;
        let grid = CellGrid::uniform(n, n, 1e6).unwrap();
        let g = geom(DEFAULT_WIRE_RES_PER_CELL);
        let sc = DriveScenario::all_rows(n, n, 0.2);
        let direct = solve_nodal(&g, &grid, &sc).unwrap().column_currents(&grid);
        let it_opts = SolveOptions {
            direct_envelope_limit: 0,
            ..SolveOptions::default()
        };
        let iter = solve_nodal_with(&g, &grid, &sc, &it_opts)
            .unwrap()
            .column_currents(&grid);
        for (a, b) in direct.iter().zip(&iter) {
            assert!(((a - b) / a).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_wire_resistance_gives_zero_read_error() {
        let grid = CellGrid::uniform(6, 5, 1e4).unwrap();
        let ri = read_inaccuracy(&geom(0.0), &grid, 0.2).unwrap();
        assert!(ri.per_column.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn transpose_symmetry() {
        let res: Vec<f64> = (0..3 * 5).map(|k| 1e4 + 37.0 * k as f64).collect();
        let grid = CellGrid::from_vec(3, 5, res).unwrap();
        let sc = DriveScenario::rows_to_cols(3, 5, &[0, 2], &[1, 3, 4], 1.0);
        let g = geom(3.0);
        let f = solve_nodal(&g, &grid, &sc).unwrap();
        let ft = solve_nodal(&g, &grid.transpose(), &sc.transpose()).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                assert_eq!(f.top(i, j).is_some(), ft.bottom(j, i).is_some());
                if let (Some(a), Some(b)) = (f.top(i, j), ft.bottom(j, i)) {
                    assert!((a - b).abs() < 1e-12);
                }
                if let (Some(a), Some(b)) = (f.bottom(i, j), ft.top(j, i)) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn invalid_grid_rejected() {
        assert!(CellGrid::from_vec(2, 2, vec![1.0, 2.0, 0.0, 1.0]).is_err());
        assert!(CellGrid::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(far_corner_voltage(0, 1e4, &geom(1.0), 1.0).is_err());
    }
}
