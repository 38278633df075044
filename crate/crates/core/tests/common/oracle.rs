//! Dense brute-force nodal solve used as an oracle for the crossbar solver.

#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use nvmsim::crossbar::{
    solve_nodal_with, ArrayGeometry, CellGrid, DriveScenario, SolveOptions, Terminal,
};
use rand::Rng;

/// Dense Kirchhoff solve. Every (wire, position) is a node; a wire with zero
/// segment resistance collapses to a single node.
pub fn dense_oracle(
    r: f64,
    grid: &CellGrid,
    sc: &DriveScenario,
) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let (rows, cols) = (grid.rows(), grid.cols());
    let mut ids: Vec<Vec<usize>> = Vec::new();
    let mut n = 0;
    let mut wire_ids = |len: usize, term: Terminal| -> Vec<usize> {
        if term == Terminal::Floating {
            return Vec::new();
        }
        if r == 0.0 {
            n += 1;
            vec![n - 1; len]
        } else {
            n += len;
            (n - len..n).collect()
        }
    };
    for i in 0..rows {
        ids.push(wire_ids(cols, sc.rows[i]));
    }
    for j in 0..cols {
        ids.push(wire_ids(rows, sc.cols[j]));
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let link = |a: &mut DMatrix<f64>, p: usize, q: usize, g: f64| {
        if p != q {
            a[(p, p)] += g;
            a[(q, q)] += g;
            a[(p, q)] -= g;
            a[(q, p)] -= g;
        }
    };
    for i in 0..rows {
        for j in 0..cols {
            if let (Some(&t), Some(&bt)) = (ids[i].get(j), ids[rows + j].get(i)) {
                link(&mut a, t, bt, 1.0 / grid.get(i, j));
            }
        }
    }
    let mut terminal =
        |a: &mut DMatrix<f64>, b: &mut DVector<f64>, nodes: &[usize], term: Terminal| {
            if nodes.is_empty() {
                return;
            }
            if r > 0.0 {
                for k in 0..nodes.len() - 1 {
                    link(a, nodes[k], nodes[k + 1], 1.0 / r);
                }
            }
            match term {
                Terminal::Floating => {}
                Terminal::Driven(v) => {
                    let rs = sc.source_resistance + r;
                    if rs > 0.0 {
                        a[(nodes[0], nodes[0])] += 1.0 / rs;
                        b[nodes[0]] += v / rs;
                    } else {
                        fixed[nodes[0]] = Some(v);
                    }
                }
                Terminal::Grounded => {
                    let last = *nodes.last().unwrap();
                    if r > 0.0 {
                        a[(last, last)] += 1.0 / r;
                    } else {
                        fixed[last] = Some(0.0);
                    }
                }
            }
        };
    for i in 0..rows {
        terminal(&mut a, &mut b, &ids[i], sc.rows[i]);
    }
    for j in 0..cols {
        terminal(&mut a, &mut b, &ids[rows + j], sc.cols[j]);
    }
    for (k, f) in fixed.iter().enumerate() {
        if let Some(v) = f {
            for c in 0..n {
                a[(k, c)] = 0.0;
            }
            a[(k, k)] = 1.0;
            b[k] = *v;
        }
    }
    let x = a.lu().solve(&b).expect("oracle system is nonsingular");
    let mut top = Vec::new();
    let mut bottom = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            top.push(ids[i].get(j).map(|&k| x[k]));
            bottom.push(ids[rows + j].get(i).map(|&k| x[k]));
        }
    }
    (top, bottom)
}

pub fn random_case<R: Rng>(rng: &mut R) -> (f64, CellGrid, DriveScenario) {
    let rows = rng.gen_range(1..=4);
    let cols = rng.gen_range(1..=4);
    let res: Vec<f64> = (0..rows * cols)
        .map(|_| 10f64.powf(rng.gen_range(3.0..7.0)))
        .collect();
    let grid = CellGrid::from_vec(rows, cols, res).unwrap();
    let pick = |rng: &mut R| match rng.gen_range(0..3) {
        0 => Terminal::Floating,
        1 => Terminal::Driven(rng.gen_range(0.1..1.5)),
        _ => Terminal::Grounded,
    };
    let mut sc = DriveScenario {
        rows: (0..rows).map(|_| pick(rng)).collect(),
        cols: (0..cols).map(|_| pick(rng)).collect(),
        source_resistance: if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(1.0..100.0)
        },
    };
    sc.rows[rng.gen_range(0..rows)] = Terminal::Driven(1.0);
    sc.cols[rng.gen_range(0..cols)] = Terminal::Grounded;
    let r = match rng.gen_range(0..4) {
        0 => 0.0,
        _ => 10f64.powf(rng.gen_range(-3.0..2.0)),
    };
    (r, grid, sc)
}

/// Largest node deviation relative to the largest oracle voltage.
pub fn oracle_deviation(r: f64, grid: &CellGrid, sc: &DriveScenario, opts: &SolveOptions) -> f64 {
    let geometry = ArrayGeometry {
        wire_res_per_cell: r,
        ..ArrayGeometry::square(grid.rows())
    };
    let field = solve_nodal_with(&geometry, grid, sc, opts).unwrap();
    assert!(field.residual <= 1e-10, "residual {}", field.residual);
    let (top, bottom) = dense_oracle(r, grid, sc);
    let scale = top
        .iter()
        .chain(&bottom)
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for i in 0..grid.rows() {
        for j in 0..grid.cols() {
            let k = i * grid.cols() + j;
            for (got, want) in [(field.top(i, j), top[k]), (field.bottom(i, j), bottom[k])] {
                match (got, want) {
                    (Some(g), Some(w)) => worst = worst.max((g - w).abs() / scale),
                    (None, None) => {}
                    _ => return f64::INFINITY,
                }
            }
        }
    }
    worst
}
