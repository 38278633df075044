//! Crossbar solver against an independent dense nodal solve.

mod common;

use common::oracle::{oracle_deviation, random_case};
use nvmsim::crossbar::{far_corner_voltage, solve_nodal, ArrayGeometry, SolveOptions};
use nvmsim::rng::derive_stream;

#[test]
fn direct_solver_matches_dense_oracle_on_random_small_grids() {
    let mut rng = derive_stream(11, &[]);
    for _ in 0..1000 {
        let (r, grid, sc) = random_case(&mut rng);
        let dev = oracle_deviation(r, &grid, &sc, &SolveOptions::default());
        assert!(
            dev < 1e-9,
            "deviation {dev} for r={r} grid={grid:?} scenario={sc:?}"
        );
    }
}

#[test]
fn iterative_solver_matches_dense_oracle_on_random_small_grids() {
    let mut rng = derive_stream(12, &[]);
    let opts = SolveOptions {
        direct_envelope_limit: 0,
        ..SolveOptions::default()
    };
    for _ in 0..1000 {
        let (r, grid, sc) = random_case(&mut rng);
        let dev = oracle_deviation(r, &grid, &sc, &opts);
        assert!(
            dev < 1e-9,
            "deviation {dev} for r={r} grid={grid:?} scenario={sc:?}"
        );
    }
}

#[test]
fn two_cell_ladder_closed_form() {
    // One driven row of two cells, both columns grounded, R = 10 kOhm, r = 1 Ohm.
    let (r, big_r, v) = (1.0, 1e4, 1.0);
    let geometry = ArrayGeometry {
        wire_res_per_cell: r,
        ..ArrayGeometry::square(2)
    };
    let got = far_corner_voltage(2, big_r, &geometry, v).unwrap();
    // Row 1 floats, so each cell reaches ground through R plus two column
    // segments. Top nodes: (v - t0)/r = (t0 - t1)/r + t0/leg, (t0 - t1)/r = t1/leg.
    let leg = big_r + 2.0 * r;
    let t1_over_t0 = leg / (leg + r);
    let t0 = v / (1.0 + r / leg + (1.0 - t1_over_t0));
    let want = t0 * t1_over_t0;
    assert!(((got - want) / want).abs() < 1e-9, "{got} vs {want}");
}

#[test]
fn far_corner_is_monotone_in_size_and_resistance() {
    let geometry = ArrayGeometry::default();
    let sizes = [32, 128, 512, 1024];
    let rs = [1e4, 1e5, 1e6];
    let table: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&n| {
            rs.iter()
                .map(|&r| far_corner_voltage(n, r, &geometry, 1.2).unwrap())
                .collect()
        })
        .collect();
    for row in &table {
        assert!(
            row.windows(2).all(|w| w[0] < w[1]),
            "not increasing in R: {row:?}"
        );
    }
    for k in 0..rs.len() {
        assert!(
            table.windows(2).all(|w| w[0][k] > w[1][k]),
            "not decreasing in N at R index {k}"
        );
    }
}

#[test]
fn transposed_problem_gives_transposed_field() {
    let mut rng = derive_stream(13, &[]);
    for _ in 0..200 {
        let (r, grid, sc) = random_case(&mut rng);
        let geometry = ArrayGeometry {
            wire_res_per_cell: r,
            ..ArrayGeometry::square(4)
        };
        let a = solve_nodal(&geometry, &grid, &sc).unwrap();
        let b = solve_nodal(&geometry, &grid.transpose(), &sc.transpose()).unwrap();
        for i in 0..grid.rows() {
            for j in 0..grid.cols() {
                match (a.top(i, j), b.bottom(j, i)) {
                    (Some(x), Some(y)) => assert!((x - y).abs() < 1e-9),
                    (None, None) => {}
                    other => panic!("node presence differs: {other:?}"),
                }
            }
        }
    }
}
