//! Sparse symmetric positive-definite solvers for the crossbar nodal system.
//!
//! Two routes: an envelope (skyline) Cholesky factorization for systems whose
//! profile fits a memory budget, and conjugate gradient preconditioned by exact
//! tridiagonal solves along each wire ("line Jacobi"). Wires couple to each
//! other only through cell conductances, which are many orders of magnitude
//! smaller than segment conductances, so the line preconditioner captures
//! nearly all of the operator.

use crate::error::{Error, Result};

/// Compressed sparse row matrix. Column indices are sorted within each row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let start = col_idx.len();
            for (c, v) in row {
                if col_idx.len() > start && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `||A x - b|| / ||b||`, or `||A x||` when `b` is zero.
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        self.mul_vec(x, &mut ax);
        let r = norm(ax.iter().zip(b).map(|(a, b)| a - b));
        let bn = norm(b.iter().copied());
        if bn > 0.0 {
            r / bn
        } else {
            r
        }
    }

    /// Number of stored entries in the lower envelope (profile) of the matrix.
    pub fn envelope_size(&self) -> usize {
        (0..self.n)
            .map(|i| {
                let first = self.row(i).map(|(c, _)| c).next().unwrap_or(i).min(i);
                i - first + 1
            })
            .sum()
    }
}

fn norm(it: impl Iterator<Item = f64>) -> f64 {
    it.map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Envelope Cholesky factor `A = L L^T`, lower triangle stored row-wise from the
/// first nonzero column of each row.
pub struct SkylineCholesky {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut first = Vec::with_capacity(n);
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            let f = a.row(i).map(|(c, _)| c).next().unwrap_or(i).min(i);
            first.push(f);
            offset.push(offset[i] + (i - f + 1));
        }
        let mut data = vec![0.0; offset[n]];
        for i in 0..n {
            for (c, v) in a.row(i) {
                if c <= i {
                    data[offset[i] + c - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut s = data[offset[i] + j - fi];
                let ri = &data[offset[i] + start - fi..offset[i] + j - fi];
                let rj = &data[offset[j] + start - fj..offset[j] + j - fj];
                s -= dot(ri, rj);
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::Connectivity(format!(
                            "conductance matrix not positive definite at unknown {i}"
                        )));
                    }
                    data[offset[i] + i - fi] = s.sqrt();
                } else {
                    data[offset[i] + j - fi] = s / data[offset[j] + j - fj];
                }
            }
        }
        Ok(Self {
            first,
            offset,
            data,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.first.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let s = dot(&row[..i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (k, l) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        y
    }
}

/// Block-diagonal preconditioner: exact tridiagonal solves on each line of
/// unknowns, plain Jacobi on the rest.
pub struct LinePreconditioner {
    lines: Vec<Vec<usize>>,
    // Per line: forward-elimination multipliers and pivots of the LDL^T factor.
    factors: Vec<(Vec<f64>, Vec<f64>)>,
    jacobi: Vec<(usize, f64)>,
}

impl LinePreconditioner {
    pub fn new(a: &CsrMatrix, lines: Vec<Vec<usize>>) -> Self {
        let mut covered = vec![false; a.n];
        let mut factors = Vec::with_capacity(lines.len());
        for line in &lines {
            let m = line.len();
            let mut piv = Vec::with_capacity(m);
            let mut mult = Vec::with_capacity(m.saturating_sub(1));
            for (k, &u) in line.iter().enumerate() {
                covered[u] = true;
                let d = a.get(u, u);
                if k == 0 {
                    piv.push(d);
                } else {
                    let e = a.get(line[k - 1], u);
                    let l = e / piv[k - 1];
                    mult.push(l);
                    piv.push(d - l * e);
                }
            }
            factors.push((mult, piv));
        }
        let jacobi = (0..a.n)
            .filter(|&i| !covered[i])
            .map(|i| (i, 1.0 / a.get(i, i)))
            .collect();
        Self {
            lines,
            factors,
            jacobi,
        }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        for (line, (mult, piv)) in self.lines.iter().zip(&self.factors) {
            let m = line.len();
            let mut prev = 0.0;
            for k in 0..m {
                let v = if k == 0 {
                    r[line[0]]
                } else {
                    r[line[k]] - mult[k - 1] * prev
                };
                z[line[k]] = v;
                prev = v;
            }
            let mut next = 0.0;
            for k in (0..m).rev() {
                let v = if k + 1 == m {
                    z[line[k]] / piv[k]
                } else {
                    z[line[k]] / piv[k] - mult[k] * next
                };
                z[line[k]] = v;
                next = v;
            }
        }
        for &(i, inv) in &self.jacobi {
            z[i] = r[i] * inv;
        }
    }
}

/// Preconditioned conjugate gradient aiming for relative residual `tol`.
/// When restarts stop improving the true residual (rounding floor), a
/// residual at or below `accept` is returned as converged. Returns the
/// solution and iteration count.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    pre: &LinePreconditioner,
    tol: f64,
    accept: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let bnorm = norm(b.iter().copied());
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut last_true = f64::INFINITY;
    for it in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(r.iter().copied()) / bnorm <= tol {
            // Recurrence residuals drift; confirm against the true residual.
            let true_res = a.relative_residual(&x, b);
            if true_res <= tol || (true_res <= accept && true_res > 0.5 * last_true) {
                return Ok((x, it));
            }
            last_true = true_res;
            // Restart from the true residual; conjugacy is lost by now.
            a.mul_vec(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            pre.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let residual = a.relative_residual(&x, b);
    if residual <= accept {
        return Ok((x, max_iter));
    }
    Err(Error::NoConvergence {
        residual,
        iterations: max_iter,
    })
}
