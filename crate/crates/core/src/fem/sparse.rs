//! Compressed sparse row matrices and the linear solvers used by the driver.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given sparsity pattern; every row must be sorted
    /// and free of duplicates.
    pub fn from_pattern(n_cols: usize, rows: Vec<Vec<u32>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        for r in &rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            cols.extend_from_slice(r);
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n_rows: rows.len(),
            n_cols,
            row_ptr,
            cols,
            values: vec![0.0; nnz],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates
    /// in input order.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n_rows];
        for &(r, c, _) in triplets {
            rows[r].push(c as u32);
        }
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
        }
        let mut m = Self::from_pattern(n_cols, rows);
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.values[a..b])
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[a..b].binary_search(&(c as u32)).ok().map(|k| a + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(r, c)`, which must be in the pattern.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let k = self
            .position(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) is not in the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, r)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = 0.0;
            for k in a..b {
                acc += self.values[k] * x[self.cols[k] as usize];
            }
            *yr = acc;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |K_ij - K_ji|` over the stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c as usize, r)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c as usize] = v;
            }
        }
        d
    }

    /// Coordinate text format, one `row col value` line per stored entry
    /// (zero-based indices).
    pub fn write_coordinate(&self, out: &mut impl Write) -> std::io::Result<()> {
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(out, "{r} {c} {v:e}")?;
            }
        }
        Ok(())
    }

    pub fn write_coordinate_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_coordinate(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Which linear solver to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SolverKind {
    /// Conjugate gradients for symmetric systems, dense LU otherwise.
    #[default]
    Auto,
    Cg,
    Direct,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(SolverKind::Auto),
            "cg" | "pcg" => Ok(SolverKind::Cg),
            "direct" | "lu" => Ok(SolverKind::Direct),
            _ => Err(Error::Config(format!("unknown solver '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub tolerance: f64,
    /// Iteration cap for CG; `None` means `max(1000, 10 n)`.
    pub max_iterations: Option<usize>,
    /// Largest system the dense fallback accepts.
    pub max_direct: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kind: SolverKind::Auto,
            tolerance: 1e-10,
            max_iterations: None,
            max_direct: 6000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `||A x - b|| / ||b||` recomputed from the returned `x`.
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64], scratch: &mut [f64]) -> f64 {
    a.mul_vec(x, scratch);
    let r: f64 = scratch.iter().zip(b).map(|(ax, bi)| (bi - ax).powi(2)).sum::<f64>().sqrt();
    let nb = norm(b);
    if nb == 0.0 { r } else { r / nb }
}

/// Jacobi-preconditioned conjugate gradients from the initial guess `x`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = b.len();
    let nb = norm(b);
    if nb == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    // restart from the true residual if the recursive one drifts below tol
    for _ in 0..4 {
        a.mul_vec(x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while norm(&r) > tol * nb {
            if iterations >= max_iter {
                let residual = relative_residual(a, x, b, &mut ap);
                return Err(Error::Solver { iterations, residual });
            }
            a.mul_vec(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Numerical(format!(
                    "conjugate gradients met a non-positive curvature {pap:.3e}; the matrix is not positive definite"
                )));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
        }
        let residual = relative_residual(a, x, b, &mut ap);
        if residual <= tol {
            return Ok(SolveStats { iterations, residual });
        }
    }
    let residual = relative_residual(a, x, b, &mut ap);
    Err(Error::Solver { iterations, residual })
}

/// Dense LU with partial pivoting (nalgebra).
pub fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n_rows();
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for r in 0..n {
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            m[(r, c as usize)] = v;
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("system matrix is singular".into()))?;
    Ok(x.as_slice().to_vec())
}

/// Solves `a x = b` according to `opts`; `symmetric` selects the solver in
/// [`SolverKind::Auto`] mode. `x` holds the initial guess for CG.
pub fn solve(a: &CsrMatrix, b: &[f64], x: &mut [f64], symmetric: bool, opts: &SolverOptions) -> Result<SolveStats> {
    let n = b.len();
    let use_cg = match opts.kind {
        SolverKind::Cg => true,
        SolverKind::Direct => false,
        SolverKind::Auto => symmetric,
    };
    if use_cg {
        let cap = opts.max_iterations.unwrap_or((10 * n).max(1000));
        return pcg(a, b, x, opts.tolerance, cap);
    }
    if n > opts.max_direct {
        return Err(Error::Config(format!(
            "direct solver limited to {} unknowns, system has {n}",
            opts.max_direct
        )));
    }
    let sol = dense_solve(a, b)?;
    x.copy_from_slice(&sol);
    let mut scratch = vec![0.0; n];
    let residual = relative_residual(a, x, b, &mut scratch);
    if residual > opts.tolerance {
        return Err(Error::Solver { iterations: 1, residual });
    }
    Ok(SolveStats { iterations: 1, residual })
}
