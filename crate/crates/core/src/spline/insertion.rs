use super::knots::KnotVector;
use crate::error::{Error, Result};

/// Banded refinement matrix: row `r` has `p + 1` entries starting at column
/// `first_col[r]`. Maps coarse B-spline coefficients to fine ones.
#[derive(Clone, Debug, PartialEq)]
pub struct InsertionMatrix {
    n_rows: usize,
    n_cols: usize,
    width: usize,
    first_col: Vec<usize>,
    values: Vec<f64>,
}

impl InsertionMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let f = self.first_col[row];
        if col < f || col >= f + self.width {
            return 0.0;
        }
        self.values[row * self.width + col - f]
    }

    /// Nonzero band of a row as `(first_col, values)`.
    pub fn row(&self, row: usize) -> (usize, &[f64]) {
        let w = self.width;
        (self.first_col[row], &self.values[row * w..(row + 1) * w])
    }

    /// Fine coefficients `M c`.
    pub fn apply(&self, coarse: &[f64]) -> Vec<f64> {
        assert_eq!(coarse.len(), self.n_cols);
        (0..self.n_rows)
            .map(|r| {
                let (f, vals) = self.row(r);
                vals.iter()
                    .zip(&coarse[f..])
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows)
            .map(|r| (0..self.n_cols).map(|c| self.get(r, c)).collect())
            .collect()
    }
}

/// Refinement matrix expressing each coarse B-spline in the fine basis.
///
/// Row `j` holds the discrete B-spline values `alpha_i(j)`, computed with the
/// Oslo recursion on the coarse knots evaluated at the fine knots
/// `tau_{j+1}, ..., tau_{j+p}`.
pub fn knot_insertion_matrix(coarse: &KnotVector, fine: &KnotVector) -> Result<InsertionMatrix> {
    if !coarse.is_nested_in(fine) {
        return Err(Error::NotNested(format!(
            "degree {} knot vector with {} elements is not a sub-multiset of the degree {} one with {}",
            coarse.degree(),
            coarse.num_elements(),
            fine.degree(),
            fine.num_elements()
        )));
    }
    let p = coarse.degree();
    let t = coarse.knots();
    let tau = fine.knots();
    let n_rows = fine.num_basis();
    let n_cols = coarse.num_basis();
    let width = p + 1;
    let mut first_col = Vec::with_capacity(n_rows);
    let mut values = vec![0.0; n_rows * width];
    let mut b = [0.0f64; super::knots::MAX_DEGREE + 2];
    let mut mu = p;
    for j in 0..n_rows {
        // coarse span containing tau_j (tau_j < 1 for every row)
        while mu + 1 < n_cols && t[mu + 1] <= tau[j] {
            mu += 1;
        }
        // b[r] is the coefficient for coarse index mu - k + r at stage k
        b.iter_mut().for_each(|v| *v = 0.0);
        b[0] = 1.0;
        for k in 1..=p {
            let x = tau[j + k];
            let mut next = [0.0f64; super::knots::MAX_DEGREE + 2];
            for r in 0..=k {
                let i = mu + r - k;
                let mut v = 0.0;
                if r >= 1 {
                    // from b_old at coarse index i (position r - 1)
                    let d = t[i + k] - t[i];
                    if d > 0.0 {
                        v += (x - t[i]) / d * b[r - 1];
                    }
                }
                if r < k {
                    // from b_old at coarse index i + 1 (position r)
                    let d = t[i + k + 1] - t[i + 1];
                    if d > 0.0 {
                        v += (t[i + k + 1] - x) / d * b[r];
                    }
                }
                next[r] = v;
            }
            b = next;
        }
        first_col.push(mu - p);
        values[j * width..(j + 1) * width].copy_from_slice(&b[..width]);
    }
    Ok(InsertionMatrix {
        n_rows,
        n_cols,
        width,
        first_col,
        values,
    })
}
