use nalgebra::DMatrix;

use super::knots::KnotVector;
use crate::error::{Error, Result};
use crate::quadrature::gauss;

/// Tensor-product spline space on `[0, 1]^D`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpace<const D: usize> {
    knots: [KnotVector; D],
}

/// Inclusive per-direction index ranges.
pub type IndexBox<const D: usize> = [(usize, usize); D];

impl<const D: usize> TensorSpace<D> {
    pub fn new(knots: [KnotVector; D]) -> Self {
        TensorSpace { knots }
    }

    pub fn knots(&self, dir: usize) -> &KnotVector {
        &self.knots[dir]
    }

    pub fn all_knots(&self) -> &[KnotVector; D] {
        &self.knots
    }

    pub fn degrees(&self) -> [usize; D] {
        std::array::from_fn(|k| self.knots[k].degree())
    }

    pub fn basis_shape(&self) -> [usize; D] {
        std::array::from_fn(|k| self.knots[k].num_basis())
    }

    pub fn element_shape(&self) -> [usize; D] {
        std::array::from_fn(|k| self.knots[k].num_elements())
    }

    pub fn dimension(&self) -> usize {
        self.basis_shape().iter().product()
    }

    pub fn num_elements(&self) -> usize {
        self.element_shape().iter().product()
    }

    /// Number of B-splines nonzero on one element, `prod (p_k + 1)`.
    pub fn local_count(&self) -> usize {
        self.degrees().iter().map(|p| p + 1).product()
    }

    pub fn element_bounds(&self, element: [usize; D]) -> [(f64, f64); D] {
        std::array::from_fn(|k| self.knots[k].element_bounds(element[k]))
    }

    pub fn first_basis(&self, element: [usize; D]) -> [usize; D] {
        std::array::from_fn(|k| self.knots[k].first_basis(element[k]))
    }

    /// Element box covered by the support of B-spline `i`.
    pub fn support_elements(&self, i: [usize; D]) -> IndexBox<D> {
        std::array::from_fn(|k| self.knots[k].support_elements(i[k]))
    }

    /// Element box of the support extension of `element`.
    pub fn support_extension(&self, element: [usize; D]) -> IndexBox<D> {
        std::array::from_fn(|k| self.knots[k].support_extension(element[k]))
    }

    /// Flat lexicographic index (direction 0 slowest) of a local offset.
    pub fn local_flat(&self, offset: [usize; D]) -> usize {
        let mut idx = 0;
        for k in 0..D {
            idx = idx * (self.knots[k].degree() + 1) + offset[k];
        }
        idx
    }

    /// Flat lexicographic index of a global B-spline multi-index.
    pub fn global_flat(&self, i: [usize; D]) -> usize {
        let shape = self.basis_shape();
        let mut idx = 0;
        for k in 0..D {
            idx = idx * shape[k] + i[k];
        }
        idx
    }

    pub fn global_unflat(&self, mut idx: usize) -> [usize; D] {
        let shape = self.basis_shape();
        let mut out = [0; D];
        for k in (0..D).rev() {
            out[k] = idx % shape[k];
            idx /= shape[k];
        }
        out
    }

    /// Element containing the parametric point `t`.
    pub fn find_element(&self, t: [f64; D]) -> Result<[usize; D]> {
        let mut e = [0; D];
        for k in 0..D {
            e[k] = self.knots[k].find_element(t[k])?;
        }
        Ok(e)
    }

    /// Values of all B-splines at `t` as `(multi-index, value)` pairs for the
    /// local functions of the containing element.
    pub fn eval_nonzero(&self, t: [f64; D]) -> Result<Vec<([usize; D], f64)>> {
        let el = self.find_element(t)?;
        let first = self.first_basis(el);
        let per_dir: Vec<Vec<f64>> = (0..D)
            .map(|k| {
                let mut v = vec![0.0; self.knots[k].degree() + 1];
                self.knots[k].eval_on_element(el[k], t[k], 0, &mut v);
                v
            })
            .collect();
        let mut out = Vec::with_capacity(self.local_count());
        for_each_offset(self.degrees(), |off| {
            let mut v = 1.0;
            for k in 0..D {
                v *= per_dir[k][off[k]];
            }
            out.push((std::array::from_fn(|k| first[k] + off[k]), v));
        });
        Ok(out)
    }

    /// Values at `t` of the local B-splines of `element`, in local flat order.
    pub fn local_values(&self, element: [usize; D], t: [f64; D]) -> Vec<f64> {
        let per_dir: Vec<Vec<f64>> = (0..D)
            .map(|k| {
                let mut v = vec![0.0; self.knots[k].degree() + 1];
                self.knots[k].eval_on_element(element[k], t[k], 0, &mut v);
                v
            })
            .collect();
        let mut out = Vec::with_capacity(self.local_count());
        for_each_offset(self.degrees(), |off| {
            out.push((0..D).map(|k| per_dir[k][off[k]]).product());
        });
        out
    }

    /// Evaluates the spline with coefficients `coeffs` (flat global order).
    pub fn eval_spline(&self, coeffs: &[f64], t: [f64; D]) -> Result<f64> {
        Ok(self
            .eval_nonzero(t)?
            .into_iter()
            .map(|(i, v)| v * coeffs[self.global_flat(i)])
            .sum())
    }

    /// Element used by the Bézier projection for B-spline `i`: per direction,
    /// the support element whose centre is closest to the support midpoint,
    /// lowest index on ties.
    pub fn projection_element(&self, i: [usize; D]) -> [usize; D] {
        std::array::from_fn(|k| {
            let kv = &self.knots[k];
            let mid = kv.support_midpoint(i[k]);
            let (lo, hi) = kv.support_elements(i[k]);
            let mut best = lo;
            let mut best_d = f64::INFINITY;
            for e in lo..=hi {
                let (a, b) = kv.element_bounds(e);
                let d = (0.5 * (a + b) - mid).abs();
                if d < best_d {
                    best = e;
                    best_d = d;
                }
            }
            best
        })
    }

    /// Dual functional of B-spline `i` realized as the local L² projection onto
    /// the B-splines living on `element`; `i` must be one of them.
    pub fn local_projection_coefficient<F>(&self, i: [usize; D], element: [usize; D], f: F) -> Result<f64>
    where
        F: Fn([f64; D]) -> f64,
    {
        let first = self.first_basis(element);
        for k in 0..D {
            let p = self.knots[k].degree();
            if i[k] < first[k] || i[k] > first[k] + p {
                return Err(Error::Argument(format!(
                    "B-spline {:?} does not live on element {:?}",
                    i, element
                )));
            }
        }
        // separable dual functions sampled at the Gauss points
        let mut duals: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::with_capacity(D);
        for k in 0..D {
            let kv = &self.knots[k];
            let (pts, wts, dual) = local_dual(kv, element[k], i[k] - first[k])?;
            duals.push((pts, wts, dual));
        }
        let nq: [usize; D] = std::array::from_fn(|k| duals[k].0.len());
        let mut total = 0.0;
        let mut q = [0usize; D];
        loop {
            let mut w = 1.0;
            let mut x = [0.0; D];
            for k in 0..D {
                x[k] = duals[k].0[q[k]];
                w *= duals[k].1[q[k]] * duals[k].2[q[k]];
            }
            total += w * f(x);
            if !advance(&mut q, &nq) {
                break;
            }
        }
        if !total.is_finite() {
            return Err(Error::Numerical(format!(
                "local projection of B-spline {:?} on element {:?} produced {}",
                i, element, total
            )));
        }
        Ok(total)
    }

    /// Bézier-projection coefficient of `f` for B-spline `i`.
    pub fn bezier_projection_coefficient<F>(&self, i: [usize; D], f: F) -> Result<f64>
    where
        F: Fn([f64; D]) -> f64,
    {
        self.local_projection_coefficient(i, self.projection_element(i), f)
    }

    /// All Bézier-projection coefficients in flat global order.
    pub fn bezier_projection<F>(&self, f: F) -> Result<Vec<f64>>
    where
        F: Fn([f64; D]) -> f64,
    {
        (0..self.dimension())
            .map(|g| self.bezier_projection_coefficient(self.global_unflat(g), &f))
            .collect()
    }

    /// Uniform dyadic bisection of every element in every direction.
    pub fn bisect(&self, multiplicity: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(D);
        for k in 0..D {
            out.push(self.knots[k].bisect(multiplicity)?);
        }
        Ok(TensorSpace {
            knots: out.try_into().expect("dimension preserved"),
        })
    }
}

/// Gauss points, weights and the values of the dual function of local
/// B-spline `a` on `element` (one direction, `p + 1` points).
pub(crate) fn local_dual(kv: &KnotVector, element: usize, a: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let p = kv.degree();
    let rule = gauss(p + 1);
    let (lo, hi) = kv.element_bounds(element);
    let mut pts = Vec::with_capacity(p + 1);
    let mut wts = Vec::with_capacity(p + 1);
    let mut vals = DMatrix::<f64>::zeros(p + 1, p + 1); // [point, local fn]
    let mut buf = vec![0.0; p + 1];
    for (q, (x, w)) in rule.mapped(lo, hi).enumerate() {
        kv.eval_on_element(element, x, 0, &mut buf);
        for b in 0..=p {
            vals[(q, b)] = buf[b];
        }
        pts.push(x);
        wts.push(w);
    }
    let mut gram = DMatrix::<f64>::zeros(p + 1, p + 1);
    for q in 0..=p {
        for a1 in 0..=p {
            for a2 in 0..=p {
                gram[(a1, a2)] += wts[q] * vals[(q, a1)] * vals[(q, a2)];
            }
        }
    }
    // symmetric diagonal scaling keeps the solve accurate when some local
    // functions barely reach into the element
    let scale: Vec<f64> = (0..=p).map(|b| 1.0 / gram[(b, b)].sqrt()).collect();
    for r in 0..=p {
        for c in 0..=p {
            gram[(r, c)] *= scale[r] * scale[c];
        }
    }
    let singular = || {
        Error::Numerical(format!(
            "singular local Gram matrix on element [{lo}, {hi}] (degree {p})"
        ))
    };
    if scale.iter().any(|s| !s.is_finite()) {
        return Err(singular());
    }
    let chol = gram.cholesky().ok_or_else(singular)?;
    let mut e = nalgebra::DVector::<f64>::zeros(p + 1);
    e[a] = scale[a];
    let row = chol.solve(&e);
    let dual = (0..=p)
        .map(|q| (0..=p).map(|b| row[b] * scale[b] * vals[(q, b)]).sum())
        .collect();
    Ok((pts, wts, dual))
}

/// Calls `f` for each offset in `0..=p_k` per direction, lexicographically.
pub(crate) fn for_each_offset<const D: usize>(degrees: [usize; D], mut f: impl FnMut([usize; D])) {
    let lim: [usize; D] = std::array::from_fn(|k| degrees[k] + 1);
    let mut q = [0usize; D];
    loop {
        f(q);
        if !advance(&mut q, &lim) {
            break;
        }
    }
}

/// Calls `f` for each multi-index inside an inclusive box, lexicographically.
pub fn for_each_in_box<const D: usize>(b: &IndexBox<D>, mut f: impl FnMut([usize; D])) {
    let lim: [usize; D] = std::array::from_fn(|k| b[k].1 - b[k].0 + 1);
    let mut q = [0usize; D];
    loop {
        f(std::array::from_fn(|k| b[k].0 + q[k]));
        if !advance(&mut q, &lim) {
            break;
        }
    }
}

/// Lexicographic increment (last direction fastest); false after the last.
pub(crate) fn advance<const D: usize>(q: &mut [usize; D], lim: &[usize; D]) -> bool {
    for k in (0..D).rev() {
        q[k] += 1;
        if q[k] < lim[k] {
            return true;
        }
        q[k] = 0;
    }
    false
}
