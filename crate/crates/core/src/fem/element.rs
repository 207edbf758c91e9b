//! Values of the local tensor B-splines of one element at its quadrature
//! points, pushed forward to the physical domain.

use crate::error::{Error, Result};
use crate::geometry::{inverse, NurbsGeometry};
use crate::quadrature::gauss;
use crate::spline::TensorSpace;

/// Tabulated local basis on one element. Arrays are indexed
/// `[point * n_local + local]`.
#[derive(Clone, Debug)]
pub struct ElementValues {
    pub n_local: usize,
    /// Physical points.
    pub x: Vec<[f64; 2]>,
    /// Parametric points.
    pub t: Vec<[f64; 2]>,
    /// Quadrature weight times `|det DF|`.
    pub weight: Vec<f64>,
    pub jacobian: Vec<[[f64; 2]; 2]>,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    /// Physical Hessians; empty unless requested.
    pub hessians: Vec<[[f64; 2]; 2]>,
}

impl ElementValues {
    pub fn n_points(&self) -> usize {
        self.weight.len()
    }

    /// Value, gradient and (if tabulated) Hessian at point `q` of the
    /// function with local coefficients `c`.
    pub fn combine(&self, q: usize, c: &[f64]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let base = q * self.n_local;
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for (a, &ca) in c.iter().enumerate() {
            if ca == 0.0 {
                continue;
            }
            v += ca * self.values[base + a];
            let ga = self.grads[base + a];
            g[0] += ca * ga[0];
            g[1] += ca * ga[1];
            if !self.hessians.is_empty() {
                let ha = self.hessians[base + a];
                for i in 0..2 {
                    for j in 0..2 {
                        h[i][j] += ca * ha[i][j];
                    }
                }
            }
        }
        (v, g, h)
    }
}

/// Tabulates the `(p_0+1)(p_1+1)` local B-splines of `element` (of `space`)
/// on an `nq x nq` Gauss rule over the box `bounds`, which must lie inside
/// the element. `order` is 1 or 2.
pub fn tabulate(
    space: &TensorSpace<2>,
    geom: &NurbsGeometry<2>,
    element: [usize; 2],
    bounds: [(f64, f64); 2],
    nq: usize,
    order: usize,
) -> Result<ElementValues> {
    tabulate_split(space, geom, element, bounds, nq, [&[], &[]], order)
}

/// Like [`tabulate`], but the box is first cut along the parametric lines
/// `breaks[k]` (coordinates along axis `k`) that cross it, with an
/// `nq x nq` rule on every piece.
pub fn tabulate_split(
    space: &TensorSpace<2>,
    geom: &NurbsGeometry<2>,
    element: [usize; 2],
    bounds: [(f64, f64); 2],
    nq: usize,
    breaks: [&[f64]; 2],
    order: usize,
) -> Result<ElementValues> {
    let rule = gauss(nq);
    let axis = |k: usize| -> Vec<(f64, f64)> {
        let (lo, hi) = bounds[k];
        let mut cuts = vec![lo];
        cuts.extend(breaks[k].iter().copied().filter(|&b| lo < b && b < hi));
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        let mut out = Vec::with_capacity(nq * (cuts.len() - 1));
        for w in cuts.windows(2) {
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                out.push((w[0] + (w[1] - w[0]) * x, wt * (w[1] - w[0])));
            }
        }
        out
    };
    let (a0, a1) = (axis(0), axis(1));
    let mut pts = Vec::with_capacity(a0.len() * a1.len());
    let mut wts = Vec::with_capacity(a0.len() * a1.len());
    for &(x0, w0) in &a0 {
        for &(x1, w1) in &a1 {
            pts.push([x0, x1]);
            wts.push(w0 * w1);
        }
    }
    tabulate_at(space, geom, element, &pts, &wts, order)
}

/// Tabulates the local B-splines of `element` at arbitrary parametric points
/// of its closure; `weight[q]` becomes `weights[q] * |det DF|`.
pub fn tabulate_at(
    space: &TensorSpace<2>,
    geom: &NurbsGeometry<2>,
    element: [usize; 2],
    points: &[[f64; 2]],
    weights: &[f64],
    order: usize,
) -> Result<ElementValues> {
    let deg = space.degrees();
    let n1 = [deg[0] + 1, deg[1] + 1];
    let n_local = n1[0] * n1[1];
    let npts = points.len();
    let mut out = ElementValues {
        n_local,
        x: Vec::with_capacity(npts),
        t: points.to_vec(),
        weight: Vec::with_capacity(npts),
        jacobian: Vec::with_capacity(npts),
        values: Vec::with_capacity(npts * n_local),
        grads: Vec::with_capacity(npts * n_local),
        hessians: if order >= 2 { Vec::with_capacity(npts * n_local) } else { Vec::new() },
    };
    let mut d0 = vec![0.0; (order + 1) * n1[0]];
    let mut d1 = vec![0.0; (order + 1) * n1[1]];
    for (&t, &w) in points.iter().zip(weights) {
        space.knots(0).eval_on_element(element[0], t[0], order, &mut d0);
        space.knots(1).eval_on_element(element[1], t[1], order, &mut d1);
        let gp = geom.eval(t, order)?;
        let det = gp.det();
        if !(det > 0.0) {
            return Err(Error::Geometry(format!(
                "Jacobian determinant {det:.3e} is not positive at {t:?}"
            )));
        }
        let jinv = inverse(&gp.jacobian)
            .ok_or_else(|| Error::Geometry(format!("singular Jacobian at {t:?}")))?;
        out.x.push(gp.x);
        out.weight.push(w * det);
        out.jacobian.push(gp.jacobian);
        for a0 in 0..n1[0] {
            for a1 in 0..n1[1] {
                let v = d0[a0] * d1[a1];
                let gt = [d0[n1[0] + a0] * d1[a1], d0[a0] * d1[n1[1] + a1]];
                // physical gradient: g_i = sum_a gt_a Jinv[a][i]
                let g = [
                    gt[0] * jinv[0][0] + gt[1] * jinv[1][0],
                    gt[0] * jinv[0][1] + gt[1] * jinv[1][1],
                ];
                out.values.push(v);
                out.grads.push(g);
                if order >= 2 {
                    let mut m = [
                        [d0[2 * n1[0] + a0] * d1[a1], d0[n1[0] + a0] * d1[n1[1] + a1]],
                        [d0[n1[0] + a0] * d1[n1[1] + a1], d0[a0] * d1[2 * n1[1] + a1]],
                    ];
                    // subtract the curvature of F, then H_x = Jinv^T M Jinv
                    for (i, gi) in g.iter().enumerate() {
                        for r in 0..2 {
                            for c in 0..2 {
                                m[r][c] -= gi * gp.hessian[i][r][c];
                            }
                        }
                    }
                    let mut h = [[0.0; 2]; 2];
                    for i in 0..2 {
                        for j in 0..2 {
                            let mut acc = 0.0;
                            for r in 0..2 {
                                for c in 0..2 {
                                    acc += jinv[r][i] * m[r][c] * jinv[c][j];
                                }
                            }
                            h[i][j] = acc;
                        }
                    }
                    out.hessians.push(h);
                }
            }
        }
    }
    Ok(out)
}
