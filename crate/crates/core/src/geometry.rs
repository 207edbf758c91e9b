//! Single-patch NURBS parametrizations of the physical domain.
//!
//! Text format (control points in lexicographic order, direction 0 slowest):
//! ```text
//! nurbs
//! dim 2
//! degree 2 2
//! knots 0:3 1:3
//! knots 0:3 1:3
//! 1 0 1
//! 1 1 0.7071067811865476
//! ...
//! ```
//! Each control row is `x_1 .. x_d w`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hier::io::parse_knot_tokens;
use crate::quadrature::gauss;
use crate::spline::{for_each_offset, KnotVector, TensorSpace};

/// Value and derivatives of the parametrization at one parametric point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryPoint<const D: usize> {
    pub x: [f64; D],
    /// `jacobian[i][a] = dF_i / dt_a`
    pub jacobian: [[f64; D]; D],
    /// `hessian[i][a][b] = d²F_i / dt_a dt_b`; zero unless requested.
    pub hessian: [[[f64; D]; D]; D],
}

impl<const D: usize> GeometryPoint<D> {
    pub fn det(&self) -> f64 {
        det(&self.jacobian)
    }
}

/// Rational tensor-product map `F(t) = sum_i w_i C_i B_i(t) / sum_i w_i B_i(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NurbsGeometry<const D: usize> {
    space: TensorSpace<D>,
    control: Vec<[f64; D]>,
    weights: Vec<f64>,
    rational: bool,
    // `(A, b)` when the map is affine, evaluated directly
    linear: Option<([[f64; D]; D], [f64; D])>,
}

impl<const D: usize> NurbsGeometry<D> {
    pub fn new(space: TensorSpace<D>, control: Vec<[f64; D]>, weights: Vec<f64>) -> Result<Self> {
        let n = space.dimension();
        if control.len() != n || weights.len() != n {
            return Err(Error::Geometry(format!(
                "expected {n} control points and weights, got {} and {}",
                control.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Geometry(format!("weight {w} is not positive")));
        }
        if control.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Geometry("control point is not finite".into()));
        }
        let rational = weights.iter().any(|&w| w != weights[0]);
        let mut g = NurbsGeometry {
            space,
            control,
            weights,
            rational,
            linear: None,
        };
        if g.is_affine() {
            // corner (0,..,0) is control point 0; unit corner e_k sits at stride 2^(D-1-k)
            let b = g.control[0];
            let a = std::array::from_fn(|i| {
                std::array::from_fn(|k| g.control[1 << (D - 1 - k)][i] - b[i])
            });
            g.linear = Some((a, b));
        }
        Ok(g)
    }

    /// `F(t) = t` on the unit cube.
    pub fn identity() -> Self {
        let a = std::array::from_fn(|i| std::array::from_fn(|k| if i == k { 1.0 } else { 0.0 }));
        Self::affine(a, [0.0; D])
    }

    fn affine(a: [[f64; D]; D], b: [f64; D]) -> Self {
        let kv = KnotVector::uniform(1, 1, 1).expect("linear knot vector");
        let space = TensorSpace::new(std::array::from_fn(|_| kv.clone()));
        let mut control = Vec::with_capacity(1 << D);
        for_each_offset([1; D], |corner| {
            let t: [f64; D] = corner.map(|c| c as f64);
            control.push(std::array::from_fn(|i| {
                b[i] + (0..D).map(|k| a[i][k] * t[k]).sum::<f64>()
            }));
        });
        let weights = vec![1.0; control.len()];
        Self::new(space, control, weights).expect("affine geometry is valid")
    }

    /// Affine map `F(t) = A t + b`.
    pub fn affine_map(a: [[f64; D]; D], b: [f64; D]) -> Result<Self> {
        if det(&a) <= 0.0 {
            return Err(Error::Geometry("affine map must preserve orientation".into()));
        }
        Ok(Self::affine(a, b))
    }

    pub fn space(&self) -> &TensorSpace<D> {
        &self.space
    }

    pub fn control_points(&self) -> &[[f64; D]] {
        &self.control
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_rational(&self) -> bool {
        self.rational
    }

    /// True for a single linear element, i.e. `F` is affine.
    pub fn is_affine(&self) -> bool {
        !self.rational && self.space.degrees().iter().all(|&p| p == 1) && self.space.num_elements() == 1
    }

    pub fn map(&self, t: [f64; D]) -> Result<[f64; D]> {
        Ok(self.eval(t, 0)?.x)
    }

    pub fn jacobian(&self, t: [f64; D]) -> Result<[[f64; D]; D]> {
        Ok(self.eval(t, 1)?.jacobian)
    }

    /// `F` and its derivatives up to `order` (at most 2) at `t`.
    pub fn eval(&self, t: [f64; D], order: usize) -> Result<GeometryPoint<D>> {
        if order > 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        if let Some((a, b)) = &self.linear {
            if t.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Domain(t.into_iter().find(|v| !(0.0..=1.0).contains(v)).unwrap()));
            }
            return Ok(GeometryPoint {
                x: std::array::from_fn(|i| b[i] + (0..D).map(|k| a[i][k] * t[k]).sum::<f64>()),
                jacobian: *a,
                hessian: [[[0.0; D]; D]; D],
            });
        }
        let el = self.space.find_element(t)?;
        let first = self.space.first_basis(el);
        let degrees = self.space.degrees();
        let ders: Vec<Vec<f64>> = (0..D)
            .map(|k| {
                let kv = self.space.knots(k);
                let mut v = vec![0.0; (order + 1) * (degrees[k] + 1)];
                kv.eval_on_element(el[k], t[k], order, &mut v);
                v
            })
            .collect();
        // homogeneous sums: weight w and weighted points n, with derivatives
        let mut w = 0.0;
        let mut dw = [0.0; D];
        let mut ddw = [[0.0; D]; D];
        let mut n = [0.0; D];
        let mut dn = [[0.0; D]; D];
        let mut ddn = [[[0.0; D]; D]; D];
        let shape = self.space.basis_shape();
        for_each_offset(degrees, |off| {
            let mut flat = 0;
            for k in 0..D {
                flat = flat * shape[k] + first[k] + off[k];
            }
            let wi = self.weights[flat];
            let ci = &self.control[flat];
            let val = |k: usize, d: usize| ders[k][d * (degrees[k] + 1) + off[k]];
            let b: f64 = (0..D).map(|k| val(k, 0)).product();
            w += wi * b;
            for i in 0..D {
                n[i] += wi * ci[i] * b;
            }
            if order >= 1 {
                for a in 0..D {
                    let db: f64 = (0..D).map(|k| val(k, usize::from(k == a))).product();
                    dw[a] += wi * db;
                    for i in 0..D {
                        dn[i][a] += wi * ci[i] * db;
                    }
                    if order >= 2 {
                        for bb in a..D {
                            let d2: f64 = (0..D)
                                .map(|k| val(k, usize::from(k == a) + usize::from(k == bb)))
                                .product();
                            ddw[a][bb] += wi * d2;
                            for i in 0..D {
                                ddn[i][a][bb] += wi * ci[i] * d2;
                            }
                        }
                    }
                }
            }
        });
        let x: [f64; D] = std::array::from_fn(|i| n[i] / w);
        let mut jac = [[0.0; D]; D];
        let mut hess = [[[0.0; D]; D]; D];
        if order >= 1 {
            for i in 0..D {
                for a in 0..D {
                    jac[i][a] = (dn[i][a] - x[i] * dw[a]) / w;
                }
            }
        }
        if order >= 2 {
            for i in 0..D {
                for a in 0..D {
                    for b in a..D {
                        let v = (ddn[i][a][b] - dw[a] * jac[i][b] - dw[b] * jac[i][a] - x[i] * ddw[a][b]) / w;
                        hess[i][a][b] = v;
                        hess[i][b][a] = v;
                    }
                }
            }
        }
        Ok(GeometryPoint {
            x,
            jacobian: jac,
            hessian: hess,
        })
    }

    /// Gauss rule (per direction) used for geometric integrals.
    pub fn quadrature_points(&self) -> usize {
        self.space.degrees().iter().max().copied().unwrap_or(0) + 1
    }

    /// Physical measure `|F(box)|` of a parametric box, integrated piecewise
    /// over the geometry elements it overlaps.
    pub fn measure(&self, bounds: [(f64, f64); D]) -> Result<f64> {
        if let Some((a, _)) = &self.linear {
            let d = det(a);
            if !(d > 0.0) {
                return Err(Error::Geometry(format!("Jacobian determinant {d:.3e} is not positive")));
            }
            return Ok(d * bounds.iter().map(|(lo, hi)| hi - lo).product::<f64>());
        }
        let pieces: Vec<Vec<(f64, f64)>> = (0..D)
            .map(|k| split_at_breakpoints(self.space.knots(k), bounds[k]))
            .collect();
        let rule = gauss(self.quadrature_points());
        let nq = rule.len();
        let counts: [usize; D] = std::array::from_fn(|k| pieces[k].len());
        let mut total = 0.0;
        let mut piece = [0usize; D];
        loop {
            let mut q = [0usize; D];
            loop {
                let mut t = [0.0; D];
                let mut wt = 1.0;
                for k in 0..D {
                    let (a, b) = pieces[k][piece[k]];
                    t[k] = a + (b - a) * rule.nodes[q[k]];
                    wt *= (b - a) * rule.weights[q[k]];
                }
                let d = self.eval(t, 1)?.det();
                if !(d > 0.0) {
                    return Err(Error::Geometry(format!(
                        "Jacobian determinant {d:.3e} is not positive at {t:?}"
                    )));
                }
                total += wt * d;
                if !crate::spline::advance(&mut q, &[nq; D]) {
                    break;
                }
            }
            if !crate::spline::advance(&mut piece, &counts) {
                break;
            }
        }
        Ok(total)
    }

    /// Physical element size `|F(Q)|^(1/d)`.
    pub fn element_size(&self, bounds: [(f64, f64); D]) -> Result<f64> {
        let m = self.measure(bounds)?;
        if !(m > 0.0) {
            return Err(Error::Geometry(format!("element {bounds:?} has measure {m:.3e}")));
        }
        Ok(match D {
            1 => m,
            2 => m.sqrt(),
            3 => m.cbrt(),
            _ => m.powf(1.0 / D as f64),
        })
    }

    /// Samples `DF` at the centres of an `n^D` grid and returns the smallest
    /// determinant and the largest Frobenius condition number.
    pub fn sample_regularity(&self, n: usize) -> Result<(f64, f64)> {
        let mut min_det = f64::INFINITY;
        let mut max_cond: f64 = 0.0;
        let mut q = [0usize; D];
        loop {
            let t: [f64; D] = q.map(|i| (i as f64 + 0.5) / n as f64);
            let jac = self.eval(t, 1)?.jacobian;
            min_det = min_det.min(det(&jac));
            let inv = inverse(&jac).ok_or_else(|| Error::Geometry(format!("singular Jacobian at {t:?}")))?;
            max_cond = max_cond.max(frobenius(&jac) * frobenius(&inv));
            if !crate::spline::advance(&mut q, &[n; D]) {
                break;
            }
        }
        Ok((min_det, max_cond))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("nurbs\n");
        let _ = writeln!(s, "dim {D}");
        let deg: Vec<String> = self.space.degrees().iter().map(|p| p.to_string()).collect();
        let _ = writeln!(s, "degree {}", deg.join(" "));
        for kv in self.space.all_knots() {
            let parts: Vec<String> = kv
                .breakpoints()
                .iter()
                .zip(kv.multiplicities())
                .map(|(b, m)| format!("{b}:{m}"))
                .collect();
            let _ = writeln!(s, "knots {}", parts.join(" "));
        }
        for (c, w) in self.control.iter().zip(&self.weights) {
            let row: Vec<String> = c.iter().chain(std::iter::once(w)).map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |key: &str| -> Result<(usize, Vec<String>)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| perr(0, format!("missing '{key}' line")))?;
            let mut parts = line.split_whitespace();
            if !key.is_empty() && parts.next() != Some(key) {
                return Err(perr(no, format!("expected '{key}'")));
            }
            Ok((no, parts.map(str::to_owned).collect()))
        };
        next("nurbs")?;
        let (no, dim) = next("dim")?;
        if dim.len() != 1 || dim[0].parse::<usize>().ok() != Some(D) {
            return Err(perr(no, format!("expected dimension {D}")));
        }
        let (no, deg) = next("degree")?;
        let degrees: Vec<usize> = deg
            .iter()
            .map(|s| s.parse().map_err(|_| perr(no, format!("bad degree '{s}'"))))
            .collect::<Result<_>>()?;
        if degrees.len() != D {
            return Err(perr(no, format!("expected {D} degrees")));
        }
        let mut kvs = Vec::with_capacity(D);
        for &p in &degrees {
            let (no, toks) = next("knots")?;
            let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
            kvs.push(parse_knot_tokens(no, p, &toks)?);
        }
        let space = TensorSpace::new(kvs.try_into().expect("D knot vectors"));
        let n = space.dimension();
        let mut control = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut last = no;
        for _ in 0..n {
            let (no, row) = next("").map_err(|_| perr(last, format!("expected {n} control rows")))?;
            last = no;
            if row.len() != D + 1 {
                return Err(perr(no, format!("expected {} numbers", D + 1)));
            }
            let vals: Vec<f64> = row
                .iter()
                .map(|s| s.parse().map_err(|_| perr(no, format!("bad number '{s}'"))))
                .collect::<Result<_>>()?;
            control.push(std::array::from_fn(|i| vals[i]));
            weights.push(vals[D]);
        }
        if let Ok((no, _)) = next("") {
            return Err(perr(no, "unexpected trailing line".into()));
        }
        Self::new(space, control, weights).map_err(|e| perr(last, e.to_string()))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

impl NurbsGeometry<2> {
    /// Quarter annulus with radii 1 and 2 in the first quadrant; `t_0` runs
    /// radially (inner arc at `t_0 = 0`), `t_1` counterclockwise.
    pub fn quarter_annulus() -> Self {
        let kv = KnotVector::uniform(2, 1, 1).expect("quadratic knot vector");
        let space = TensorSpace::new([kv.clone(), kv]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut control = Vec::with_capacity(9);
        let mut weights = Vec::with_capacity(9);
        for r in [1.0, 1.5, 2.0] {
            for (p, w) in [([r, 0.0], 1.0), ([r, r], s), ([0.0, r], 1.0)] {
                control.push(p);
                weights.push(w);
            }
        }
        Self::new(space, control, weights).expect("annulus is valid")
    }
}

fn split_at_breakpoints(kv: &KnotVector, (a, b): (f64, f64)) -> Vec<(f64, f64)> {
    let mut cuts = vec![a];
    cuts.extend(kv.breakpoint_values().iter().copied().filter(|&z| z > a && z < b));
    cuts.push(b);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

fn frobenius<const D: usize>(m: &[[f64; D]; D]) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det<const D: usize>(m: &[[f64; D]; D]) -> f64 {
    match D {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            let mut a = *m;
            let mut d = 1.0;
            for c in 0..D {
                let piv = (c..D)
                    .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                    .unwrap();
                if a[piv][c] == 0.0 {
                    return 0.0;
                }
                if piv != c {
                    a.swap(piv, c);
                    d = -d;
                }
                d *= a[c][c];
                for r in c + 1..D {
                    let f = a[r][c] / a[c][c];
                    for k in c..D {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
            d
        }
    }
}

/// Inverse by Gauss–Jordan elimination; `None` when singular.
pub fn inverse<const D: usize>(m: &[[f64; D]; D]) -> Option<[[f64; D]; D]> {
    if D == 2 {
        let d = det(m);
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let mut out = [[0.0; D]; D];
        out[0][0] = m[1][1] / d;
        out[0][1] = -m[0][1] / d;
        out[1][0] = -m[1][0] / d;
        out[1][1] = m[0][0] / d;
        return Some(out);
    }
    let mut a = *m;
    let mut inv = [[0.0; D]; D];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for c in 0..D {
        let piv = (c..D).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c] == 0.0 {
            return None;
        }
        a.swap(piv, c);
        inv.swap(piv, c);
        let p = a[c][c];
        for k in 0..D {
            a[c][k] /= p;
            inv[c][k] /= p;
        }
        for r in 0..D {
            if r != c {
                let f = a[r][c];
                for k in 0..D {
                    a[r][k] -= f * a[c][k];
                    inv[r][k] -= f * inv[c][k];
                }
            }
        }
    }
    Some(inv)
}
