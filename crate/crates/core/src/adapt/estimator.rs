//! Weighted-residual indicators and data oscillations.
//!
//! Both are computed from the same samples: the strong residual
//! `f + div(A grad U) - b . grad U - c U` at the volume quadrature points of
//! each element, and the conormal flux jump `(A grad U_Q - A grad U_N) . n_Q`
//! at Gauss points of every edge fragment the element shares with a
//! neighbour `N`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::{tabulate_at, tabulate_split, EllipticProblem, FemSpace};
use crate::hier::{Cell, HierMesh};
use crate::par::{try_map_indexed, Execution};
use crate::quadrature::gauss;

/// Piece of an element edge shared with exactly one neighbouring element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeFragment {
    pub neighbor: usize,
    /// Parametric direction normal to the edge.
    pub axis: usize,
    /// The edge is the element's upper face in `axis`.
    pub upper: bool,
    /// Parametric coordinate of the edge in `axis`.
    pub coord: f64,
    /// Parametric extent along the other direction.
    pub range: (f64, f64),
}

impl EdgeFragment {
    pub fn length(&self) -> f64 {
        self.range.1 - self.range.0
    }
}

/// Splits the interior edges of element `id` into fragments. Where the
/// neighbour is coarser the whole edge is one fragment; where it is finer the
/// edge is split at the neighbours' breakpoints.
pub fn edge_fragments(mesh: &HierMesh<2>, id: usize) -> Vec<EdgeFragment> {
    let cell = mesh.element(id);
    let bounds = mesh.cell_bounds(cell);
    let shape = mesh.levels().element_shape(cell.level());
    let mut out = Vec::new();
    for axis in 0..2 {
        let other = 1 - axis;
        for upper in [false, true] {
            let i = cell.index[axis] as i64 + if upper { 1 } else { -1 };
            if i < 0 || i >= shape[axis] as i64 {
                continue;
            }
            let mut nb = cell;
            nb.index[axis] = i as u32;
            let coord = if upper { bounds[axis].1 } else { bounds[axis].0 };
            let mut push = |neighbor: usize, range: (f64, f64)| {
                out.push(EdgeFragment {
                    neighbor,
                    axis,
                    upper,
                    coord,
                    range,
                })
            };
            if let Some(n) = mesh.element_id(nb) {
                push(n, bounds[other]);
            } else if !mesh.is_present(nb) {
                let mut c = nb;
                let n = loop {
                    c = c.parent().expect("level-0 cells are present");
                    if let Some(n) = mesh.element_id(c) {
                        break n;
                    }
                };
                push(n, bounds[other]);
            } else {
                // descend through the children touching the shared face
                let face_parity = u32::from(!upper);
                let mut leaves: Vec<Cell<2>> = Vec::new();
                let mut stack = vec![nb];
                while let Some(c) = stack.pop() {
                    if mesh.element_id(c).is_some() {
                        leaves.push(c);
                    } else {
                        stack.extend(c.children().filter(|ch| ch.index[axis] % 2 == face_parity));
                    }
                }
                let mut pieces: Vec<(usize, (f64, f64))> = leaves
                    .iter()
                    .map(|&c| (mesh.element_id(c).expect("leaf is active"), mesh.cell_bounds(c)[other]))
                    .collect();
                pieces.sort_by(|a, b| a.1 .0.total_cmp(&b.1 .0));
                for (n, range) in pieces {
                    push(n, range);
                }
            }
        }
    }
    out
}

/// How `h_Q` is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ElementSize {
    /// `|F(Q)|^(1/2)`.
    #[default]
    Physical,
    /// `|Q|^(1/2)` in the parameter domain.
    Parametric,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EstimatorOptions {
    pub size: ElementSize,
    /// Gauss points per edge fragment; `p + 2` when unset.
    pub edge_points: Option<usize>,
}

/// Squared local quantities split into a volume and an edge part.
#[derive(Clone, Debug, PartialEq)]
pub struct Indicators {
    pub volume: Vec<f64>,
    pub jump: Vec<f64>,
}

pub type EstimatorResult = Indicators;

impl Indicators {
    pub fn len(&self) -> usize {
        self.volume.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume.is_empty()
    }

    /// Squared indicator of element `id`.
    pub fn squared(&self, id: usize) -> f64 {
        self.volume[id] + self.jump[id]
    }

    pub fn local(&self, id: usize) -> f64 {
        self.squared(id).sqrt()
    }

    pub fn squares(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.squared(i)).collect()
    }

    /// Square root of the sum over `ids` of the squared indicators.
    pub fn total_over(&self, ids: impl IntoIterator<Item = usize>) -> f64 {
        ids.into_iter().map(|i| self.squared(i)).sum::<f64>().sqrt()
    }

    pub fn total(&self) -> f64 {
        self.total_over(0..self.len())
    }
}

struct Sample {
    weight: f64,
    value: f64,
    /// Coordinates scaled to `[0, 1]` on the element or fragment.
    local: [f64; 2],
}

struct ElementSamples {
    h: f64,
    volume: Vec<Sample>,
    edges: Vec<Vec<Sample>>,
}

fn level_space(mesh: &HierMesh<2>, c: Cell<2>) -> Result<&crate::spline::TensorSpace<2>> {
    mesh.levels().space(c.level())
}

fn samples(
    space: &FemSpace,
    problem: &EllipticProblem,
    local: &[Vec<f64>],
    id: usize,
    opts: &EstimatorOptions,
    nq_volume: usize,
    nq_edge: usize,
) -> Result<ElementSamples> {
    let mesh = space.mesh();
    let geom = space.geometry();
    let cell = mesh.element(id);
    let bounds = mesh.cell_bounds(cell);
    let lspace = level_space(mesh, cell)?;
    let idx = cell.index_usize();
    let h = match opts.size {
        ElementSize::Physical => geom.element_size(bounds)?,
        ElementSize::Parametric => ((bounds[0].1 - bounds[0].0) * (bounds[1].1 - bounds[1].0)).sqrt(),
    };

    let ev = tabulate_split(lspace, geom, idx, bounds, nq_volume, problem.break_slices(), 2)?;
    let coeffs = &local[id];
    let mut volume = Vec::with_capacity(ev.n_points());
    for q in 0..ev.n_points() {
        let (v, g, hs) = ev.combine(q, coeffs);
        let x = ev.x[q];
        let a = problem.diffusion_at(x);
        let da = problem.diffusion_divergence(x)?;
        let b = problem.advection_at(x);
        let c = problem.reaction_at(x);
        let mut div = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                div += a[i][j] * hs[i][j];
            }
            div += da[i] * g[i];
        }
        let r = (problem.source)(x) + div - b[0] * g[0] - b[1] * g[1] - c * v;
        let t = ev.t[q];
        volume.push(Sample {
            weight: ev.weight[q],
            value: r,
            local: std::array::from_fn(|k| (t[k] - bounds[k].0) / (bounds[k].1 - bounds[k].0)),
        });
    }

    let rule = gauss(nq_edge);
    let mut edges = Vec::new();
    for frag in edge_fragments(mesh, id) {
        let other = 1 - frag.axis;
        let mut pts = Vec::with_capacity(rule.len());
        let mut wts = Vec::with_capacity(rule.len());
        for (s, w) in rule.mapped(frag.range.0, frag.range.1) {
            let mut t = [0.0; 2];
            t[frag.axis] = frag.coord;
            t[other] = s;
            pts.push(t);
            wts.push(w);
        }
        let ncell = mesh.element(frag.neighbor);
        let inside = tabulate_at(lspace, geom, idx, &pts, &wts, 1)?;
        let outside = tabulate_at(level_space(mesh, ncell)?, geom, ncell.index_usize(), &pts, &wts, 1)?;
        let sign = if frag.upper { 1.0 } else { -1.0 };
        let mut out = Vec::with_capacity(pts.len());
        for q in 0..pts.len() {
            let (_, gi, _) = inside.combine(q, coeffs);
            let (_, go, _) = outside.combine(q, &local[frag.neighbor]);
            let x = inside.x[q];
            let a = problem.diffusion_at(x);
            let j = inside.jacobian[q];
            // outward normal J^{-T} n_hat, with J^{-T} n_hat ~ cofactor row
            let cof = if frag.axis == 0 { [j[1][1], -j[0][1]] } else { [-j[1][0], j[0][0]] };
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let len = cof[0].hypot(cof[1]);
            let nu = [sign * det.signum() * cof[0] / len, sign * det.signum() * cof[1] / len];
            let ds = j[0][other].hypot(j[1][other]);
            let dg = [gi[0] - go[0], gi[1] - go[1]];
            let flux = (a[0][0] * dg[0] + a[0][1] * dg[1]) * nu[0] + (a[1][0] * dg[0] + a[1][1] * dg[1]) * nu[1];
            out.push(Sample {
                weight: wts[q] * ds,
                value: flux,
                local: [(pts[q][other] - frag.range.0) / frag.length(), 0.0],
            });
        }
        edges.push(out);
    }
    Ok(ElementSamples { h, volume, edges })
}

fn max_degree(space: &FemSpace) -> usize {
    space.mesh().levels().degrees().into_iter().max().unwrap_or(1)
}

/// Weighted-residual indicators
/// `eta(Q)^2 = h_Q^2 ||f - PU||^2_Q + h_Q ||[A grad U . n]||^2_{dQ}` of the
/// discrete solution with full coefficient vector `coeffs`. Every interior
/// edge fragment contributes to both adjacent elements.
pub fn estimate(
    space: &FemSpace,
    problem: &EllipticProblem,
    coeffs: &[f64],
    opts: &EstimatorOptions,
    exec: Execution,
) -> Result<Indicators> {
    let local = space.basis().local_coefficients(coeffs, exec);
    let nq_edge = opts.edge_points.unwrap_or(max_degree(space) + 2);
    let parts = try_map_indexed(exec, local.len(), |id| {
        let s = samples(space, problem, &local, id, opts, space.quad_points(), nq_edge)?;
        let vol: f64 = s.volume.iter().map(|p| p.weight * p.value * p.value).sum();
        let jump: f64 = s.edges.iter().flatten().map(|p| p.weight * p.value * p.value).sum();
        Ok::<_, Error>((s.h * s.h * vol, s.h * jump))
    })?;
    let (volume, jump) = parts.into_iter().unzip();
    Ok(Indicators { volume, jump })
}

/// Shifted Legendre polynomials `P_0..=P_n` at `u` in `[0, 1]`.
fn legendre(n: usize, u: f64, out: &mut Vec<f64>) {
    out.clear();
    let x = 2.0 * u - 1.0;
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for k in 1..n {
        let next = ((2 * k + 1) as f64 * x * out[k] - k as f64 * out[k - 1]) / (k + 1) as f64;
        out.push(next);
    }
}

/// `min_q sum w (v - q)^2` over polynomials `q` of degree `deg` per direction
/// in `dims` local coordinates.
fn projection_remainder(samples: &[Sample], deg: usize, dims: usize) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let n1 = deg + 1;
    let n = if dims == 2 { n1 * n1 } else { n1 };
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut l0 = Vec::new();
    let mut l1 = Vec::new();
    let mut phi = vec![0.0; n];
    let mut basis_at = |s: &Sample, phi: &mut [f64]| {
        legendre(deg, s.local[0], &mut l0);
        if dims == 2 {
            legendre(deg, s.local[1], &mut l1);
            for a in 0..n1 {
                for b in 0..n1 {
                    phi[a * n1 + b] = l0[a] * l1[b];
                }
            }
        } else {
            phi.copy_from_slice(&l0);
        }
    };
    for s in samples {
        basis_at(s, &mut phi);
        for a in 0..n {
            rhs[a] += s.weight * s.value * phi[a];
            for b in 0..n {
                gram[(a, b)] += s.weight * phi[a] * phi[b];
            }
        }
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("degree {deg} projection is not determined by the quadrature")))?;
    let c = chol.solve(&rhs);
    let mut rem = 0.0;
    for s in samples {
        basis_at(s, &mut phi);
        let q: f64 = phi.iter().zip(c.iter()).map(|(p, c)| p * c).sum();
        rem += s.weight * (s.value - q).powi(2);
    }
    Ok(rem)
}

/// Squared data oscillations `h^2 ||(1 - P_Q)(f - PU)||^2 + h ||(1 - P_E)[flux]||^2`
/// with `P_Q`, `P_E` the weighted `L2` projections onto mapped polynomials of
/// degree `degree` per direction. With the estimator's quadrature each term
/// is bounded by the matching indicator term.
pub fn oscillations(
    space: &FemSpace,
    problem: &EllipticProblem,
    coeffs: &[f64],
    degree: usize,
    opts: &EstimatorOptions,
    exec: Execution,
) -> Result<Indicators> {
    let local = space.basis().local_coefficients(coeffs, exec);
    let nq_volume = space.quad_points().max(degree + 1);
    let nq_edge = opts.edge_points.unwrap_or(max_degree(space) + 2).max(degree + 1);
    let parts = try_map_indexed(exec, local.len(), |id| {
        let s = samples(space, problem, &local, id, opts, nq_volume, nq_edge)?;
        let vol = projection_remainder(&s.volume, degree, 2)?;
        let mut jump = 0.0;
        for e in &s.edges {
            jump += projection_remainder(e, degree, 1)?;
        }
        Ok::<_, Error>((s.h * s.h * vol, s.h * jump))
    })?;
    let (volume, jump) = parts.into_iter().unzip();
    Ok(Indicators { volume, jump })
}
