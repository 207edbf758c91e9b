//! Galerkin discretization of second-order elliptic problems with
//! homogeneous Dirichlet conditions on hierarchical spline spaces (2D).

mod element;
mod problem;
mod sparse;

use std::sync::Arc;

pub use element::{tabulate, tabulate_at, tabulate_split, ElementValues};
pub use problem::{Diffusion, EllipticProblem, MatrixField, MatrixGradField, ScalarField, VectorField};
pub use sparse::{dense_solve, pcg, solve, CsrMatrix, SolveStats, SolverKind, SolverOptions};

use crate::error::{Error, Result};
use crate::geometry::NurbsGeometry;
use crate::hier::{Extraction, HierBasis, HierMesh};
use crate::par::{map_indexed, Execution};

/// A hierarchical basis on a mapped domain together with its free
/// (interior) degrees of freedom.
#[derive(Clone, Debug)]
pub struct FemSpace {
    basis: HierBasis<2>,
    geometry: Arc<NurbsGeometry<2>>,
    equation: Vec<Option<u32>>,
    free: Vec<usize>,
    quad_points: usize,
}

impl FemSpace {
    /// Uses `p + 2` Gauss points per direction, `p` the largest degree; a
    /// rational geometry adds its own degree on top.
    pub fn new(basis: HierBasis<2>, geometry: Arc<NurbsGeometry<2>>, exec: Execution) -> Self {
        let on_boundary = boundary_dofs(&basis, exec);
        let mut equation = vec![None; basis.len()];
        let mut free = Vec::new();
        for (d, &b) in on_boundary.iter().enumerate() {
            if !b {
                equation[d] = Some(free.len() as u32);
                free.push(d);
            }
        }
        let p = basis.mesh().levels().degrees().into_iter().max().unwrap_or(1);
        let extra = if geometry.is_rational() {
            geometry.space().degrees().into_iter().max().unwrap_or(0)
        } else {
            0
        };
        FemSpace {
            basis,
            geometry,
            equation,
            free,
            quad_points: p + 2 + extra,
        }
    }

    /// Overrides the number of Gauss points per direction and element.
    pub fn with_quadrature(mut self, points: usize) -> Result<Self> {
        if !(1..=64).contains(&points) {
            return Err(Error::Config(format!("{points} quadrature points per direction is out of range")));
        }
        self.quad_points = points;
        Ok(self)
    }

    pub fn basis(&self) -> &HierBasis<2> {
        &self.basis
    }

    pub fn mesh(&self) -> &HierMesh<2> {
        self.basis.mesh()
    }

    pub fn geometry(&self) -> &NurbsGeometry<2> {
        &self.geometry
    }

    pub fn geometry_arc(&self) -> &Arc<NurbsGeometry<2>> {
        &self.geometry
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points
    }

    /// Basis functions that vanish on the boundary, in dof order.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// Equation index of a free dof.
    pub fn equation(&self, dof: usize) -> Option<usize> {
        self.equation[dof].map(|e| e as usize)
    }

    /// Local basis of active element `id` at the element's quadrature points.
    pub fn tabulate_element(&self, id: usize, order: usize) -> Result<ElementValues> {
        let cell = self.mesh().element(id);
        let space = self.mesh().levels().space(cell.level())?;
        let idx = cell.index_usize();
        tabulate(space, &self.geometry, idx, space.element_bounds(idx), self.quad_points, order)
    }

    /// [`tabulate_element`](Self::tabulate_element) with the rule split
    /// along the problem's data breaks.
    fn tabulate_for(&self, problem: &EllipticProblem, id: usize, order: usize) -> Result<ElementValues> {
        let cell = self.mesh().element(id);
        let space = self.mesh().levels().space(cell.level())?;
        let idx = cell.index_usize();
        let bounds = space.element_bounds(idx);
        tabulate_split(space, &self.geometry, idx, bounds, self.quad_points, problem.break_slices(), order)
    }

    /// Value and physical gradient of the spline `coeffs` at parametric `t`.
    pub fn eval_with_gradient(&self, coeffs: &[f64], t: [f64; 2]) -> Result<(f64, [f64; 2])> {
        let id = self.mesh().locate(t)?;
        let cell = self.mesh().element(id);
        let space = self.mesh().levels().space(cell.level())?;
        let local = self.basis.extraction(id).apply(coeffs);
        let ev = tabulate_at(space, &self.geometry, cell.index_usize(), &[t], &[1.0], 1)?;
        let (v, g, _) = ev.combine(0, &local);
        Ok((v, g))
    }

    /// Assembles the Galerkin system over the free dofs.
    pub fn assemble(&self, problem: &EllipticProblem, exec: Execution) -> Result<LinearSystem> {
        let n = self.free.len();
        let pattern = self.pattern(exec);
        let mut matrix = CsrMatrix::from_pattern(n, pattern);
        let mut rhs = vec![0.0; n];
        let symmetric = problem.is_symmetric();
        let mut failure = None;
        self.basis.for_each_element(
            exec,
            |id, ext| self.element_system(problem, id, ext, symmetric),
            |_, res| match res {
                Ok((eqs, ke, fe)) => {
                    let m = eqs.len();
                    for (i, &ei) in eqs.iter().enumerate() {
                        rhs[ei as usize] += fe[i];
                        for (j, &ej) in eqs.iter().enumerate() {
                            matrix.add(ei as usize, ej as usize, ke[i * m + j]);
                        }
                    }
                }
                Err(e) => {
                    failure.get_or_insert(e);
                }
            },
        );
        if let Some(e) = failure {
            return Err(e);
        }
        if symmetric {
            let asym = matrix.asymmetry();
            if asym > 1e-12 * matrix.max_abs() {
                return Err(Error::Numerical(format!("stiffness matrix asymmetry {asym:.3e}")));
            }
        }
        Ok(LinearSystem {
            matrix,
            rhs,
            symmetric,
        })
    }

    /// Sorted column pattern of every equation.
    fn pattern(&self, exec: Execution) -> Vec<Vec<u32>> {
        let elem_eqs: Vec<Vec<u32>> = self.basis.map_elements(exec, |_, e| {
            e.dofs().iter().filter_map(|&d| self.equation[d]).collect()
        });
        let n = self.free.len();
        let mut start = vec![0usize; n + 1];
        for eqs in &elem_eqs {
            for &e in eqs {
                start[e as usize + 1] += 1;
            }
        }
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut elems = vec![0u32; start[n]];
        for (el, eqs) in elem_eqs.iter().enumerate() {
            for &e in eqs {
                elems[fill[e as usize]] = el as u32;
                fill[e as usize] += 1;
            }
        }
        map_indexed(exec, n, |i| {
            let mut row: Vec<u32> = elems[start[i]..start[i + 1]]
                .iter()
                .flat_map(|&el| elem_eqs[el as usize].iter().copied())
                .collect();
            row.sort_unstable();
            row.dedup();
            row
        })
    }

    /// Element matrix and load restricted to free dofs, row-major.
    fn element_system(
        &self,
        problem: &EllipticProblem,
        id: usize,
        ext: &Extraction,
        symmetric: bool,
    ) -> Result<(Vec<u32>, Vec<f64>, Vec<f64>)> {
        let cols: Vec<usize> = (0..ext.cols())
            .filter(|&c| self.equation[ext.dofs()[c]].is_some())
            .collect();
        if cols.is_empty() {
            return Ok((Vec::new(), Vec::new(), Vec::new()));
        }
        let ev = self.tabulate_for(problem, id, 1)?;
        let nl = ev.n_local;
        let mut kl = vec![0.0; nl * nl];
        let mut fl = vec![0.0; nl];
        let mut ag = vec![[0.0; 2]; nl];
        for q in 0..ev.n_points() {
            let x = ev.x[q];
            let w = ev.weight[q];
            let a = problem.diffusion_at(x);
            let c = problem.reaction_at(x);
            let f = (problem.source)(x);
            let vals = &ev.values[q * nl..(q + 1) * nl];
            let grads = &ev.grads[q * nl..(q + 1) * nl];
            for (b, g) in grads.iter().enumerate() {
                ag[b] = [a[0][0] * g[0] + a[0][1] * g[1], a[1][0] * g[0] + a[1][1] * g[1]];
            }
            for i in 0..nl {
                fl[i] += w * f * vals[i];
                let j0 = if symmetric { i } else { 0 };
                for j in j0..nl {
                    kl[i * nl + j] += w * (ag[j][0] * grads[i][0] + ag[j][1] * grads[i][1] + c * vals[i] * vals[j]);
                }
            }
            if !symmetric {
                let b = problem.advection_at(x);
                for i in 0..nl {
                    for j in 0..nl {
                        kl[i * nl + j] += w * (b[0] * grads[j][0] + b[1] * grads[j][1]) * vals[i];
                    }
                }
            }
        }
        if symmetric {
            for i in 0..nl {
                for j in 0..i {
                    kl[i * nl + j] = kl[j * nl + i];
                }
            }
        }
        // E^T K E over the free columns
        let m = cols.len();
        let mut kt = vec![0.0; nl * m];
        for (cj, &col) in cols.iter().enumerate() {
            let ej = ext.column(col);
            for i in 0..nl {
                let mut acc = 0.0;
                for (a, &v) in ej.iter().enumerate() {
                    if v != 0.0 {
                        acc += kl[i * nl + a] * v;
                    }
                }
                kt[i * m + cj] = acc;
            }
        }
        let mut ke = vec![0.0; m * m];
        let mut fe = vec![0.0; m];
        for (ci, &col) in cols.iter().enumerate() {
            let ei = ext.column(col);
            for (a, &v) in ei.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                fe[ci] += v * fl[a];
                for cj in 0..m {
                    ke[ci * m + cj] += v * kt[a * m + cj];
                }
            }
        }
        if symmetric {
            for i in 0..m {
                for j in 0..i {
                    let avg = 0.5 * (ke[i * m + j] + ke[j * m + i]);
                    ke[i * m + j] = avg;
                    ke[j * m + i] = avg;
                }
            }
        }
        let eqs = cols
            .iter()
            .map(|&c| self.equation[ext.dofs()[c]].expect("free column"))
            .collect();
        Ok((eqs, ke, fe))
    }

    /// Expands a vector over the free dofs to all dofs (boundary ones zero).
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.len()];
        for (e, &d) in self.free.iter().enumerate() {
            out[d] = free_values[e];
        }
        out
    }

    /// Restriction of a full coefficient vector to the free dofs.
    pub fn restrict(&self, coeffs: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| coeffs[d]).collect()
    }

    /// Assembles and solves; `initial` (full coefficients) seeds CG.
    pub fn solve(
        &self,
        problem: &EllipticProblem,
        opts: &SolverOptions,
        initial: Option<&[f64]>,
        exec: Execution,
    ) -> Result<Solution> {
        let start = std::time::Instant::now();
        let system = self.assemble(problem, exec)?;
        log::debug!("assembled {} unknowns, {} nonzeros in {:.0?}", system.rhs.len(), system.matrix.nnz(), start.elapsed());
        system.solve(self, opts, initial)
    }

    /// `(||u - U||_{L2}, |u - U|_{H1})` by elementwise Gauss quadrature.
    pub fn error_norms(&self, problem: &EllipticProblem, coeffs: &[f64], exec: Execution) -> Result<ErrorNorms> {
        let (Some(u), Some(grad)) = (&problem.exact, &problem.exact_grad) else {
            return Err(Error::Config("error norms need the exact solution and its gradient".into()));
        };
        let parts = self.basis.map_elements(exec, |id, ext| -> Result<(f64, f64)> {
            let ev = self.tabulate_for(problem, id, 1)?;
            let local = ext.apply(coeffs);
            let mut l2 = 0.0;
            let mut h1 = 0.0;
            for q in 0..ev.n_points() {
                let (v, g, _) = ev.combine(q, &local);
                let x = ev.x[q];
                let du = grad(x);
                l2 += ev.weight[q] * (u(x) - v).powi(2);
                h1 += ev.weight[q] * ((du[0] - g[0]).powi(2) + (du[1] - g[1]).powi(2));
            }
            Ok((l2, h1))
        });
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for p in parts {
            let (a, b) = p?;
            l2 += a;
            h1 += b;
        }
        Ok(ErrorNorms {
            l2: l2.sqrt(),
            h1_semi: h1.sqrt(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
}

/// Sparse system over the free dofs.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub symmetric: bool,
}

impl LinearSystem {
    pub fn solve(&self, space: &FemSpace, opts: &SolverOptions, initial: Option<&[f64]>) -> Result<Solution> {
        let mut x = match initial {
            Some(c) => space.restrict(c),
            None => vec![0.0; self.rhs.len()],
        };
        let stats = solve(&self.matrix, &self.rhs, &mut x, self.symmetric, opts)?;
        log::debug!(
            "solved {} unknowns in {} iterations, residual {:.2e}",
            x.len(),
            stats.iterations,
            stats.residual
        );
        Ok(Solution {
            coeffs: space.expand(&x),
            stats,
        })
    }
}

/// Discrete solution over the full basis; boundary coefficients are zero.
#[derive(Clone, Debug)]
pub struct Solution {
    pub coeffs: Vec<f64>,
    pub stats: SolveStats,
}

/// Flags basis functions with a nonzero trace on the boundary of the unit
/// square: a function is flagged when, on some boundary element, it has a
/// nonzero coefficient on a local B-spline that does not vanish there.
pub fn boundary_dofs(basis: &HierBasis<2>, exec: Execution) -> Vec<bool> {
    let mesh = basis.mesh();
    let hits = basis.map_elements(exec, |id, ext| {
        let cell = mesh.element(id);
        let space = mesh.levels().space(cell.level()).expect("level exists");
        let idx = cell.index_usize();
        let shape = space.element_shape();
        if (0..2).all(|k| idx[k] != 0 && idx[k] + 1 != shape[k]) {
            return Vec::new();
        }
        let first = space.first_basis(idx);
        let nb = space.basis_shape();
        let deg = space.degrees();
        let mut rows = Vec::new();
        for a0 in 0..=deg[0] {
            for a1 in 0..=deg[1] {
                let g = [first[0] + a0, first[1] + a1];
                if (0..2).any(|k| g[k] == 0 || g[k] + 1 == nb[k]) {
                    rows.push(a0 * (deg[1] + 1) + a1);
                }
            }
        }
        (0..ext.cols())
            .filter(|&c| rows.iter().any(|&r| ext.entry(r, c) != 0.0))
            .map(|c| ext.dofs()[c])
            .collect::<Vec<_>>()
    });
    let mut flags = vec![false; basis.len()];
    for h in hits.into_iter().flatten() {
        flags[h] = true;
    }
    flags
}
