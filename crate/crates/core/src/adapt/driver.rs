use std::sync::Arc;
use std::time::Instant;

use super::estimator::{estimate, EstimatorOptions, Indicators};
use super::marking::{dorfler_mark, MarkParams};
use crate::error::{Error, Result};
use crate::fem::{EllipticProblem, FemSpace, SolverOptions};
use crate::geometry::NurbsGeometry;
use crate::hier::{Admissibility, Flavor, HierBasis, HierMesh, LevelSequence};
use crate::par::Execution;

/// When the loop stops. The checks run after each estimate, so the
/// iteration that triggers a rule is still recorded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopRule {
    pub max_iterations: usize,
    pub max_dofs: Option<usize>,
    pub eta_tolerance: Option<f64>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            max_iterations: 20,
            max_dofs: None,
            eta_tolerance: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdaptConfig {
    pub geometry: Arc<NurbsGeometry<2>>,
    pub problem: EllipticProblem,
    pub levels: Arc<LevelSequence<2>>,
    pub flavor: Flavor,
    pub admissibility: Admissibility,
    pub marking: MarkParams,
    pub stop: StopRule,
    pub solver: SolverOptions,
    pub estimator: EstimatorOptions,
    /// Gauss points per direction; `p + 2` when unset.
    pub quadrature: Option<usize>,
    pub exec: Execution,
    /// Measure wall time; when off `wall_ms` is recorded as zero so that
    /// repeated runs give identical records.
    pub timing: bool,
}

/// One row of the convergence history.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptRecord {
    pub iter: usize,
    pub n_elements: usize,
    /// Number of unknowns (functions with zero boundary trace).
    pub n_dofs: usize,
    pub eta: f64,
    pub err_h1: Option<f64>,
    pub err_l2: Option<f64>,
    pub n_marked: usize,
    pub max_level: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct AdaptOutcome {
    pub records: Vec<AdaptRecord>,
    /// The last mesh a solution was computed on.
    pub mesh: HierMesh<2>,
    pub coeffs: Vec<f64>,
    pub indicators: Indicators,
}

pub fn adaptive_loop(config: &AdaptConfig) -> Result<AdaptOutcome> {
    adaptive_loop_with(config, |_, _| Ok(()))
}

/// Solve, estimate, mark, refine until a stop rule fires. `observer` sees
/// every record together with the mesh it was computed on, before refinement.
pub fn adaptive_loop_with<O>(config: &AdaptConfig, mut observer: O) -> Result<AdaptOutcome>
where
    O: FnMut(&AdaptRecord, &HierMesh<2>) -> Result<()>,
{
    if config.stop.max_iterations == 0 {
        return Err(Error::Argument("the loop needs at least one iteration".into()));
    }
    let mut mesh = HierMesh::new(config.levels.clone());
    let mut records = Vec::new();
    for iter in 0.. {
        let at = |e: Error| Error::AtIteration {
            iteration: iter,
            source: Box::new(e),
        };
        let start = Instant::now();
        let basis = HierBasis::new(&mesh, config.flavor).map_err(at)?;
        let mut space = FemSpace::new(basis, config.geometry.clone(), config.exec);
        if let Some(n) = config.quadrature {
            space = space.with_quadrature(n).map_err(at)?;
        }
        let t_basis = start.elapsed();
        let sol = space
            .solve(&config.problem, &config.solver, None, config.exec)
            .map_err(at)?;
        let t_solve = start.elapsed();
        let ind = estimate(&space, &config.problem, &sol.coeffs, &config.estimator, config.exec).map_err(at)?;
        let eta = ind.total();
        let (err_h1, err_l2) = if config.problem.exact.is_some() && config.problem.exact_grad.is_some() {
            let e = space.error_norms(&config.problem, &sol.coeffs, config.exec).map_err(at)?;
            (Some(e.h1_semi), Some(e.l2))
        } else {
            (None, None)
        };
        log::debug!(
            "basis {:.0?}, assemble and solve {:.0?}, estimate and errors {:.0?}",
            t_basis,
            t_solve - t_basis,
            start.elapsed() - t_solve
        );
        let n_dofs = space.num_free();
        let stop = iter + 1 >= config.stop.max_iterations
            || config.stop.max_dofs.is_some_and(|m| n_dofs >= m)
            || config.stop.eta_tolerance.is_some_and(|t| eta <= t);
        let marked = if stop {
            Vec::new()
        } else {
            dorfler_mark(&ind.squares(), config.marking).map_err(at)?
        };
        let mut record = AdaptRecord {
            iter,
            n_elements: mesh.num_elements(),
            n_dofs,
            eta,
            err_h1,
            err_l2,
            n_marked: marked.len(),
            max_level: mesh.max_level(),
            wall_ms: 0.0,
        };
        // nothing left to refine: the discrete solution is exact for the data
        let done = stop || marked.is_empty();
        let next = if done {
            None
        } else {
            Some(mesh.refine_ids(&marked, config.admissibility).map_err(at)?)
        };
        if config.timing {
            record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        }
        log::info!(
            "iteration {iter}: {} elements, {} dofs, eta {:.4e}, marked {}",
            record.n_elements,
            record.n_dofs,
            record.eta,
            record.n_marked
        );
        observer(&record, &mesh).map_err(at)?;
        records.push(record);
        match next {
            Some(m) => mesh = m,
            None => {
                return Ok(AdaptOutcome {
                    records,
                    mesh,
                    coeffs: sol.coeffs,
                    indicators: ind,
                })
            }
        }
    }
    unreachable!("the loop only exits by returning")
}

/// Abscissa of a convergence plot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateAxis {
    Dofs,
    Elements,
}

/// Ordinate of a convergence plot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateQuantity {
    Eta,
    ErrorH1,
    ErrorL2,
}

/// Least-squares slope of `log y` against `log x` over the last `tail`
/// records.
pub fn rate_fit(records: &[AdaptRecord], x: RateAxis, y: RateQuantity, tail: usize) -> Result<f64> {
    if tail < 2 || records.len() < tail {
        return Err(Error::Argument(format!(
            "a rate over {tail} points needs at least that many records (have {}) and at least two",
            records.len()
        )));
    }
    let mut xs = Vec::with_capacity(tail);
    let mut ys = Vec::with_capacity(tail);
    for r in &records[records.len() - tail..] {
        let xv = match x {
            RateAxis::Dofs => r.n_dofs as f64,
            RateAxis::Elements => r.n_elements as f64,
        };
        let yv = match y {
            RateQuantity::Eta => Some(r.eta),
            RateQuantity::ErrorH1 => r.err_h1,
            RateQuantity::ErrorL2 => r.err_l2,
        };
        let Some(yv) = yv else {
            return Err(Error::Argument(format!("iteration {} has no error recorded", r.iter)));
        };
        if !(xv > 0.0 && yv > 0.0) {
            return Err(Error::Argument(format!("iteration {} has non-positive data", r.iter)));
        }
        xs.push(xv.ln());
        ys.push(yv.ln());
    }
    loglog_slope(&xs, &ys)
}

/// Slope of the least-squares line through `(x_i, y_i)`.
pub fn loglog_slope(lx: &[f64], ly: &[f64]) -> Result<f64> {
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}
