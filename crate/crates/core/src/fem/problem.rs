use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type ScalarField = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
pub type MatrixField = Arc<dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync>;
/// `g(x)[k][i][j] = d A_ij / d x_k`.
pub type MatrixGradField = Arc<dyn Fn([f64; 2]) -> [[[f64; 2]; 2]; 2] + Send + Sync>;

/// Diffusion coefficient `A` of the operator.
#[derive(Clone)]
pub enum Diffusion {
    Identity,
    Constant([[f64; 2]; 2]),
    /// A variable field; the derivatives are only needed by the estimator.
    Variable {
        a: MatrixField,
        grad: Option<MatrixGradField>,
    },
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Identity => write!(f, "Identity"),
            Diffusion::Constant(a) => write!(f, "Constant({a:?})"),
            Diffusion::Variable { grad, .. } => {
                write!(f, "Variable {{ grad: {} }}", if grad.is_some() { "yes" } else { "no" })
            }
        }
    }
}

/// `-div(A grad u) + b . grad u + c u = f` with `u = 0` on the boundary.
#[derive(Clone)]
pub struct EllipticProblem {
    pub diffusion: Diffusion,
    pub advection: Option<VectorField>,
    pub reaction: Option<ScalarField>,
    pub source: ScalarField,
    pub exact: Option<ScalarField>,
    pub exact_grad: Option<VectorField>,
    /// Parametric lines, per axis, across which the data jump. Elements they
    /// cut are integrated piecewise.
    pub breaks: [Vec<f64>; 2],
}

impl fmt::Debug for EllipticProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EllipticProblem")
            .field("diffusion", &self.diffusion)
            .field("advection", &self.advection.is_some())
            .field("reaction", &self.reaction.is_some())
            .field("exact", &self.exact.is_some())
            .field("breaks", &self.breaks)
            .finish()
    }
}

impl EllipticProblem {
    /// `-Δu = f`.
    pub fn poisson(f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        EllipticProblem {
            diffusion: Diffusion::Identity,
            advection: None,
            reaction: None,
            source: Arc::new(f),
            exact: None,
            exact_grad: None,
            breaks: [Vec::new(), Vec::new()],
        }
    }

    pub fn with_diffusion(mut self, d: Diffusion) -> Self {
        self.diffusion = d;
        self
    }

    pub fn with_advection(mut self, b: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.advection = Some(Arc::new(b));
        self
    }

    pub fn with_reaction(mut self, c: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        self.reaction = Some(Arc::new(c));
        self
    }

    pub fn with_exact(
        mut self,
        u: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        grad: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        self.exact = Some(Arc::new(u));
        self.exact_grad = Some(Arc::new(grad));
        self
    }

    /// Declares lines `t_axis = v` (parametric) where the data are
    /// discontinuous.
    pub fn with_breaks(mut self, axis: usize, values: Vec<f64>) -> Self {
        self.breaks[axis] = values;
        self
    }

    pub fn break_slices(&self) -> [&[f64]; 2] {
        [&self.breaks[0], &self.breaks[1]]
    }

    /// Bilinear form is symmetric.
    pub fn is_symmetric(&self) -> bool {
        self.advection.is_none()
    }

    pub fn diffusion_at(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        match &self.diffusion {
            Diffusion::Identity => [[1.0, 0.0], [0.0, 1.0]],
            Diffusion::Constant(a) => *a,
            Diffusion::Variable { a, .. } => a(x),
        }
    }

    /// Row divergence `sum_i d A_ij / d x_i`, needed for the strong residual.
    pub fn diffusion_divergence(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        match &self.diffusion {
            Diffusion::Identity | Diffusion::Constant(_) => Ok([0.0; 2]),
            Diffusion::Variable { grad: Some(g), .. } => {
                let g = g(x);
                Ok(std::array::from_fn(|j| g[0][0][j] + g[1][1][j]))
            }
            Diffusion::Variable { grad: None, .. } => Err(Error::Config(
                "the estimator needs the derivatives of a variable diffusion coefficient".into(),
            )),
        }
    }

    pub fn advection_at(&self, x: [f64; 2]) -> [f64; 2] {
        self.advection.as_ref().map_or([0.0; 2], |b| b(x))
    }

    pub fn reaction_at(&self, x: [f64; 2]) -> f64 {
        self.reaction.as_ref().map_or(0.0, |c| c(x))
    }

    /// Checks symmetry and positive definiteness of `A` at the sample points
    /// and warns when `-div(b)/2 + c` is negative somewhere (the sufficient
    /// condition for ellipticity, approximated with finite differences).
    pub fn check_at(&self, points: &[[f64; 2]]) -> Result<()> {
        let mut warned = false;
        for &x in points {
            let a = self.diffusion_at(x);
            if (a[0][1] - a[1][0]).abs() > 1e-12 * (a[0][1].abs() + a[1][0].abs()).max(1.0) {
                return Err(Error::Config(format!("diffusion is not symmetric at {x:?}")));
            }
            let tr = a[0][0] + a[1][1];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            let lmin = 0.5 * tr - (0.25 * tr * tr - det).max(0.0).sqrt();
            if !(lmin > 0.0) {
                return Err(Error::Config(format!(
                    "diffusion is not positive definite at {x:?} (smallest eigenvalue {lmin:.3e})"
                )));
            }
            if let Some(b) = &self.advection {
                let h = 1e-6;
                let div = (b([x[0] + h, x[1]])[0] - b([x[0] - h, x[1]])[0]
                    + b([x[0], x[1] + h])[1]
                    - b([x[0], x[1] - h])[1])
                    / (2.0 * h);
                if -0.5 * div + self.reaction_at(x) < -1e-8 && !warned {
                    log::warn!("-div(b)/2 + c is negative near {x:?}; ellipticity is not guaranteed");
                    warned = true;
                }
            }
        }
        Ok(())
    }
}
