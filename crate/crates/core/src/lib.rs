//! Adaptive isogeometric Galerkin solver on hierarchical B-spline spaces.
//!
//! The crate is organised bottom-up: [`spline`] holds univariate and tensor
//! B-splines, [`hier`] the hierarchical meshes and (T)HB bases, [`geometry`]
//! NURBS parametrizations, [`fem`] assembly and solvers, and [`adapt`] the
//! estimator, marking and adaptive loop. [`experiments`] wires them into the
//! configurable runs used by the command-line driver.

pub mod adapt;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod geometry;
pub mod par;
pub mod quadrature;
pub mod hier;
pub mod spline;

pub use dyadic::Dyadic;
pub use error::{Error, Result};
pub use par::Execution;
