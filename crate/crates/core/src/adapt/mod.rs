//! A posteriori estimation, marking and the adaptive loop.

mod driver;
mod estimator;
mod marking;

pub use driver::{
    adaptive_loop, adaptive_loop_with, loglog_slope, rate_fit, AdaptConfig, AdaptOutcome, AdaptRecord, RateAxis,
    RateQuantity, StopRule,
};
pub use estimator::{
    edge_fragments, estimate, oscillations, EdgeFragment, ElementSize, EstimatorOptions, EstimatorResult, Indicators,
};
pub use marking::{dorfler_mark, MarkParams};
