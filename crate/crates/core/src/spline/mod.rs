//! Univariate and tensor-product B-splines.

mod insertion;
mod knots;
mod tensor;

pub use insertion::{knot_insertion_matrix, InsertionMatrix};
pub use knots::{KnotVector, MAX_DEGREE};
pub use tensor::{for_each_in_box, IndexBox, TensorSpace};

pub(crate) use tensor::{advance, for_each_offset};
