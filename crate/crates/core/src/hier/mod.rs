//! Hierarchical meshes, admissible refinement and (T)HB-spline bases.

mod basis;
pub mod io;
mod levels;
mod mesh;

pub use basis::{Extraction, Flavor, FunctionId, HierBasis};
pub use levels::{LevelSequence, MAX_LEVELS};
pub use mesh::{Admissibility, AdmissibleKind, Cell, HierMesh};

#[cfg(test)]
mod tests;
