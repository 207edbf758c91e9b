use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::spline::{knot_insertion_matrix, InsertionMatrix, KnotVector, TensorSpace};

/// Deepest level a sequence can materialize.
pub const MAX_LEVELS: usize = 24;

struct LevelData<const D: usize> {
    space: TensorSpace<D>,
    // maps level ℓ-1 coefficients to level ℓ, one matrix per direction
    from_coarser: Option<Vec<InsertionMatrix>>,
}

/// Nested tensor spaces obtained by repeated dyadic bisection of a base
/// space, every interior knot of level `ℓ ≥ 1` having multiplicity `m`.
///
/// Level spaces and refinement matrices are built on first use and cached.
pub struct LevelSequence<const D: usize> {
    multiplicity: usize,
    levels: Vec<OnceLock<LevelData<D>>>,
}

impl<const D: usize> LevelSequence<D> {
    pub fn new(base: TensorSpace<D>, multiplicity: usize) -> Result<Self> {
        for k in 0..D {
            let kv = base.knots(k);
            let p = kv.degree();
            if p == 0 {
                return Err(Error::InvalidKnots("hierarchical spaces need degree >= 1".into()));
            }
            if multiplicity == 0 || multiplicity > p {
                return Err(Error::Argument(format!(
                    "interior multiplicity {multiplicity} must lie in 1..={p}"
                )));
            }
            let m = kv.multiplicities();
            if m[1..m.len() - 1].iter().any(|&x| x > multiplicity) {
                return Err(Error::InvalidKnots(format!(
                    "base interior multiplicities exceed the level multiplicity {multiplicity}"
                )));
            }
        }
        let levels: Vec<OnceLock<LevelData<D>>> = (0..MAX_LEVELS).map(|_| OnceLock::new()).collect();
        let _ = levels[0].set(LevelData {
            space: base,
            from_coarser: None,
        });
        Ok(LevelSequence {
            multiplicity,
            levels,
        })
    }

    /// Uniform base grid with `elements[k]` elements of degree `degrees[k]`.
    pub fn uniform(degrees: [usize; D], elements: [usize; D], multiplicity: usize) -> Result<Self> {
        let mut kvs = Vec::with_capacity(D);
        for k in 0..D {
            kvs.push(KnotVector::uniform(degrees[k], elements[k], multiplicity)?);
        }
        Self::new(TensorSpace::new(kvs.try_into().expect("D knot vectors")), multiplicity)
    }

    pub fn base(&self) -> &TensorSpace<D> {
        self.space(0).expect("level 0 always exists")
    }

    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    pub fn degrees(&self) -> [usize; D] {
        self.base().degrees()
    }

    fn data(&self, level: usize) -> Result<&LevelData<D>> {
        if level >= MAX_LEVELS {
            return Err(Error::Level {
                requested: level,
                max: MAX_LEVELS - 1,
            });
        }
        if let Some(d) = self.levels[level].get() {
            return Ok(d);
        }
        let coarse = &self.data(level - 1)?.space;
        let fine = coarse.bisect(self.multiplicity)?;
        let mats = (0..D)
            .map(|k| knot_insertion_matrix(coarse.knots(k), fine.knots(k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.levels[level].get_or_init(|| LevelData {
            space: fine,
            from_coarser: Some(mats),
        }))
    }

    /// Tensor space of `level`.
    pub fn space(&self, level: usize) -> Result<&TensorSpace<D>> {
        Ok(&self.data(level)?.space)
    }

    /// Per-direction matrices mapping level `level - 1` coefficients to `level`.
    pub fn refinement(&self, level: usize) -> Result<&[InsertionMatrix]> {
        if level == 0 {
            return Err(Error::Level { requested: 0, max: 0 });
        }
        Ok(self.data(level)?.from_coarser.as_deref().expect("set for level >= 1"))
    }

    /// Element counts per direction at `level`.
    pub fn element_shape(&self, level: usize) -> [usize; D] {
        let b = self.base().element_shape();
        std::array::from_fn(|k| b[k] << level)
    }
}

impl<const D: usize> Clone for LevelSequence<D> {
    fn clone(&self) -> Self {
        LevelSequence::new(self.base().clone(), self.multiplicity).expect("already validated")
    }
}

impl<const D: usize> PartialEq for LevelSequence<D> {
    fn eq(&self, other: &Self) -> bool {
        self.multiplicity == other.multiplicity && self.base() == other.base()
    }
}

impl<const D: usize> std::fmt::Debug for LevelSequence<D> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LevelSequence")
            .field("degrees", &self.degrees())
            .field("elements", &self.base().element_shape())
            .field("multiplicity", &self.multiplicity)
            .finish()
    }
}
