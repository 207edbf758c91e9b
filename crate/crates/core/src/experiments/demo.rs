use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hier::io::mesh_svg;
use crate::hier::{Admissibility, AdmissibleKind, Cell, HierMesh, LevelSequence};

/// What one step of [`refine_demo`] did.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoStep {
    pub step: usize,
    pub marked: Cell<2>,
    /// Cells bisected in this step, the marked one included, sorted.
    pub refined: Vec<Cell<2>>,
    pub n_elements: usize,
}

/// Starting from a 2x2 mesh whose bottom-left element is already bisected,
/// repeatedly marks the finest element at the origin and refines with the
/// given admissibility. Writes `step_XX.svg` into `svg_dir` when given
/// (step 0 is the starting mesh).
pub fn refine_demo(
    kind: AdmissibleKind,
    mu: usize,
    p: usize,
    steps: usize,
    svg_dir: Option<&Path>,
) -> Result<(HierMesh<2>, Vec<DemoStep>)> {
    if steps == 0 {
        return Err(Error::Argument("the demo needs at least one step".into()));
    }
    let adm = Admissibility::new(mu, kind)?;
    let levels = Arc::new(LevelSequence::uniform([p, p], [2, 2], 1)?);
    let mut mesh = HierMesh::new(levels).refine(&[Cell::new(0, [0, 0])], adm)?;
    let write = |mesh: &HierMesh<2>, step: usize| -> Result<()> {
        if let Some(dir) = svg_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(format!("step_{step:02}.svg"));
            std::fs::write(&path, mesh_svg(mesh, 256.0)).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    };
    write(&mesh, 0)?;
    let mut out = Vec::with_capacity(steps);
    for step in 1..=steps {
        let marked = mesh.element(mesh.locate([0.0, 0.0])?);
        let refined = mesh.refinement_closure(&[marked], adm);
        mesh = mesh.refine(&[marked], adm)?;
        write(&mesh, step)?;
        out.push(DemoStep {
            step,
            marked,
            refined,
            n_elements: mesh.num_elements(),
        });
    }
    Ok((mesh, out))
}
