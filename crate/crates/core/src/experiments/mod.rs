//! Configurable runs of the adaptive loop with CSV and SVG output, and the
//! refinement demonstration.

mod config;
mod demo;
pub mod problems;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub use config::{parse_pairs, GeometrySource, ProblemKind, RunConfig, PRESETS};
pub use demo::{refine_demo, DemoStep};

use crate::adapt::{adaptive_loop_with, AdaptOutcome, AdaptRecord};
use crate::error::{Error, Result};
use crate::hier::io::mesh_svg;
use crate::par::Execution;

pub const CSV_HEADER: &str = "iter,n_elements,n_dofs,eta,err_h1,err_l2,n_marked,max_level,wall_ms";

/// One CSV line (without newline) for `r`.
pub fn csv_line(r: &AdaptRecord) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x:.12e}"));
    format!(
        "{},{},{},{:.12e},{},{},{},{},{:.3}",
        r.iter,
        r.n_elements,
        r.n_dofs,
        r.eta,
        opt(r.err_h1),
        opt(r.err_l2),
        r.n_marked,
        r.max_level,
        r.wall_ms
    )
}

/// Reads records back from a CSV written by [`run_experiment`].
pub fn read_csv(path: &Path) -> Result<Vec<AdaptRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing or unexpected header".into(),
            })
        }
    }
    lines
        .map(|(n, line)| {
            let bad = |m: &str| Error::Parse {
                line: n + 1,
                msg: m.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(bad("expected 9 fields"));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            let opt = |s: &str| num(s).map(|v| (!v.is_nan()).then_some(v));
            Ok(AdaptRecord {
                iter: int(f[0])?,
                n_elements: int(f[1])?,
                n_dofs: int(f[2])?,
                eta: num(f[3])?,
                err_h1: opt(f[4])?,
                err_l2: opt(f[5])?,
                n_marked: int(f[6])?,
                max_level: int(f[7])?,
                wall_ms: num(f[8])?,
            })
        })
        .collect()
}

#[derive(Debug)]
pub struct RunSummary {
    pub outcome: AdaptOutcome,
    pub csv: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

/// Runs the configured adaptive loop. The CSV is written line by line and
/// flushed after every iteration; mesh snapshots go next to it.
pub fn run_experiment(cfg: &RunConfig, exec: Execution) -> Result<RunSummary> {
    let adapt = cfg.adapt_config(exec)?;
    let probe: Vec<[f64; 2]> = (1..8)
        .flat_map(|i| (1..8).map(move |j| [i as f64 / 8.0, j as f64 / 8.0]))
        .filter_map(|t| adapt.geometry.map(t).ok())
        .collect();
    adapt.problem.check_at(&probe)?;

    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    let csv = cfg.output.join(format!("{}.csv", cfg.name));
    let file = File::create(&csv).map_err(|e| Error::io(&csv, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{CSV_HEADER}")
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&csv, e))?;
    let mut snapshots = Vec::new();
    let outcome = adaptive_loop_with(&adapt, |rec, mesh| {
        writeln!(out, "{}", csv_line(rec))
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&csv, e))?;
        if cfg.snapshot_every > 0 && rec.iter % cfg.snapshot_every == 0 {
            let path = cfg.output.join(format!("{}_mesh_{:03}.svg", cfg.name, rec.iter));
            std::fs::write(&path, mesh_svg(mesh, 512.0)).map_err(|e| Error::io(&path, e))?;
            snapshots.push(path);
        }
        Ok(())
    })?;
    Ok(RunSummary {
        outcome,
        csv,
        snapshots,
    })
}
