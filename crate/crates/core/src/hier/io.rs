//! Line-oriented mesh format and SVG rendering.
//!
//! ```text
//! hiermesh
//! dim 2
//! degree 2 2
//! multiplicity 1
//! levels 3
//! knots 0:3 1/2:1 1:3
//! knots 0:3 1/2:1 1:3
//! 0 0 0
//! 1 1 0
//! ```
//! Each line after the header is a deactivated cell `level i_1 ... i_d`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::levels::LevelSequence;
use super::mesh::{Cell, HierMesh};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::spline::{KnotVector, TensorSpace};

pub fn write_mesh<const D: usize>(mesh: &HierMesh<D>) -> String {
    let levels = mesh.levels();
    let mut s = String::from("hiermesh\n");
    let _ = writeln!(s, "dim {D}");
    let degrees: Vec<String> = levels.degrees().iter().map(|p| p.to_string()).collect();
    let _ = writeln!(s, "degree {}", degrees.join(" "));
    let _ = writeln!(s, "multiplicity {}", levels.multiplicity());
    let _ = writeln!(s, "levels {}", mesh.num_levels());
    for k in 0..D {
        let kv = levels.base().knots(k);
        let parts: Vec<String> = kv
            .breakpoints()
            .iter()
            .zip(kv.multiplicities())
            .map(|(b, m)| format!("{b}:{m}"))
            .collect();
        let _ = writeln!(s, "knots {}", parts.join(" "));
    }
    for l in 0..mesh.num_levels() {
        for c in mesh.deactivated_at(l) {
            let idx: Vec<String> = c.index.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(s, "{} {}", l, idx.join(" "));
        }
    }
    s
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn expect_key<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<(usize, Vec<&'a str>)> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| parse_err(0, format!("missing '{key}' line")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(parse_err(no, format!("expected '{key}'")));
    }
    Ok((no, parts.collect()))
}

fn parse_usize(no: usize, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(no, format!("'{s}' is not a non-negative integer")))
}

/// Parses `breakpoint:multiplicity` tokens.
pub fn parse_knot_tokens(no: usize, degree: usize, tokens: &[&str]) -> Result<KnotVector> {
    let mut bps = Vec::with_capacity(tokens.len());
    let mut mults = Vec::with_capacity(tokens.len());
    for t in tokens {
        let (b, m) = t
            .split_once(':')
            .ok_or_else(|| parse_err(no, format!("knot '{t}' is not of the form value:multiplicity")))?;
        bps.push(b.parse::<Dyadic>().map_err(|e| parse_err(no, e.to_string()))?);
        mults.push(parse_usize(no, m)?);
    }
    KnotVector::new(degree, bps, mults).map_err(|e| parse_err(no, e.to_string()))
}

pub fn read_mesh<const D: usize>(text: &str) -> Result<HierMesh<D>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (no, rest) = expect_key(&mut lines, "hiermesh")?;
    if !rest.is_empty() {
        return Err(parse_err(no, "unexpected tokens after 'hiermesh'"));
    }
    let (no, dim) = expect_key(&mut lines, "dim")?;
    if dim.len() != 1 || parse_usize(no, dim[0])? != D {
        return Err(parse_err(no, format!("expected dimension {D}")));
    }
    let (no, deg) = expect_key(&mut lines, "degree")?;
    if deg.len() != D {
        return Err(parse_err(no, format!("expected {D} degrees")));
    }
    let degrees = deg
        .iter()
        .map(|s| parse_usize(no, s))
        .collect::<Result<Vec<_>>>()?;
    let (no, m) = expect_key(&mut lines, "multiplicity")?;
    if m.len() != 1 {
        return Err(parse_err(no, "expected one multiplicity"));
    }
    let multiplicity = parse_usize(no, m[0])?;
    let (no, n) = expect_key(&mut lines, "levels")?;
    if n.len() != 1 {
        return Err(parse_err(no, "expected one level count"));
    }
    let n_levels = parse_usize(no, n[0])?;
    let mut kvs = Vec::with_capacity(D);
    for &p in &degrees {
        let (no, toks) = expect_key(&mut lines, "knots")?;
        kvs.push(parse_knot_tokens(no, p, &toks)?);
    }
    let base = TensorSpace::new(kvs.try_into().expect("D knot vectors"));
    let levels = LevelSequence::new(base, multiplicity).map_err(|e| parse_err(no, e.to_string()))?;
    let mut cells = Vec::new();
    for (no, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != D + 1 {
            return Err(parse_err(no, format!("expected 'level' followed by {D} indices")));
        }
        let level = parse_usize(no, toks[0])?;
        if level + 1 >= n_levels {
            return Err(parse_err(no, format!("level {level} inconsistent with {n_levels} levels")));
        }
        let mut idx = [0usize; D];
        for k in 0..D {
            idx[k] = parse_usize(no, toks[k + 1])?;
        }
        cells.push((no, Cell::new(level, idx)));
    }
    let plain: Vec<Cell<D>> = cells.iter().map(|c| c.1).collect();
    let mesh = HierMesh::from_deactivated(Arc::new(levels), &plain)?;
    for (no, c) in cells {
        if c.level() > 0 && !mesh.is_deactivated(c.parent().unwrap()) {
            return Err(parse_err(no, format!("cell {c:?} has an unrefined parent")));
        }
    }
    if mesh.num_levels() != n_levels {
        return Err(parse_err(0, format!(
            "header announces {n_levels} levels but cells give {}",
            mesh.num_levels()
        )));
    }
    Ok(mesh)
}

pub fn write_mesh_file<const D: usize>(mesh: &HierMesh<D>, path: &Path) -> Result<()> {
    std::fs::write(path, write_mesh(mesh)).map_err(|e| Error::io(path, e))
}

pub fn read_mesh_file<const D: usize>(path: &Path) -> Result<HierMesh<D>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_mesh(&text)
}

/// SVG picture of a 2D mesh in the parametric square; finer levels are darker.
pub fn mesh_svg(mesh: &HierMesh<2>, size: f64) -> String {
    let max_level = mesh.max_level().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="-2 -2 {} {}">"#,
        size + 4.0,
        size + 4.0
    );
    for &c in mesh.elements() {
        let b = mesh.cell_bounds(c);
        let shade = (255.0 - 190.0 * c.level() as f64 / max_level).round() as u8;
        let x = b[0].0 * size;
        let w = (b[0].1 - b[0].0) * size;
        // flip y so the origin is bottom-left
        let y = (1.0 - b[1].1) * size;
        let h = (b[1].1 - b[1].0) * size;
        let _ = writeln!(
            s,
            r#"  <rect x="{x:.4}" y="{y:.4}" width="{w:.4}" height="{h:.4}" fill="rgb({shade},{shade},{shade})" stroke="black" stroke-width="0.5"/>"#
        );
    }
    s.push_str("</svg>\n");
    s
}
