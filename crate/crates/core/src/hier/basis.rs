use rustc_hash::{FxHashMap, FxHashSet};

use super::mesh::{Cell, HierMesh};
use crate::error::{Error, Result};
use crate::par::{map_indexed, try_map_indexed, Execution};
use crate::spline::{for_each_in_box, for_each_offset};

/// Hierarchical basis flavour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    /// Plain hierarchical B-splines.
    Hb,
    /// Truncated hierarchical B-splines.
    Thb,
}

impl std::str::FromStr for Flavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hb" => Ok(Flavor::Hb),
            "thb" => Ok(Flavor::Thb),
            other => Err(Error::Argument(format!("unknown basis flavor '{other}' (use HB or THB)"))),
        }
    }
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Flavor::Hb => "HB",
            Flavor::Thb => "THB",
        })
    }
}

/// A B-spline of some level, identified by its tensor multi-index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunctionId<const D: usize> {
    pub level: u32,
    pub index: [u32; D],
}

impl<const D: usize> FunctionId<D> {
    pub fn level(&self) -> usize {
        self.level as usize
    }

    pub fn index_usize(&self) -> [usize; D] {
        self.index.map(|i| i as usize)
    }
}

/// Restriction of the hierarchical basis to one element, expressed in the
/// element's own-level local tensor B-splines.
///
/// Column `c` belongs to basis function `dofs[c]`; entry `(a, c)` is the
/// coefficient of local B-spline `a` (lexicographic, direction 0 slowest).
#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    dofs: Vec<usize>,
    rows: usize,
    coeffs: Vec<f64>,
}

impl Extraction {
    fn empty(rows: usize) -> Self {
        Extraction {
            dofs: Vec::new(),
            rows,
            coeffs: Vec::new(),
        }
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.dofs.len()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.coeffs[c * self.rows..(c + 1) * self.rows]
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.coeffs[col * self.rows + row]
    }

    /// Local tensor coefficients of the spline with global coefficients `global`.
    pub fn apply(&self, global: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (c, &d) in self.dofs.iter().enumerate() {
            let g = global[d];
            if g != 0.0 {
                for (o, v) in out.iter_mut().zip(self.column(c)) {
                    *o += g * v;
                }
            }
        }
        out
    }

    fn push_unit(&mut self, dof: usize, row: usize) {
        self.dofs.push(dof);
        let start = self.coeffs.len();
        self.coeffs.resize(start + self.rows, 0.0);
        self.coeffs[start + row] = 1.0;
    }
}

/// Active (T)HB basis of a hierarchical mesh.
#[derive(Clone, Debug)]
pub struct HierBasis<const D: usize> {
    mesh: HierMesh<D>,
    flavor: Flavor,
    ids: Vec<FunctionId<D>>,
    index: Vec<FxHashMap<[u32; D], usize>>,
    // level-k B-splines with support inside Ω^k (used for truncation)
    in_domain: Vec<FxHashSet<[u32; D]>>,
}

impl<const D: usize> HierBasis<D> {
    pub fn new(mesh: &HierMesh<D>, flavor: Flavor) -> Result<Self> {
        let levels = mesh.levels();
        let degrees = levels.degrees();
        let n_levels = mesh.num_levels();
        let mut ids = Vec::new();
        let elements = mesh.elements();
        let mut start = 0;
        for l in 0..n_levels {
            let space = levels.space(l)?;
            let end = start + elements[start..].partition_point(|c| c.level() == l);
            let mut seen = FxHashSet::default();
            for cell in &elements[start..end] {
                let first = space.first_basis(cell.index_usize());
                for_each_offset(degrees, |off| {
                    let i: [usize; D] = std::array::from_fn(|k| first[k] + off[k]);
                    if seen.insert(i) && mesh.support_in_domain(l, i) && !mesh.support_in_finer_domain(l, i) {
                        ids.push(FunctionId {
                            level: l as u32,
                            index: i.map(|x| x as u32),
                        });
                    }
                });
            }
            start = end;
        }
        ids.sort_unstable();
        let mut index = vec![FxHashMap::default(); n_levels];
        for (d, id) in ids.iter().enumerate() {
            index[id.level()].insert(id.index, d);
        }
        let mut in_domain = vec![FxHashSet::default(); n_levels];
        if flavor == Flavor::Thb {
            for (l, set) in in_domain.iter_mut().enumerate().skip(1) {
                let space = levels.space(l)?;
                let mut seen = FxHashSet::default();
                for cell in mesh.present_at(l) {
                    let first = space.first_basis(cell.index_usize());
                    for_each_offset(degrees, |off| {
                        let i: [usize; D] = std::array::from_fn(|k| first[k] + off[k]);
                        if seen.insert(i) && mesh.support_in_domain(l, i) {
                            set.insert(i.map(|x| x as u32));
                        }
                    });
                }
            }
        }
        Ok(HierBasis {
            mesh: mesh.clone(),
            flavor,
            ids,
            index,
            in_domain,
        })
    }

    pub fn mesh(&self) -> &HierMesh<D> {
        &self.mesh
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Active functions sorted by level, then multi-index; positions are dofs.
    pub fn ids(&self) -> &[FunctionId<D>] {
        &self.ids
    }

    pub fn dof(&self, level: usize, index: [usize; D]) -> Option<usize> {
        self.index
            .get(level)?
            .get(&index.map(|x| x as u32))
            .copied()
    }

    fn local_rows(&self) -> usize {
        self.mesh.levels().base().local_count()
    }

    fn root_extraction(&self, cell: Cell<D>) -> Extraction {
        let space = self.mesh.levels().base();
        let first = space.first_basis(cell.index_usize());
        let mut e = Extraction::empty(self.local_rows());
        let mut row = 0;
        for_each_offset(space.degrees(), |off| {
            let i: [usize; D] = std::array::from_fn(|k| first[k] + off[k]);
            if let Some(d) = self.dof(0, i) {
                e.push_unit(d, row);
            }
            row += 1;
        });
        e
    }

    fn child_extraction(&self, parent: &Extraction, child: Cell<D>) -> Extraction {
        let levels = self.mesh.levels();
        let k = child.level();
        let coarse = levels.space(k - 1).expect("level exists");
        let fine = levels.space(k).expect("level exists");
        let mats = levels.refinement(k).expect("level >= 1");
        let pidx = child.parent().expect("level >= 1").index_usize();
        let cidx = child.index_usize();
        let fc = coarse.first_basis(pidx);
        let ff = fine.first_basis(cidx);
        let degrees = fine.degrees();
        let n: [usize; D] = degrees.map(|p| p + 1);
        let blocks: Vec<Vec<f64>> = (0..D)
            .map(|d| {
                let mut b = vec![0.0; n[d] * n[d]];
                for r in 0..n[d] {
                    for a in 0..n[d] {
                        b[r * n[d] + a] = mats[d].get(ff[d] + r, fc[d] + a);
                    }
                }
                b
            })
            .collect();
        let rows = parent.rows;
        let mut truncated = vec![false; rows];
        if self.flavor == Flavor::Thb {
            let mut row = 0;
            for_each_offset(degrees, |off| {
                let i: [u32; D] = std::array::from_fn(|d| (ff[d] + off[d]) as u32);
                truncated[row] = self.in_domain[k].contains(&i);
                row += 1;
            });
        }
        let mut out = Extraction::empty(rows);
        let mut buf_a = vec![0.0; rows];
        let mut buf_b = vec![0.0; rows];
        for c in 0..parent.cols() {
            buf_a.copy_from_slice(parent.column(c));
            for d in 0..D {
                let outer: usize = n[..d].iter().product();
                let stride: usize = n[d + 1..].iter().product();
                apply_axis(&blocks[d], n[d], outer, stride, &buf_a, &mut buf_b);
                std::mem::swap(&mut buf_a, &mut buf_b);
            }
            for (v, &t) in buf_a.iter_mut().zip(&truncated) {
                if t {
                    *v = 0.0;
                }
            }
            if buf_a.iter().any(|&v| v != 0.0) {
                out.dofs.push(parent.dofs[c]);
                out.coeffs.extend_from_slice(&buf_a);
            }
        }
        let mut row = 0;
        for_each_offset(degrees, |off| {
            let i: [usize; D] = std::array::from_fn(|d| ff[d] + off[d]);
            if let Some(dof) = self.dof(k, i) {
                out.push_unit(dof, row);
            }
            row += 1;
        });
        out
    }

    /// Extraction of the active element `element`, built by climbing from its
    /// level-0 ancestor.
    pub fn extraction(&self, element: usize) -> Extraction {
        let cell = self.mesh.element(element);
        let mut e = self.root_extraction(cell.ancestor(0));
        for k in 1..=cell.level() {
            e = self.child_extraction(&e, cell.ancestor(k));
        }
        e
    }

    /// Applies `f` to every active element and its extraction, returning the
    /// results in element order. Extractions are produced level by level from
    /// their parents' and dropped once used.
    pub fn map_elements<R, F>(&self, exec: Execution, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize, &Extraction) -> R + Sync + Send,
    {
        let mut out: Vec<Option<R>> = (0..self.mesh.num_elements()).map(|_| None).collect();
        self.for_each_element(exec, f, |id, r| out[id] = Some(r));
        out.into_iter().map(|r| r.expect("every element visited")).collect()
    }

    /// Like [`map_elements`](Self::map_elements) but streams each result to
    /// `sink` instead of collecting them. Results arrive in a fixed order
    /// (level, then cell index) that does not depend on the thread count, and
    /// at most one chunk of results is held at a time.
    pub fn for_each_element<R, F, S>(&self, exec: Execution, f: F, mut sink: S)
    where
        R: Send,
        F: Fn(usize, &Extraction) -> R + Sync + Send,
        S: FnMut(usize, R),
    {
        const CHUNK: usize = 2048;
        let mut parents: FxHashMap<[u32; D], Extraction> = FxHashMap::default();
        for l in 0..self.mesh.num_levels() {
            let cells = self.mesh.present_at(l);
            let mut next = FxHashMap::default();
            for chunk in cells.chunks(CHUNK) {
                let results = map_indexed(exec, chunk.len(), |j| {
                    let c = chunk[j];
                    let e = match c.parent() {
                        None => self.root_extraction(c),
                        Some(p) => self.child_extraction(&parents[&p.index], c),
                    };
                    match self.mesh.element_id(c) {
                        Some(id) => (Some((id, f(id, &e))), None),
                        None => (None, Some(e)),
                    }
                });
                for (c, (res, ext)) in chunk.iter().zip(results) {
                    if let Some((id, r)) = res {
                        sink(id, r);
                    }
                    if let Some(e) = ext {
                        next.insert(c.index, e);
                    }
                }
            }
            parents = next;
        }
    }

    /// Local tensor coefficients of the spline `coeffs` on every element.
    pub fn local_coefficients(&self, coeffs: &[f64], exec: Execution) -> Vec<Vec<f64>> {
        self.map_elements(exec, |_, e| e.apply(coeffs))
    }

    /// Value of the hierarchical spline with coefficients `coeffs` at `t`.
    pub fn eval(&self, coeffs: &[f64], t: [f64; D]) -> Result<f64> {
        let id = self.mesh.locate(t)?;
        let cell = self.mesh.element(id);
        let local = self.extraction(id).apply(coeffs);
        let space = self.mesh.levels().space(cell.level())?;
        let vals = space.local_values(cell.index_usize(), t);
        Ok(vals.iter().zip(&local).map(|(a, b)| a * b).sum())
    }

    /// Distinct levels of the basis functions that do not vanish on the element.
    pub fn levels_on_element(&self, e: &Extraction) -> Vec<usize> {
        let mut v: Vec<usize> = e.dofs.iter().map(|&d| self.ids[d].level()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Element used by the quasi-interpolant for function `dof`: the active
    /// element of the same level inside its support whose centre is closest
    /// to the support midpoint, lowest index on ties.
    pub fn projection_element(&self, dof: usize) -> Cell<D> {
        let id = self.ids[dof];
        let l = id.level();
        let space = self.mesh.levels().space(l).expect("level exists");
        let i = id.index_usize();
        let mid: [f64; D] = std::array::from_fn(|k| space.knots(k).support_midpoint(i[k]));
        let b = space.support_elements(i);
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for_each_in_box(&b, |e| {
            let c = Cell::new(l, e);
            if !self.mesh.is_active(c) {
                return;
            }
            let bounds = space.element_bounds(e);
            let d: f64 = (0..D)
                .map(|k| (0.5 * (bounds[k].0 + bounds[k].1) - mid[k]).powi(2))
                .sum();
            if d < best_d {
                best_d = d;
                best = Some(c);
            }
        });
        best.expect("active functions have an active element of their level in the support")
    }

    /// Coefficients of the hierarchical quasi-interpolant of `f` (local L²
    /// projections on one same-level active element per function).
    pub fn quasi_interpolant<F>(&self, f: F, exec: Execution) -> Result<Vec<f64>>
    where
        F: Fn([f64; D]) -> f64 + Sync + Send,
    {
        try_map_indexed(exec, self.ids.len(), |d| {
            let id = self.ids[d];
            let space = self.mesh.levels().space(id.level())?;
            let c = self.projection_element(d);
            space.local_projection_coefficient(id.index_usize(), c.index_usize(), &f)
        })
    }
}

/// Applies an `n x n` matrix along one axis of a tensor shaped `[outer][n][stride]`.
fn apply_axis(mat: &[f64], n: usize, outer: usize, stride: usize, input: &[f64], out: &mut [f64]) {
    for o in 0..outer {
        let base = o * n * stride;
        for b in 0..n {
            for s in 0..stride {
                let mut acc = 0.0;
                for a in 0..n {
                    acc += mat[b * n + a] * input[base + a * stride + s];
                }
                out[base + b * stride + s] = acc;
            }
        }
    }
}
