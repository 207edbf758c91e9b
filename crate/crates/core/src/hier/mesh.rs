use std::cmp::Reverse;
use std::collections::BTreeSet;
use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};

use super::levels::{LevelSequence, MAX_LEVELS};
use crate::error::{Error, Result};
use crate::spline::{for_each_in_box, IndexBox};

/// An element of the level-`level` tensor grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell<const D: usize> {
    pub level: u32,
    pub index: [u32; D],
}

impl<const D: usize> Cell<D> {
    pub fn new(level: usize, index: [usize; D]) -> Self {
        Cell {
            level: level as u32,
            index: index.map(|i| i as u32),
        }
    }

    pub fn level(&self) -> usize {
        self.level as usize
    }

    pub fn index_usize(&self) -> [usize; D] {
        self.index.map(|i| i as usize)
    }

    pub fn parent(&self) -> Option<Cell<D>> {
        (self.level > 0).then(|| Cell {
            level: self.level - 1,
            index: self.index.map(|i| i / 2),
        })
    }

    /// Ancestor at level `k <= self.level`.
    pub fn ancestor(&self, k: usize) -> Cell<D> {
        let s = self.level() - k;
        Cell {
            level: k as u32,
            index: self.index.map(|i| i >> s),
        }
    }

    /// The `2^D` children in lexicographic order.
    pub fn children(self) -> impl Iterator<Item = Cell<D>> {
        (0..1u32 << D).map(move |bits| Cell {
            level: self.level + 1,
            index: std::array::from_fn(|k| 2 * self.index[k] + ((bits >> (D - 1 - k)) & 1)),
        })
    }
}

/// Which hierarchical basis the grading protects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AdmissibleKind {
    /// Graded for HB-splines.
    H,
    /// Graded for THB-splines.
    T,
}

impl std::str::FromStr for AdmissibleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" => Ok(AdmissibleKind::H),
            "T" | "t" => Ok(AdmissibleKind::T),
            other => Err(Error::Argument(format!("unknown admissibility kind '{other}' (use H or T)"))),
        }
    }
}

impl std::fmt::Display for AdmissibleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdmissibleKind::H => "H",
            AdmissibleKind::T => "T",
        })
    }
}

/// Admissibility class `mu >= 2` together with its kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Admissibility {
    mu: usize,
    kind: AdmissibleKind,
}

impl Admissibility {
    pub fn new(mu: usize, kind: AdmissibleKind) -> Result<Self> {
        if mu < 2 {
            return Err(Error::Argument(format!("admissibility class must be at least 2, got {mu}")));
        }
        Ok(Admissibility { mu, kind })
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn kind(&self) -> AdmissibleKind {
        self.kind
    }
}

/// Hierarchical mesh: nested domains encoded by the per-level sets of
/// deactivated (refined) cells.
#[derive(Clone, Debug)]
pub struct HierMesh<const D: usize> {
    levels: Arc<LevelSequence<D>>,
    deactivated: Vec<FxHashSet<[u32; D]>>,
    active: Vec<Cell<D>>,
    lookup: FxHashMap<Cell<D>, usize>,
    initial_elements: usize,
    cumulative_marked: usize,
}

impl<const D: usize> PartialEq for HierMesh<D> {
    fn eq(&self, other: &Self) -> bool {
        self.levels == other.levels && self.active == other.active
    }
}

impl<const D: usize> HierMesh<D> {
    /// Level-0 mesh with every element active.
    pub fn new(levels: Arc<LevelSequence<D>>) -> Self {
        let mut m = HierMesh {
            levels,
            deactivated: Vec::new(),
            active: Vec::new(),
            lookup: FxHashMap::default(),
            initial_elements: 0,
            cumulative_marked: 0,
        };
        m.rebuild();
        m.initial_elements = m.active.len();
        m
    }

    /// Builds a mesh from raw deactivated cells without any grading. Parents of
    /// listed cells are deactivated as well.
    pub fn from_deactivated(levels: Arc<LevelSequence<D>>, cells: &[Cell<D>]) -> Result<Self> {
        let mut m = Self::new(levels);
        for &c in cells {
            m.check_in_range(c)?;
            let mut cur = Some(c);
            while let Some(x) = cur {
                m.deactivate_raw(x);
                cur = x.parent();
            }
        }
        m.rebuild();
        Ok(m)
    }

    fn check_in_range(&self, c: Cell<D>) -> Result<()> {
        if c.level() + 1 >= MAX_LEVELS {
            return Err(Error::Level {
                requested: c.level() + 1,
                max: MAX_LEVELS - 1,
            });
        }
        let shape = self.levels.element_shape(c.level());
        if (0..D).any(|k| c.index[k] as usize >= shape[k]) {
            return Err(Error::Argument(format!("cell {c:?} lies outside the grid")));
        }
        Ok(())
    }

    fn deactivate_raw(&mut self, c: Cell<D>) {
        let l = c.level();
        if self.deactivated.len() <= l {
            self.deactivated.resize_with(l + 1, FxHashSet::default);
        }
        self.deactivated[l].insert(c.index);
    }

    fn rebuild(&mut self) {
        while self.deactivated.last().is_some_and(|s| s.is_empty()) {
            self.deactivated.pop();
        }
        let mut active = Vec::new();
        let shape = self.levels.element_shape(0);
        let full: IndexBox<D> = std::array::from_fn(|k| (0, shape[k] - 1));
        let mut stack = Vec::new();
        for_each_in_box(&full, |i| stack.push(Cell::new(0, i)));
        while let Some(c) = stack.pop() {
            if self.is_deactivated(c) {
                stack.extend(c.children());
            } else {
                active.push(c);
            }
        }
        active.sort_unstable();
        self.lookup = active.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        self.active = active;
    }

    pub fn levels(&self) -> &LevelSequence<D> {
        &self.levels
    }

    pub fn levels_arc(&self) -> &Arc<LevelSequence<D>> {
        &self.levels
    }

    /// Number of levels `N` (one more than the finest active level).
    pub fn num_levels(&self) -> usize {
        self.deactivated.len() + 1
    }

    pub fn num_elements(&self) -> usize {
        self.active.len()
    }

    /// Active elements sorted by level, then index; positions are element ids.
    pub fn elements(&self) -> &[Cell<D>] {
        &self.active
    }

    pub fn element(&self, id: usize) -> Cell<D> {
        self.active[id]
    }

    pub fn element_id(&self, c: Cell<D>) -> Option<usize> {
        self.lookup.get(&c).copied()
    }

    pub fn max_level(&self) -> usize {
        self.active.last().map_or(0, |c| c.level())
    }

    pub fn initial_elements(&self) -> usize {
        self.initial_elements
    }

    /// Total number of elements passed to `refine` so far.
    pub fn cumulative_marked(&self) -> usize {
        self.cumulative_marked
    }

    /// Element counts per level.
    pub fn level_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.max_level() + 1];
        for c in &self.active {
            h[c.level()] += 1;
        }
        h
    }

    pub fn is_deactivated(&self, c: Cell<D>) -> bool {
        self.deactivated
            .get(c.level())
            .is_some_and(|s| s.contains(&c.index))
    }

    /// True when the cell is part of `Ω^level`.
    pub fn is_present(&self, c: Cell<D>) -> bool {
        match c.parent() {
            None => true,
            Some(p) => self.is_deactivated(p),
        }
    }

    pub fn is_active(&self, c: Cell<D>) -> bool {
        self.is_present(c) && !self.is_deactivated(c)
    }

    /// Deactivated cells of `level`, sorted.
    pub fn deactivated_at(&self, level: usize) -> Vec<Cell<D>> {
        let mut v: Vec<Cell<D>> = self
            .deactivated
            .get(level)
            .map(|s| s.iter().map(|&i| Cell { level: level as u32, index: i }).collect())
            .unwrap_or_default();
        v.sort_unstable();
        v
    }

    /// Present cells of `level` (the cells making up `Ω^level`), sorted.
    pub fn present_at(&self, level: usize) -> Vec<Cell<D>> {
        if level == 0 {
            let shape = self.levels.element_shape(0);
            let full: IndexBox<D> = std::array::from_fn(|k| (0, shape[k] - 1));
            let mut v = Vec::new();
            for_each_in_box(&full, |i| v.push(Cell::new(0, i)));
            return v;
        }
        let mut v: Vec<Cell<D>> = self
            .deactivated_at(level - 1)
            .iter()
            .flat_map(|c| c.children().collect::<Vec<_>>())
            .collect();
        v.sort_unstable();
        v
    }

    /// Parametric bounds of a cell.
    pub fn cell_bounds(&self, c: Cell<D>) -> [(f64, f64); D] {
        let space = self.levels.space(c.level()).expect("level exists");
        space.element_bounds(c.index_usize())
    }

    /// Active element containing the parametric point `t` (half-open cells,
    /// closed at the upper domain boundary).
    pub fn locate(&self, t: [f64; D]) -> Result<usize> {
        let base = self.levels.base().find_element(t)?;
        let mut c = Cell::new(0, base);
        while self.is_deactivated(c) {
            let b = self.cell_bounds(c);
            let idx = std::array::from_fn(|k| {
                let mid = 0.5 * (b[k].0 + b[k].1);
                2 * c.index[k] + u32::from(t[k] >= mid)
            });
            c = Cell {
                level: c.level + 1,
                index: idx,
            };
        }
        Ok(self.lookup[&c])
    }

    /// Level-`k` support extension of the level-`k` ancestor of `c`.
    pub fn multilevel_support_extension(&self, c: Cell<D>, k: usize) -> Result<IndexBox<D>> {
        if k > c.level() {
            return Err(Error::Level {
                requested: k,
                max: c.level(),
            });
        }
        let a = c.ancestor(k);
        Ok(self.levels.space(k)?.support_extension(a.index_usize()))
    }

    /// H- or T-neighbourhood of the element `c` for class `mu`, sorted.
    pub fn neighborhood(&self, c: Cell<D>, adm: Admissibility) -> Vec<Cell<D>> {
        let l = c.level();
        if l + 1 < adm.mu {
            return Vec::new();
        }
        let k = l + 1 - adm.mu;
        let mut out = Vec::new();
        match adm.kind {
            AdmissibleKind::H => {
                let b = self.multilevel_support_extension(c, k).expect("k <= level");
                for_each_in_box(&b, |i| {
                    let q = Cell::new(k, i);
                    if self.is_active(q) {
                        out.push(q);
                    }
                });
            }
            AdmissibleKind::T => {
                let b = self.multilevel_support_extension(c, k + 1).expect("k + 1 <= level");
                let pb: IndexBox<D> = std::array::from_fn(|d| (b[d].0 / 2, b[d].1 / 2));
                for_each_in_box(&pb, |i| {
                    let q = Cell::new(k, i);
                    if self.is_active(q) {
                        out.push(q);
                    }
                });
            }
        }
        out
    }

    /// Level-`k` cell `a` satisfies the grading condition used by `check_admissible`.
    fn ancestor_admissible(&self, a: Cell<D>, kind: AdmissibleKind) -> bool {
        let k = a.level();
        let mut ok = true;
        match kind {
            AdmissibleKind::H => {
                let parent = a.parent().expect("k >= 1");
                let b = self.multilevel_support_extension(parent, k - 1).expect("valid");
                for_each_in_box(&b, |i| ok &= self.is_deactivated(Cell::new(k - 1, i)));
            }
            AdmissibleKind::T => {
                let b = self.multilevel_support_extension(a, k).expect("valid");
                for_each_in_box(&b, |i| ok &= self.is_present(Cell::new(k, i)));
            }
        }
        ok
    }

    /// `None` when the mesh is admissible of the given class, otherwise an
    /// active element inside the first offending region.
    pub fn check_admissible(&self, adm: Admissibility) -> Option<Cell<D>> {
        let mut checked = FxHashSet::default();
        for l in adm.mu..self.num_levels() {
            let k = l + 1 - adm.mu;
            for d in self.deactivated_at(l - 1) {
                let a = d.ancestor(k);
                if !checked.insert(a) {
                    continue;
                }
                if !self.ancestor_admissible(a, adm.kind) {
                    return Some(self.first_active_inside(d.children().next().unwrap()));
                }
            }
        }
        None
    }

    pub fn is_admissible(&self, adm: Admissibility) -> bool {
        self.check_admissible(adm).is_none()
    }

    fn first_active_inside(&self, mut c: Cell<D>) -> Cell<D> {
        while self.is_deactivated(c) {
            c = c.children().next().unwrap();
        }
        c
    }

    /// Refines the marked active elements together with the neighbourhood
    /// closure needed to keep the mesh admissible.
    pub fn refine(&self, marked: &[Cell<D>], adm: Admissibility) -> Result<Self> {
        for &c in marked {
            if !self.lookup.contains_key(&c) {
                return Err(Error::Argument(format!("marked cell {c:?} is not an active element")));
            }
        }
        let closure = self.refinement_closure(marked, adm);
        if let Some(c) = closure.iter().find(|c| c.level() + 2 > MAX_LEVELS) {
            return Err(Error::Level {
                requested: c.level() + 1,
                max: MAX_LEVELS - 1,
            });
        }
        let mut out = self.clone();
        for c in closure {
            out.deactivate_raw(c);
        }
        out.rebuild();
        out.cumulative_marked += marked.len();
        Ok(out)
    }

    /// Refines by element ids.
    pub fn refine_ids(&self, ids: &[usize], adm: Admissibility) -> Result<Self> {
        let cells = ids
            .iter()
            .map(|&i| {
                self.active
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::Argument(format!("element id {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.refine(&cells, adm)
    }

    /// Marked set closed under the neighbourhood relation.
    pub fn refinement_closure(&self, marked: &[Cell<D>], adm: Admissibility) -> Vec<Cell<D>> {
        let mut all: FxHashSet<Cell<D>> = marked.iter().copied().collect();
        let mut work: BTreeSet<(Reverse<u32>, [u32; D])> =
            marked.iter().map(|c| (Reverse(c.level), c.index)).collect();
        while let Some((Reverse(level), index)) = work.pop_first() {
            let c = Cell { level, index };
            for q in self.neighborhood(c, adm) {
                if all.insert(q) {
                    work.insert((Reverse(q.level), q.index));
                }
            }
        }
        let mut v: Vec<_> = all.into_iter().collect();
        v.sort_unstable();
        v
    }

    /// Every element bisected once.
    pub fn refine_uniform(&self) -> Self {
        let mut out = self.clone();
        for &c in &self.active {
            out.deactivate_raw(c);
        }
        out.rebuild();
        out.cumulative_marked += self.active.len();
        out
    }

    /// Coarsest common refinement of two meshes over the same levels.
    pub fn overlay(&self, other: &Self) -> Result<Self> {
        if self.levels != other.levels {
            return Err(Error::Incompatible(format!(
                "overlay of meshes over different level sequences ({:?} vs {:?})",
                self.levels, other.levels
            )));
        }
        let mut out = self.clone();
        for (l, set) in other.deactivated.iter().enumerate() {
            for &i in set {
                out.deactivate_raw(Cell { level: l as u32, index: i });
            }
        }
        out.rebuild();
        out.cumulative_marked = self.cumulative_marked + other.cumulative_marked;
        Ok(out)
    }

    /// True when B-spline `i` of `level` has its support inside `Ω^level`.
    pub fn support_in_domain(&self, level: usize, i: [usize; D]) -> bool {
        if level == 0 {
            return true;
        }
        let space = self.levels.space(level).expect("level exists");
        let b = space.support_elements(i);
        let mut ok = true;
        for_each_in_box(&b, |e| ok &= self.is_present(Cell::new(level, e)));
        ok
    }

    /// True when B-spline `i` of `level` has its support inside `Ω^{level+1}`.
    pub fn support_in_finer_domain(&self, level: usize, i: [usize; D]) -> bool {
        let space = self.levels.space(level).expect("level exists");
        let b = space.support_elements(i);
        let mut ok = true;
        for_each_in_box(&b, |e| ok &= self.is_deactivated(Cell::new(level, e)));
        ok
    }

    /// Zeroes the level-`level` coefficients (flat global order) of the
    /// B-splines whose support lies inside `Ω^level`.
    pub fn truncate_coefficients(&self, level: usize, coeffs: &[f64]) -> Result<Vec<f64>> {
        if level == 0 {
            return Err(Error::Level { requested: 0, max: 0 });
        }
        let space = self.levels.space(level)?;
        if coeffs.len() != space.dimension() {
            return Err(Error::Argument(format!(
                "expected {} level-{level} coefficients, got {}",
                space.dimension(),
                coeffs.len()
            )));
        }
        Ok(coeffs
            .iter()
            .enumerate()
            .map(|(g, &c)| {
                if self.support_in_domain(level, space.global_unflat(g)) {
                    0.0
                } else {
                    c
                }
            })
            .collect())
    }

}
