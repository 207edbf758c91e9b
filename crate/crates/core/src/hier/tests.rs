use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::par::Execution;
use crate::spline::{knot_insertion_matrix, TensorSpace};

fn seq2(p: usize, n: usize, m: usize) -> Arc<LevelSequence<2>> {
    Arc::new(LevelSequence::uniform([p, p], [n, n], m).unwrap())
}

fn adm(mu: usize, kind: AdmissibleKind) -> Admissibility {
    Admissibility::new(mu, kind).unwrap()
}

fn random_mesh(rng: &mut ChaCha8Rng, p: usize, mu: usize, kind: AdmissibleKind, steps: usize) -> HierMesh<2> {
    let a = adm(mu, kind);
    let mut m = HierMesh::new(seq2(p, 2, 1));
    for _ in 0..steps {
        let n = m.num_elements();
        let k = rng.random_range(1..=3.min(n));
        let marked: Vec<_> = (0..k).map(|_| m.element(rng.random_range(0..n))).collect();
        m = m.refine(&marked, a).unwrap();
    }
    m
}

/// Ω^ℓ membership by scanning the active elements: a level-ℓ cell belongs to
/// Ω^ℓ when an interior (non-dyadic) point of it lies in an active element of
/// level ≥ ℓ.
fn in_omega(m: &HierMesh<2>, level: usize, center: [f64; 2]) -> bool {
    m.elements().iter().any(|&c| {
        let b = m.cell_bounds(c);
        c.level() >= level && (0..2).all(|k| b[k].0 < center[k] && center[k] < b[k].1)
    })
}

fn brute_force_ids(m: &HierMesh<2>) -> Vec<FunctionId<2>> {
    let mut out = Vec::new();
    for l in 0..m.num_levels() {
        let space = m.levels().space(l).unwrap();
        for g in 0..space.dimension() {
            let i = space.global_unflat(g);
            let b = space.support_elements(i);
            let mut inside = true;
            let mut inside_next = true;
            for e0 in b[0].0..=b[0].1 {
                for e1 in b[1].0..=b[1].1 {
                    let eb = space.element_bounds([e0, e1]);
                    let c = [eb[0].0 + 0.3 * (eb[0].1 - eb[0].0), eb[1].0 + 0.3 * (eb[1].1 - eb[1].0)];
                    inside &= in_omega(m, l, c);
                    inside_next &= in_omega(m, l + 1, c);
                }
            }
            if inside && !inside_next {
                out.push(FunctionId {
                    level: l as u32,
                    index: [i[0] as u32, i[1] as u32],
                });
            }
        }
    }
    out
}

#[test]
fn initial_basis_is_tensor_space() {
    let s = seq2(2, 4, 1);
    let m = HierMesh::new(s.clone());
    let b = HierBasis::new(&m, Flavor::Thb).unwrap();
    assert_eq!(m.num_elements(), 16);
    assert_eq!(b.len(), 36);
    assert!(b.ids().iter().all(|id| id.level == 0));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c: Vec<f64> = (0..36).map(|_| rng.random_range(-1.0..1.0)).collect();
    for _ in 0..20 {
        let t = [rng.random(), rng.random()];
        let ours = b.eval(&c, t).unwrap();
        let tensor = s.base().eval_spline(&c, t).unwrap();
        assert!((ours - tensor).abs() < 1e-14);
    }
    // level-0 element of the unrefined mesh: unit selection of the local functions
    let e = b.extraction(5);
    assert_eq!(e.cols(), 9);
    for c in 0..9 {
        let col = e.column(c);
        assert_eq!(col.iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(col.iter().filter(|&&v| v == 0.0).count(), 8);
    }
}

#[test]
fn full_refinement_gives_level_one_tensor_basis() {
    let m = HierMesh::new(seq2(3, 2, 1)).refine_uniform();
    let b = HierBasis::new(&m, Flavor::Hb).unwrap();
    assert!(b.ids().iter().all(|id| id.level == 1));
    assert_eq!(b.len(), m.levels().space(1).unwrap().dimension());
}

#[test]
fn active_ids_match_support_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..6 {
        let p = 1 + trial % 3;
        let kind = if trial % 2 == 0 { AdmissibleKind::T } else { AdmissibleKind::H };
        let m = random_mesh(&mut rng, p, 2, kind, 4);
        assert!(m.num_levels() >= 3 || trial > 0);
        let b = HierBasis::new(&m, Flavor::Thb).unwrap();
        assert_eq!(b.ids(), brute_force_ids(&m).as_slice());
    }
}

#[test]
fn figure_seven_style_three_level_mesh() {
    // staircase refinement of the lower-left corner over three levels
    let s = seq2(2, 4, 1);
    let cells = [
        Cell::new(0, [0, 0]),
        Cell::new(0, [1, 0]),
        Cell::new(0, [0, 1]),
        Cell::new(0, [1, 1]),
        Cell::new(0, [2, 0]),
        Cell::new(1, [0, 0]),
        Cell::new(1, [1, 0]),
        Cell::new(1, [0, 1]),
    ];
    let m = HierMesh::from_deactivated(s, &cells).unwrap();
    assert_eq!(m.num_levels(), 3);
    let b = HierBasis::new(&m, Flavor::Hb).unwrap();
    assert_eq!(b.ids(), brute_force_ids(&m).as_slice());
}

#[test]
fn thb_partition_of_unity() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..8 {
        let p = 2 + trial % 3;
        let m = random_mesh(&mut rng, p, 2 + trial % 2, AdmissibleKind::T, 5);
        let b = HierBasis::new(&m, Flavor::Thb).unwrap();
        let worst = b
            .map_elements(Execution::Parallel, |_, e| {
                (0..e.rows())
                    .map(|r| ((0..e.cols()).map(|c| e.entry(r, c)).sum::<f64>() - 1.0).abs())
                    .fold(0.0, f64::max)
            })
            .into_iter()
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "trial {trial}: {worst}");
    }
}

#[test]
fn sweep_matches_single_element_climb() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = random_mesh(&mut rng, 3, 2, AdmissibleKind::H, 5);
    for flavor in [Flavor::Hb, Flavor::Thb] {
        let b = HierBasis::new(&m, flavor).unwrap();
        let swept = b.map_elements(Execution::Sequential, |_, e| e.clone());
        for (id, e) in swept.iter().enumerate() {
            assert_eq!(e, &b.extraction(id));
        }
    }
}

#[test]
fn hb_extraction_is_product_of_refinement_matrices() {
    let s = seq2(2, 2, 1);
    let m = HierMesh::from_deactivated(s.clone(), &[Cell::new(0, [0, 0])]).unwrap();
    let b = HierBasis::new(&m, Flavor::Hb).unwrap();
    let id = m.element_id(Cell::new(1, [1, 0])).unwrap();
    let e = b.extraction(id);
    let mats = s.refinement(1).unwrap();
    let fine = s.space(1).unwrap();
    let ff = fine.first_basis([1, 0]);
    for (c, &dof) in e.dofs().iter().enumerate() {
        let f = b.ids()[dof];
        if f.level != 0 {
            continue;
        }
        let i = f.index_usize();
        for a0 in 0..3 {
            for a1 in 0..3 {
                let expect = mats[0].get(ff[0] + a0, i[0]) * mats[1].get(ff[1] + a1, i[1]);
                assert_eq!(e.entry(a0 * 3 + a1, c), expect);
            }
        }
    }
}

#[test]
fn one_dimensional_truncation_matches_subdivide_and_zero() {
    // cubic, Ω^1 = [1/4, 1]
    let s = Arc::new(LevelSequence::<1>::uniform([3], [4], 1).unwrap());
    let m = HierMesh::from_deactivated(
        s.clone(),
        &[Cell::new(0, [1]), Cell::new(0, [2]), Cell::new(0, [3])],
    )
    .unwrap();
    let b = HierBasis::new(&m, Flavor::Thb).unwrap();
    let coarse = s.space(0).unwrap().knots(0).clone();
    let fine = s.space(1).unwrap().knots(0).clone();
    let mat = knot_insertion_matrix(&coarse, &fine).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (dof, id) in b.ids().iter().enumerate() {
        if id.level != 0 {
            continue;
        }
        let mut c0 = vec![0.0; coarse.num_basis()];
        c0[id.index[0] as usize] = 1.0;
        let mut c1 = mat.apply(&c0);
        for (j, v) in c1.iter_mut().enumerate() {
            let (a, bb) = fine.support(j);
            if a >= 0.25 && bb <= 1.0 {
                *v = 0.0;
            }
        }
        let mut g = vec![0.0; b.len()];
        g[dof] = 1.0;
        for _ in 0..30 {
            let x: f64 = rng.random();
            let (first, vals) = fine.eval_nonzero_basis(x).unwrap();
            let oracle: f64 = vals.iter().enumerate().map(|(a, v)| v * c1[first + a]).sum();
            assert!((b.eval(&g, [x]).unwrap() - oracle).abs() < 1e-13);
        }
    }
}

#[test]
fn quasi_interpolant_reproduces_constants_and_splines() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (p, mu) in [(2, 2), (3, 3), (4, 2)] {
        let m = random_mesh(&mut rng, p, mu, AdmissibleKind::T, 5);
        let b = HierBasis::new(&m, Flavor::Thb).unwrap();
        let ones = b.quasi_interpolant(|_| 1.0, Execution::Parallel).unwrap();
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-10), "p={p}");
        let c: Vec<f64> = (0..b.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let qi = b
            .quasi_interpolant(|t| b.eval(&c, t).unwrap(), Execution::Parallel)
            .unwrap();
        for _ in 0..50 {
            let t = [rng.random(), rng.random()];
            assert!((b.eval(&qi, t).unwrap() - b.eval(&c, t).unwrap()).abs() < 1e-10);
        }
    }
}

#[test]
fn quasi_interpolant_is_local() {
    let a = adm(2, AdmissibleKind::T);
    let mut m = HierMesh::new(seq2(2, 4, 1));
    for _ in 0..3 {
        let corner = m.elements().iter().copied().filter(|c| c.index == [0, 0]).max().unwrap();
        m = m.refine(&[corner], a).unwrap();
    }
    let b = HierBasis::new(&m, Flavor::Thb).unwrap();
    let f = |t: [f64; 2]| (3.0 * t[0]).sin() + t[1] * t[1];
    // perturbation supported in [3/4, 1]^2
    let g = |t: [f64; 2]| {
        let bump = if t[0] > 0.75 && t[1] > 0.75 { (t[0] - 0.75) * (t[1] - 0.75) } else { 0.0 };
        f(t) + 10.0 * bump
    };
    let cf = b.quasi_interpolant(f, Execution::Sequential).unwrap();
    let cg = b.quasi_interpolant(g, Execution::Sequential).unwrap();
    let q = m.locate([0.01, 0.01]).unwrap();
    let e = b.extraction(q);
    assert_eq!(e.apply(&cf), e.apply(&cg));
    assert_ne!(cf, cg);
}

#[test]
fn nested_spaces_reproduce_coarse_splines() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a = adm(2, AdmissibleKind::H);
    let coarse = random_mesh(&mut rng, 2, 2, AdmissibleKind::H, 3);
    let n = coarse.num_elements();
    let marked: Vec<_> = (0..4).map(|_| coarse.element(rng.random_range(0..n))).collect();
    let fine = coarse.refine(&marked, a).unwrap();
    for flavor in [Flavor::Hb, Flavor::Thb] {
        let bc = HierBasis::new(&coarse, flavor).unwrap();
        let bf = HierBasis::new(&fine, Flavor::Thb).unwrap();
        let c: Vec<f64> = (0..bc.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cf = bf
            .quasi_interpolant(|t| bc.eval(&c, t).unwrap(), Execution::Parallel)
            .unwrap();
        for _ in 0..50 {
            let t = [rng.random(), rng.random()];
            assert!((bf.eval(&cf, t).unwrap() - bc.eval(&c, t).unwrap()).abs() < 1e-12);
        }
    }
}

fn rank(m: &nalgebra::DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let tol = 1e-10 * sv.max().max(1.0);
    sv.iter().filter(|&&s| s > tol).count()
}

#[test]
fn hb_and_thb_extractions_share_row_spans() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let m = random_mesh(&mut rng, 2, 2, AdmissibleKind::H, 5);
    let hb = HierBasis::new(&m, Flavor::Hb).unwrap();
    let thb = HierBasis::new(&m, Flavor::Thb).unwrap();
    assert_eq!(hb.ids(), thb.ids());
    for id in 0..m.num_elements() {
        let (a, b) = (hb.extraction(id), thb.extraction(id));
        let to_mat = |e: &Extraction| nalgebra::DMatrix::from_fn(e.rows(), e.cols(), |r, c| e.entry(r, c));
        let (ma, mb) = (to_mat(&a), to_mat(&b));
        let joint = nalgebra::DMatrix::from_fn(a.rows(), a.cols() + b.cols(), |r, c| {
            if c < a.cols() {
                ma[(r, c)]
            } else {
                mb[(r, c - a.cols())]
            }
        });
        let ra = rank(&ma);
        assert_eq!(ra, rank(&mb));
        assert_eq!(ra, rank(&joint));
    }
}

#[test]
fn level_span_and_neighbor_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for trial in 0..9 {
        let mu = 2 + trial % 3;
        let kind = if trial % 2 == 0 { AdmissibleKind::H } else { AdmissibleKind::T };
        let flavor = if kind == AdmissibleKind::H { Flavor::Hb } else { Flavor::Thb };
        let m = random_mesh(&mut rng, 2 + trial % 2, mu, kind, 6);
        assert!(m.is_admissible(adm(mu, kind)));
        let b = HierBasis::new(&m, flavor).unwrap();
        let spans = b.map_elements(Execution::Parallel, |_, e| b.levels_on_element(e).len());
        assert!(spans.iter().all(|&s| s <= mu));
        // adjacent (closure-touching) elements
        let cells = m.elements();
        for (i, &a) in cells.iter().enumerate() {
            let ba = m.cell_bounds(a);
            for &c in &cells[i + 1..] {
                let bc = m.cell_bounds(c);
                let touch = (0..2).all(|k| ba[k].0 <= bc[k].1 && bc[k].0 <= ba[k].1);
                if touch {
                    assert!(a.level().abs_diff(c.level()) < mu);
                }
            }
        }
    }
}

#[test]
fn figure_twelve_counts() {
    let s = seq2(1, 2, 1);
    let start = HierMesh::from_deactivated(s, &[Cell::new(0, [0, 0])]).unwrap();
    assert_eq!(start.num_elements(), 7);
    for (kind, expected) in [(AdmissibleKind::H, [19, 31, 43]), (AdmissibleKind::T, [10, 13, 16])] {
        let a = adm(2, kind);
        let mut m = start.clone();
        for &e in &expected {
            let corner = m.elements().iter().copied().filter(|c| c.index == [0, 0]).max().unwrap();
            m = m.refine(&[corner], a).unwrap();
            assert!(m.is_admissible(a));
            assert_eq!(m.num_elements(), e, "{kind}");
        }
    }
}

#[test]
fn refine_output_is_admissible_and_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..10 {
        let mu = 2 + trial % 3;
        let kind = if trial % 2 == 0 { AdmissibleKind::H } else { AdmissibleKind::T };
        let a = adm(mu, kind);
        let m = random_mesh(&mut rng, 2, mu, kind, 4);
        let n = m.num_elements();
        let marked: Vec<_> = (0..3).map(|_| m.element(rng.random_range(0..n))).collect();
        let r1 = m.refine(&marked, a).unwrap();
        let mut rev = marked.clone();
        rev.reverse();
        let r2 = m.refine(&rev, a).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.is_admissible(a));
        for c in &marked {
            assert!(r1.is_deactivated(*c));
        }
        // overlay bound
        let other = random_mesh(&mut rng, 2, mu, kind, 4);
        let o = r1.overlay(&other).unwrap();
        assert!(o.num_elements() + r1.initial_elements() <= r1.num_elements() + other.num_elements());
        assert!(o.is_admissible(a));
    }
}

#[test]
fn tensor_space_helpers_are_consistent() {
    let levels = seq2(2, 4, 1);
    let s: &TensorSpace<2> = levels.base();
    let t = [0.3, 0.8];
    let e = s.find_element(t).unwrap();
    let vals = s.local_values(e, t);
    assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-14);
}
