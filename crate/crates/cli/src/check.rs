//! Quick deterministic self-checks of the library, seeded.

use std::sync::Arc;

use higa::adapt::{dorfler_mark, edge_fragments, MarkParams};
use higa::experiments::refine_demo;
use higa::fem::{FemSpace, SolverOptions};
use higa::geometry::NurbsGeometry;
use higa::hier::{Admissibility, AdmissibleKind, Flavor, HierBasis, HierMesh, LevelSequence};
use higa::spline::KnotVector;
use higa::{Dyadic, Execution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct CheckResult {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

type Check = fn(&mut ChaCha8Rng) -> Result<(), String>;

pub fn run_checks(seed: u64) -> Vec<CheckResult> {
    let checks: [(&'static str, Check); 7] = [
        ("b-spline partition of unity", partition_of_unity),
        ("admissible refinement", admissible_refinement),
        ("thb partition of unity", thb_partition_of_unity),
        ("quasi-interpolant reproduces splines", quasi_interpolant),
        ("hb and thb galerkin solutions agree", flavors_agree),
        ("dorfler marking is minimal", dorfler_minimal),
        ("edge fragments cover interior edges twice", fragments),
    ];
    let mut out: Vec<CheckResult> = checks
        .iter()
        .enumerate()
        .map(|(k, (name, f))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            CheckResult { name, outcome: f(&mut rng) }
        })
        .collect();
    out.push(CheckResult {
        name: "t-admissible corner refinement adds three elements per step",
        outcome: corner_demo(),
    });
    out
}

fn random_knots(rng: &mut ChaCha8Rng, p: usize) -> KnotVector {
    let level = rng.random_range(1..=4u32);
    let mut bps = vec![Dyadic::ZERO];
    let mut mults = vec![p + 1];
    for k in 1..(1i64 << level) {
        if rng.random_bool(0.6) {
            bps.push(Dyadic::new(k, level));
            mults.push(rng.random_range(1..=p));
        }
    }
    bps.push(Dyadic::ONE);
    mults.push(p + 1);
    KnotVector::new(p, bps, mults).expect("valid knot vector")
}

fn partition_of_unity(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for p in 1..=5 {
        let kv = random_knots(rng, p);
        for _ in 0..200 {
            let x: f64 = rng.random();
            let (_, vals) = kv.eval_nonzero_basis(x).map_err(|e| e.to_string())?;
            let s: f64 = vals.iter().sum();
            if (s - 1.0).abs() > 1e-13 || vals.iter().any(|&v| v < -1e-14) {
                return Err(format!("p = {p}, x = {x}: values {vals:?}"));
            }
        }
    }
    Ok(())
}

fn random_mesh(rng: &mut ChaCha8Rng, p: usize, adm: Admissibility, steps: usize) -> HierMesh<2> {
    let levels = Arc::new(LevelSequence::uniform([p, p], [2, 2], 1).expect("valid levels"));
    let mut m = HierMesh::new(levels);
    for _ in 0..steps {
        let n = m.num_elements();
        let marked: Vec<_> = (0..rng.random_range(1..=3.min(n)))
            .map(|_| m.element(rng.random_range(0..n)))
            .collect();
        m = m.refine(&marked, adm).expect("refinement within level cap");
    }
    m
}

fn random_adm(rng: &mut ChaCha8Rng) -> Admissibility {
    let kind = if rng.random() { AdmissibleKind::H } else { AdmissibleKind::T };
    Admissibility::new(rng.random_range(2..=4), kind).expect("valid class")
}

fn admissible_refinement(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for trial in 0..20 {
        let adm = random_adm(rng);
        let p = rng.random_range(2..=4);
        let m = random_mesh(rng, p, adm, 6);
        if let Some(c) = m.check_admissible(adm) {
            return Err(format!("trial {trial}: mesh not admissible near {c:?}"));
        }
    }
    Ok(())
}

fn thb_partition_of_unity(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for trial in 0..10 {
        let adm = random_adm(rng);
        let p = rng.random_range(2..=4);
        let m = random_mesh(rng, p, adm, 5);
        let b = HierBasis::new(&m, Flavor::Thb).map_err(|e| e.to_string())?;
        for _ in 0..50 {
            let t = [rng.random(), rng.random()];
            let v = b.eval(&vec![1.0; b.len()], t).map_err(|e| e.to_string())?;
            if (v - 1.0).abs() > 1e-12 {
                return Err(format!("trial {trial}: sum {v} at {t:?}"));
            }
        }
    }
    Ok(())
}

fn quasi_interpolant(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for trial in 0..5 {
        let (p, adm) = (rng.random_range(2..=3), random_adm(rng));
        let m = random_mesh(rng, p, adm, 4);
        let b = HierBasis::new(&m, Flavor::Thb).map_err(|e| e.to_string())?;
        let coeffs: Vec<f64> = (0..b.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let qi = b
            .quasi_interpolant(|t| b.eval(&coeffs, t).expect("inside domain"), Execution::Parallel)
            .map_err(|e| e.to_string())?;
        let worst = qi.iter().zip(&coeffs).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        if worst > 1e-10 {
            return Err(format!("trial {trial}: coefficient error {worst:e}"));
        }
    }
    Ok(())
}

fn flavors_agree(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let problem = higa::experiments::problems::sine();
    let geom = Arc::new(NurbsGeometry::identity());
    let opts = SolverOptions {
        tolerance: 1e-13,
        ..Default::default()
    };
    for trial in 0..3 {
        let kind = if trial % 2 == 0 { AdmissibleKind::H } else { AdmissibleKind::T };
        let m = random_mesh(rng, 2, Admissibility::new(2, kind).expect("valid class"), 6);
        let mut sols = Vec::new();
        for flavor in [Flavor::Hb, Flavor::Thb] {
            let b = HierBasis::new(&m, flavor).map_err(|e| e.to_string())?;
            let s = FemSpace::new(b, geom.clone(), Execution::Parallel);
            let u = s
                .solve(&problem, &opts, None, Execution::Parallel)
                .map_err(|e| e.to_string())?;
            sols.push((s, u.coeffs));
        }
        for _ in 0..50 {
            let t = [rng.random(), rng.random()];
            let a = sols[0].0.basis().eval(&sols[0].1, t).map_err(|e| e.to_string())?;
            let b = sols[1].0.basis().eval(&sols[1].1, t).map_err(|e| e.to_string())?;
            if (a - b).abs() > 1e-8 {
                return Err(format!("trial {trial}: {a} vs {b} at {t:?}"));
            }
        }
    }
    Ok(())
}

fn dorfler_minimal(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..100 {
        let n = rng.random_range(1..=10);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(0..16) as f64).collect();
        let theta = [0.25, 0.5, 0.75, 1.0][rng.random_range(0..4)];
        let marked = dorfler_mark(&values, MarkParams::new(theta, 1.0).expect("valid")).map_err(|e| e.to_string())?;
        let total: f64 = values.iter().sum();
        let best = (0u32..1 << n)
            .filter(|mask| {
                let s: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| values[i]).sum();
                s >= theta * total
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
            .unwrap_or(0);
        if marked.len() != best {
            return Err(format!("{values:?}, theta {theta}: marked {} but {best} suffice", marked.len()));
        }
    }
    Ok(())
}

fn fragments(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for trial in 0..10 {
        let adm = random_adm(rng);
        let m = random_mesh(rng, 2, adm, 6);
        let mut total = 0.0;
        let mut perimeter = 0.0;
        for id in 0..m.num_elements() {
            let b = m.cell_bounds(m.element(id));
            perimeter += 2.0 * (b[0].1 - b[0].0 + b[1].1 - b[1].0);
            total += edge_fragments(&m, id).iter().map(|f| f.length()).sum::<f64>();
        }
        if (total - (perimeter - 4.0)).abs() > 1e-12 {
            return Err(format!("trial {trial}: fragments {total} vs interior edges {}", perimeter - 4.0));
        }
    }
    Ok(())
}

fn corner_demo() -> Result<(), String> {
    let (_, steps) = refine_demo(AdmissibleKind::T, 2, 1, 3, None).map_err(|e| e.to_string())?;
    let counts: Vec<usize> = steps.iter().map(|s| s.n_elements).collect();
    if counts != [10, 13, 16] || steps.iter().any(|s| s.refined != [s.marked]) {
        return Err(format!("element counts {counts:?}"));
    }
    Ok(())
}
