#![allow(dead_code)]

use std::sync::Arc;

use higa::fem::{EllipticProblem, FemSpace};
use higa::geometry::NurbsGeometry;
use higa::hier::{Admissibility, AdmissibleKind, Flavor, HierBasis, HierMesh, LevelSequence};
use higa::Execution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn seq(p: usize, n: usize, m: usize) -> Arc<LevelSequence<2>> {
    Arc::new(LevelSequence::uniform([p, p], [n, n], m).unwrap())
}

pub fn identity() -> Arc<NurbsGeometry<2>> {
    Arc::new(NurbsGeometry::identity())
}

pub fn fem_space(mesh: &HierMesh<2>, flavor: Flavor, geom: Arc<NurbsGeometry<2>>) -> FemSpace {
    FemSpace::new(HierBasis::new(mesh, flavor).unwrap(), geom, Execution::Parallel)
}

pub fn adm(mu: usize, kind: AdmissibleKind) -> Admissibility {
    Admissibility::new(mu, kind).unwrap()
}

/// Admissible mesh grown by `steps` rounds of 1-3 random marks.
pub fn random_mesh(
    rng: &mut ChaCha8Rng,
    levels: Arc<LevelSequence<2>>,
    a: Admissibility,
    steps: usize,
) -> HierMesh<2> {
    let mut m = HierMesh::new(levels);
    for _ in 0..steps {
        let n = m.num_elements();
        let k = rng.random_range(1..=3.min(n));
        let marked: Vec<_> = (0..k).map(|_| m.element(rng.random_range(0..n))).collect();
        m = m.refine(&marked, a).unwrap();
    }
    m
}

/// `u = x(1-x)y(1-y)` on the unit square, a biquadratic polynomial.
pub fn bubble_problem() -> EllipticProblem {
    EllipticProblem::poisson(|x| 2.0 * (x[0] * (1.0 - x[0]) + x[1] * (1.0 - x[1]))).with_exact(
        |x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]),
        |x| [(1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]), x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1])],
    )
}

/// `u = sin(pi x) sin(pi y)`.
pub fn sine_problem() -> EllipticProblem {
    use std::f64::consts::PI;
    EllipticProblem::poisson(|x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()).with_exact(
        |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
        |x| [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()],
    )
}

/// Parametric preimage of `x` under the quarter annulus: the radius gives
/// `t_0` directly, the angle is inverted by bisection.
pub fn annulus_preimage(g: &NurbsGeometry<2>, x: [f64; 2]) -> [f64; 2] {
    let r = x[0].hypot(x[1]);
    let theta = x[1].atan2(x[0]);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let p = g.map([0.5, mid]).unwrap();
        if p[1].atan2(p[0]) < theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    [(r - 1.0).clamp(0.0, 1.0), 0.5 * (lo + hi)]
}

/// Manufactured problem on the quarter annulus whose solution is the
/// parametric bubble `s(t) = t0(1-t0)t1(1-t1)` pulled to the physical
/// domain; `f = -Δu` follows from the chain rule with derivatives of `F`.
pub fn annulus_bubble_problem() -> EllipticProblem {
    let g = Arc::new(NurbsGeometry::quarter_annulus());
    let s = |t: [f64; 2]| t[0] * (1.0 - t[0]) * t[1] * (1.0 - t[1]);
    let ds = |t: [f64; 2]| [(1.0 - 2.0 * t[0]) * t[1] * (1.0 - t[1]), t[0] * (1.0 - t[0]) * (1.0 - 2.0 * t[1])];
    let dds = |t: [f64; 2]| {
        [
            [-2.0 * t[1] * (1.0 - t[1]), (1.0 - 2.0 * t[0]) * (1.0 - 2.0 * t[1])],
            [(1.0 - 2.0 * t[0]) * (1.0 - 2.0 * t[1]), -2.0 * t[0] * (1.0 - t[0])],
        ]
    };
    // gradient: J^T grad_x u = grad_t s
    let grad_x = move |g: &NurbsGeometry<2>, t: [f64; 2]| {
        let j = g.jacobian(t).unwrap();
        let d = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let gt = ds(t);
        [(j[1][1] * gt[0] - j[1][0] * gt[1]) / d, (-j[0][1] * gt[0] + j[0][0] * gt[1]) / d]
    };
    let (g1, g2, g3) = (g.clone(), g.clone(), g.clone());
    EllipticProblem::poisson(move |x| {
        let t = annulus_preimage(&g1, x);
        let p = g1.eval(t, 2).unwrap();
        let gx = grad_x(&g1, t);
        // d²s/dt_a dt_b = sum_ij H_ij J_ia J_jb + sum_i g_i d²F_i/dt_a dt_b
        let mut rhs = dds(t);
        for a in 0..2 {
            for b in 0..2 {
                rhs[a][b] -= gx[0] * p.hessian[0][a][b] + gx[1] * p.hessian[1][a][b];
            }
        }
        // solve J^T H J = rhs for H and return -trace(H)
        let j = p.jacobian;
        let d = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let ji = [[j[1][1] / d, -j[0][1] / d], [-j[1][0] / d, j[0][0] / d]];
        let mut tr = 0.0;
        for i in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    tr += ji[a][i] * rhs[a][b] * ji[b][i];
                }
            }
        }
        -tr
    })
    .with_exact(
        move |x| s(annulus_preimage(&g2, x)),
        move |x| grad_x(&g3, annulus_preimage(&g3, x)),
    )
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
