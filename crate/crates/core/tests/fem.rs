mod common;

use std::sync::Arc;

use common::*;
use higa::fem::{EllipticProblem, SolverKind, SolverOptions};
use higa::geometry::NurbsGeometry;
use higa::hier::{AdmissibleKind, Flavor, HierMesh};
use higa::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXEC: Execution = Execution::Parallel;

#[test]
fn tensor_grid_free_dofs() {
    let mesh = HierMesh::new(seq(2, 4, 1));
    let s = fem_space(&mesh, Flavor::Thb, identity());
    assert_eq!(s.basis().len(), 36);
    assert_eq!(s.num_free(), 16);
    let fine = fem_space(&mesh.refine_uniform(), Flavor::Hb, identity());
    assert_eq!(fine.basis().len(), 100);
    assert_eq!(fine.num_free(), 64);
}

#[test]
fn dropped_functions_touch_the_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (p, kind, flavor) in [
        (2, AdmissibleKind::T, Flavor::Thb),
        (3, AdmissibleKind::H, Flavor::Hb),
        (2, AdmissibleKind::H, Flavor::Thb),
    ] {
        let mesh = random_mesh(&mut rng, seq(p, 2, 1), adm(2, kind), 8);
        let s = fem_space(&mesh, flavor, identity());
        let n = s.basis().len();
        let boundary: Vec<[f64; 2]> = (0..200)
            .map(|k| {
                let u = (k / 4) as f64 / 50.0 + 0.01;
                match k % 4 {
                    0 => [0.0, u],
                    1 => [1.0, u],
                    2 => [u, 0.0],
                    _ => [u, 1.0],
                }
            })
            .collect();
        for d in 0..n {
            let mut c = vec![0.0; n];
            c[d] = 1.0;
            let max = boundary
                .iter()
                .map(|&t| s.basis().eval(&c, t).unwrap().abs())
                .fold(0.0, f64::max);
            if s.equation(d).is_some() {
                assert!(max <= 1e-13, "kept function {d} is {max} on the boundary");
            } else {
                assert!(max > 0.0, "dropped function {d} vanishes on the boundary");
            }
        }
    }
}

#[test]
fn bilinear_center_stiffness() {
    // a Q1 hat on four unit-area-scaled squares: each element contributes
    // (1/3)(1 + 1) = 2/3 to the diagonal, independent of the element size
    let hand = 4.0 * (2.0 / 3.0);
    let mesh = HierMesh::new(seq(1, 2, 1));
    let s = fem_space(&mesh, Flavor::Thb, identity());
    assert_eq!(s.num_free(), 1);
    let sys = s.assemble(&EllipticProblem::poisson(|_| 0.0), EXEC).unwrap();
    assert!((sys.matrix.get(0, 0) - hand).abs() < 1e-14);
}

#[test]
fn representable_solutions_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = SolverOptions::default();
    for flavor in [Flavor::Thb, Flavor::Hb] {
        let mesh = random_mesh(&mut rng, seq(2, 2, 1), adm(2, AdmissibleKind::T), 6);
        let s = fem_space(&mesh, flavor, identity());
        let problem = bubble_problem();
        let sol = s.solve(&problem, &opts, None, EXEC).unwrap();
        let err = s.error_norms(&problem, &sol.coeffs, EXEC).unwrap();
        assert!(err.h1_semi < 1e-9 && err.l2 < 1e-9, "{err:?}");
        // the discrete solution satisfies the system it was solved from
        let sys = s.assemble(&problem, EXEC).unwrap();
        let x = s.restrict(&sol.coeffs);
        let mut kx = vec![0.0; x.len()];
        sys.matrix.mul_vec(&x, &mut kx);
        let scale = sys.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in kx.iter().zip(&sys.rhs) {
            assert!((a - b).abs() < 1e-8 * scale, "{a} {b}");
        }
        // truncated bases are a partition of unity, so the quasi-interpolant
        // reproduces the bubble and gives the same coefficients
        if flavor == Flavor::Thb {
            let exact = s
                .basis()
                .quasi_interpolant(|t| t[0] * (1.0 - t[0]) * t[1] * (1.0 - t[1]), EXEC)
                .unwrap();
            for (a, b) in exact.iter().zip(&sol.coeffs) {
                assert!((a - b).abs() < 1e-9, "{a} {b}");
            }
        }
    }
}

#[test]
fn annulus_bubble_is_recovered() {
    let geom = Arc::new(NurbsGeometry::quarter_annulus());
    let mesh = HierMesh::new(seq(2, 2, 1)).refine_uniform();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = mesh.num_elements();
    let marked: Vec<_> = (0..3).map(|_| mesh.element(rng.random_range(0..n))).collect();
    let mesh = mesh.refine(&marked, adm(2, AdmissibleKind::T)).unwrap();
    let s = fem_space(&mesh, Flavor::Thb, geom);
    let problem = annulus_bubble_problem();
    let sol = s.solve(&problem, &SolverOptions::default(), None, EXEC).unwrap();
    let err = s.error_norms(&problem, &sol.coeffs, EXEC).unwrap();
    assert!(err.h1_semi < 1e-9, "{err:?}");
}

#[test]
fn error_of_zero_against_linear_function() {
    let mesh = HierMesh::new(seq(2, 4, 1));
    let s = fem_space(&mesh, Flavor::Thb, identity());
    let problem = EllipticProblem::poisson(|_| 0.0).with_exact(|x| x[0], |_| [1.0, 0.0]);
    let err = s.error_norms(&problem, &vec![0.0; s.basis().len()], EXEC).unwrap();
    assert!((err.h1_semi - 1.0).abs() < 1e-14);
    assert!((err.l2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
}

#[test]
fn error_quadrature_agrees_with_overkill_rule() {
    let mesh = HierMesh::new(seq(3, 16, 1));
    let s = fem_space(&mesh, Flavor::Thb, identity());
    let problem = sine_problem();
    let sol = s.solve(&problem, &SolverOptions::default(), None, EXEC).unwrap();
    let e = s.error_norms(&problem, &sol.coeffs, EXEC).unwrap();
    let over = s.clone().with_quadrature(3 + 5).unwrap();
    let e2 = over.error_norms(&problem, &sol.coeffs, EXEC).unwrap();
    assert!((e.h1_semi - e2.h1_semi).abs() <= 1e-8 * e2.h1_semi, "{e:?} {e2:?}");
}

#[test]
fn flavors_give_the_same_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let problem = sine_problem();
    for kind in [AdmissibleKind::H, AdmissibleKind::T] {
        let mesh = random_mesh(&mut rng, seq(2, 2, 1), adm(2, kind), 10);
        let a = fem_space(&mesh, Flavor::Hb, identity());
        let b = fem_space(&mesh, Flavor::Thb, identity());
        assert_eq!(a.num_free(), b.num_free());
        let opts = SolverOptions { tolerance: 1e-13, ..Default::default() };
        let ua = a.solve(&problem, &opts, None, EXEC).unwrap();
        let ub = b.solve(&problem, &opts, None, EXEC).unwrap();
        for _ in 0..100 {
            let t = [rng.random(), rng.random()];
            let va = a.basis().eval(&ua.coeffs, t).unwrap();
            let vb = b.basis().eval(&ub.coeffs, t).unwrap();
            assert!((va - vb).abs() < 1e-8);
        }
    }
}

#[test]
fn stiffness_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mesh = random_mesh(&mut rng, seq(3, 2, 2), adm(3, AdmissibleKind::T), 8);
    let s = fem_space(&mesh, Flavor::Thb, Arc::new(NurbsGeometry::quarter_annulus()));
    let sys = s.assemble(&sine_problem(), EXEC).unwrap();
    assert!(sys.symmetric);
    assert!(sys.matrix.asymmetry() <= 1e-12 * sys.matrix.max_abs());
}

#[test]
fn assembly_does_not_depend_on_threads() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mesh = random_mesh(&mut rng, seq(2, 4, 1), adm(2, AdmissibleKind::T), 12);
    let s = fem_space(&mesh, Flavor::Thb, identity());
    let p = sine_problem();
    let a = s.assemble(&p, Execution::Sequential).unwrap();
    let b = s.assemble(&p, Execution::Parallel).unwrap();
    assert_eq!(a.matrix, b.matrix);
    assert_eq!(a.rhs, b.rhs);
}

#[test]
fn nonsymmetric_problem_with_direct_solver() {
    // u = x(1-x)y(1-y), -Δu + b.grad u + c u with b = (1, 1/2), c = 1
    let b = [1.0, 0.5];
    let u = |x: [f64; 2]| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
    let du = |x: [f64; 2]| [(1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]), x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1])];
    let problem = EllipticProblem::poisson(move |x| {
        let g = du(x);
        2.0 * (x[0] * (1.0 - x[0]) + x[1] * (1.0 - x[1])) + b[0] * g[0] + b[1] * g[1] + u(x)
    })
    .with_advection(move |_| b)
    .with_reaction(|_| 1.0)
    .with_exact(u, du);
    let mesh = HierMesh::new(seq(2, 2, 1)).refine(&[higa::hier::Cell::new(0, [0, 0])], adm(2, AdmissibleKind::T)).unwrap();
    let s = fem_space(&mesh, Flavor::Thb, identity());
    let sys = s.assemble(&problem, EXEC).unwrap();
    assert!(!sys.symmetric && sys.matrix.asymmetry() > 0.0);
    let opts = SolverOptions { kind: SolverKind::Auto, ..Default::default() };
    let sol = sys.solve(&s, &opts, None).unwrap();
    assert_eq!(sol.stats.iterations, 1);
    let err = s.error_norms(&problem, &sol.coeffs, EXEC).unwrap();
    assert!(err.h1_semi < 1e-9, "{err:?}");
}

#[test]
fn uniform_refinement_rate_p2() {
    let problem = sine_problem();
    let mut mesh = HierMesh::new(seq(2, 2, 1));
    let mut dofs = Vec::new();
    let mut errs = Vec::new();
    for _ in 0..6 {
        let s = fem_space(&mesh, Flavor::Thb, identity());
        let sol = s.solve(&problem, &SolverOptions::default(), None, EXEC).unwrap();
        dofs.push(s.num_free() as f64);
        errs.push(s.error_norms(&problem, &sol.coeffs, EXEC).unwrap().h1_semi);
        mesh = mesh.refine_uniform();
    }
    let slope = loglog_slope(&dofs[2..], &errs[2..]);
    assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
}

#[test]
fn matrix_dump_round_trips() {
    let mesh = HierMesh::new(seq(2, 4, 1));
    let s = fem_space(&mesh, Flavor::Thb, identity());
    let sys = s.assemble(&sine_problem(), EXEC).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.txt");
    sys.matrix.write_coordinate_file(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), sys.matrix.nnz());
    for line in text.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let (r, c, v): (usize, usize, f64) = (parts[0].parse().unwrap(), parts[1].parse().unwrap(), parts[2].parse().unwrap());
        assert_eq!(v, sys.matrix.get(r, c));
    }
}
