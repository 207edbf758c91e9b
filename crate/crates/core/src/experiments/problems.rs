//! Manufactured Poisson problems on the unit square.

use std::f64::consts::PI;

use crate::fem::EllipticProblem;

/// `u = x^alpha (1-x) y^beta (1-y)`, singular along the edges `x = 0` and
/// `y = 0` for non-integer exponents.
pub fn edge_singularity(alpha: f64, beta: f64) -> EllipticProblem {
    // g(s) = s^e (1 - s) and its first two derivatives
    let g = |s: f64, e: f64| s.powf(e) * (1.0 - s);
    let dg = |s: f64, e: f64| e * s.powf(e - 1.0) - (e + 1.0) * s.powf(e);
    let ddg = |s: f64, e: f64| e * (e - 1.0) * s.powf(e - 2.0) - (e + 1.0) * e * s.powf(e - 1.0);
    EllipticProblem::poisson(move |x| {
        -(ddg(x[0], alpha) * g(x[1], beta) + g(x[0], alpha) * ddg(x[1], beta))
    })
    .with_exact(
        move |x| g(x[0], alpha) * g(x[1], beta),
        move |x| [dg(x[0], alpha) * g(x[1], beta), g(x[0], alpha) * dg(x[1], beta)],
    )
}

/// `u = sin^2(pi (x-a)/(b-a)) sin(pi y)` on the strip `a <= x <= b`, zero
/// elsewhere. The solution is only `C^1` across `x = a` and `x = b`, where
/// the source jumps; both lines are declared as breaks, which assumes the
/// identity map.
pub fn sine_strip(a: f64, b: f64) -> EllipticProblem {
    let s = PI / (b - a);
    let inside = move |x: f64| (a..=b).contains(&x);
    EllipticProblem::poisson(move |x| {
        if !inside(x[0]) {
            return 0.0;
        }
        let xi = s * (x[0] - a);
        let sy = (PI * x[1]).sin();
        -2.0 * s * s * (2.0 * xi).cos() * sy + PI * PI * xi.sin().powi(2) * sy
    })
    .with_exact(
        move |x| {
            if inside(x[0]) {
                (s * (x[0] - a)).sin().powi(2) * (PI * x[1]).sin()
            } else {
                0.0
            }
        },
        move |x| {
            if !inside(x[0]) {
                return [0.0, 0.0];
            }
            let xi = s * (x[0] - a);
            [
                s * (2.0 * xi).sin() * (PI * x[1]).sin(),
                PI * xi.sin().powi(2) * (PI * x[1]).cos(),
            ]
        },
    )
    .with_breaks(0, vec![a, b])
}

/// `u = sin(pi x) sin(pi y)`.
pub fn sine() -> EllipticProblem {
    EllipticProblem::poisson(|x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()).with_exact(
        |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
        |x| [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()],
    )
}
