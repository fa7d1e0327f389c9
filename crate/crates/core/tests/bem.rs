use num_complex::Complex64;

use isoscatter::bem::{eval_potential, solve_scattering, DensitySolution, PotentialEvaluator, QuadSettings, WaveContext};
use isoscatter::geometry::builtin;
use isoscatter::mie::SoundSoftSphere;
use isoscatter::pipeline::sphere_errors;

type C = Complex64;

#[test]
fn sphere_errors_decay_at_third_order_or_better() {
    let rows: Vec<_> = (0..=2).map(|l| sphere_errors(l, 1.0).unwrap()).collect();
    assert!(rows.windows(2).all(|w| w[1].rel_error < w[0].rel_error), "{rows:?}");
    // two uniform refinements divide h by four
    let order = (rows[0].rel_error / rows[2].rel_error).log2() / 2.0;
    assert!(order >= 3.0, "{rows:?}");
    assert!(rows[2].rel_error <= 1e-3 && rows[2].dn_rel_error <= 1e-3, "{rows:?}");
}

fn helmholtz_residual(ev: &PotentialEvaluator<'_>, kappa: f64, x: [f64; 3]) -> f64 {
    let h = 1e-3;
    let u = |p: [f64; 3]| ev.potential(p).value;
    let u0 = u(x);
    let mut lap = -6.0 * u0;
    for k in 0..3 {
        for s in [-1.0, 1.0] {
            let mut p = x;
            p[k] += s * h;
            lap += u(p);
        }
    }
    ((lap / (h * h)) + kappa * kappa * u0).norm() / (kappa * kappa * u0.norm())
}

#[test]
fn cube_potential_satisfies_the_helmholtz_equation() {
    let kappa = 2.0;
    let ctx = WaveContext::new(kappa, [0.6, 0.0, 0.8]).unwrap();
    let (space, sol) = solve_scattering(&builtin::cube::<f64>(), 2, 1, &ctx, &QuadSettings::default()).unwrap();
    assert!(sol.residual <= 1e-10);
    let ev = PotentialEvaluator::new(&space, &sol, &ctx).unwrap();
    for x in [[3.0, 0.5, 0.5], [-1.5, 2.0, 0.3], [0.5, 0.5, -2.5]] {
        let r = helmholtz_residual(&ev, kappa, x);
        assert!(r <= 1e-4, "{x:?}: {r}");
    }
}

#[test]
fn zero_density_radiates_nothing() {
    let ctx = WaveContext::new(1.0, [0.0, 0.0, 1.0]).unwrap();
    let (space, sol) = solve_scattering(&builtin::cube::<f64>(), 1, 0, &ctx, &QuadSettings::default()).unwrap();
    let zero = DensitySolution { coeffs: vec![C::new(0.0, 0.0); sol.coeffs.len()], ..sol };
    assert_eq!(eval_potential(&zero, &space, &ctx, [3.0, 3.0, 3.0]).unwrap().value, C::new(0.0, 0.0));
}

#[test]
fn sphere_normal_derivative_follows_the_series() {
    let ctx = WaveContext::new(1.0, [0.0, 0.0, 1.0]).unwrap();
    let mie = SoundSoftSphere::new(1.0, 1.0, [0.0, 0.0, 1.0]);
    let (space, sol) = solve_scattering(&builtin::sphere::<f64>(builtin::SPHERE_SPANS), 2, 0, &ctx, &QuadSettings::default()).unwrap();
    let ev = PotentialEvaluator::new(&space, &sol, &ctx).unwrap();
    // a tilted direction exercises all gradient components
    let n = [0.48, -0.6, 0.64];
    let x = [2.0, 1.0, -1.5];
    let got = ev.normal_derivative(x, n).value;
    let want = mie.normal_derivative(x, n);
    assert!((got - want).norm() <= 1e-2 * want.norm(), "{got} {want}");
}
