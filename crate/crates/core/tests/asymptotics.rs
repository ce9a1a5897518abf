use std::f64::consts::PI;

use approx::assert_relative_eq;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crlab_core::asymptotics::{
    alpha_coefficient, c_coefficient, c_coefficient_closed, c_coefficient_with_eps, default_t_samples,
    degeneration_scan, fit_expansion, i_integral, i_integral_quadrature, j_integral, sextic_identity_residual,
    ScanOptions, SexticMethod, SymmetricCubic,
};
use crlab_core::catalog::{hexagonal_torus, sphere_volume, CHART_NAMES};
use crlab_core::{fundamental_data, make_chart, ChartParams};

#[test]
fn j_recursion_holds() {
    for k in 1..=6 {
        for l in 3..=9 {
            for (tau, a) in [(3.0, 0.4), (120.0, 0.9), (5e3, 1.0)] {
                let lhs = j_integral(k, l, tau, a).unwrap();
                let rhs = (j_integral(k - 1, l - 2, tau, a).unwrap() - j_integral(k, l - 2, tau, a).unwrap()) / tau;
                assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
            }
        }
    }
}

#[test]
fn i_integral_grid_against_quadrature() {
    for (k, l) in [(1, 1), (2, 3), (3, 4), (4, 2), (5, 7)] {
        for (t, eps) in [(1e-3, 0.1), (0.05, 0.5), (0.3, 0.2), (1e-2, 0.8)] {
            let exact = i_integral(k, l, t, eps).unwrap();
            assert_relative_eq!(exact, i_integral_quadrature(k, l, t, eps), max_relative = 1e-12);
        }
    }
}

#[test]
fn i_24_has_a_log_singularity() {
    let f = |t: f64| i_integral(2, 4, t, 0.3).unwrap() + t.ln();
    let (a, b, c) = (f(1e-6), f(1e-8), f(1e-10));
    assert!((a - b).abs() < 1e-4 && (b - c).abs() < 1e-6, "{a} {b} {c}");
}

#[test]
fn c_coefficients() {
    for k in 1..=5 {
        for l in 1..2 * k {
            let c = c_coefficient(k, l).unwrap();
            assert_relative_eq!(c, c_coefficient_closed(k, l).unwrap(), max_relative = 1e-9);
            assert!((c - c_coefficient_with_eps(k, l, 0.5).unwrap()).abs() < 1e-6);
        }
    }
    assert!(c_coefficient(2, 4).is_err());
}

#[test]
fn sextic_example_and_random() {
    let mut c = SymmetricCubic::zeros(2);
    c.set(0, 0, 0, 1.0);
    assert!(c.max_asymmetry() == 0.0);
    let r = sextic_identity_residual(&c, SexticMethod::Auto).unwrap();
    assert!(r.residual.abs() < 1e-12);
    let c = SymmetricCubic::random(3, 5);
    assert!(c.max_asymmetry() < 1e-15);
    assert!(sextic_identity_residual(&c, SexticMethod::Quadrature).unwrap().residual.abs() < 1e-10);
}

#[test]
fn fit_recovers_synthetic_coefficients() {
    let ts = default_t_samples();
    assert_eq!(ts.len(), 12);
    assert!(ts.windows(2).all(|w| w[0] > w[1]));
    let v: Vec<f64> = ts.iter().map(|t| 3.0 + 2.0 * t * (-t.ln()) - 0.5 * t).collect();
    let (c, res, basis) = fit_expansion(&ts, &v, 2).unwrap();
    assert_eq!(basis, ["1", "t(-log t)", "t"]);
    for (got, want) in c.iter().zip([3.0, 2.0, -0.5]) {
        assert!((got - want).abs() < 1e-8, "{c:?}");
    }
    assert!(res < 1e-12);
    let v: Vec<f64> = ts.iter().map(|t| 1.0 - 4.0 * t).collect();
    let (c, _, _) = fit_expansion(&ts, &v, 3).unwrap();
    assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] + 4.0).abs() < 1e-9);
    assert!(fit_expansion(&ts[..2], &v[..2], 2).is_err());
}

#[test]
fn alpha_on_the_hexagonal_torus() {
    let d = fundamental_data(&hexagonal_torus(2).unwrap(), &[0.3, 0.1]).unwrap();
    assert_relative_eq!(d.u_norm_sq(), 2.0, max_relative = 1e-12);
    assert_relative_eq!(alpha_coefficient(&d), 16.0 / 9.0, max_relative = 1e-12);
}

#[test]
fn leading_term_is_the_sphere_volume() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let ts: Vec<f64> = default_t_samples().into_iter().step_by(3).collect();
    let opts = ScanOptions::default();
    for name in CHART_NAMES {
        let chart = make_chart(name, &ChartParams::default()).unwrap();
        for _ in 0..3 {
            let u: Vec<f64> = chart
                .axes()
                .iter()
                .map(|a| a.lo + a.length() * if a.periodic { rng.random::<f64>() } else { rng.random_range(0.2..0.8) })
                .collect();
            let fit = degeneration_scan(&chart, &u, &ts, &opts).unwrap();
            let target = sphere_volume(chart.m());
            assert!((fit.c0() - target).abs() <= 1e-3, "{name} at {u:?}: c0 = {}", fit.c0());
        }
    }
    assert_relative_eq!(sphere_volume(1), 2.0 * PI, max_relative = 1e-15);
}
