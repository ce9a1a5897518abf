//! Self-checking suites: closed forms against independent quadrature, and
//! catalog charts against their known invariants.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    c_coefficient, c_coefficient_closed, c_coefficient_with_eps, i_integral, i_integral_quadrature, j_integral,
    j_integral_quadrature, sextic_identity_residual, SexticMethod, SexticResult, SymmetricCubic,
};
use crate::catalog::{expected_invariants, make_chart, ChartParams};
use crate::error::Result;
use crate::functionals::energies;
use crate::immersion::{beta_curl, fundamental_data, horizontality_residual, scalar_curvature_residual};
use crate::integration::{build_grid, volume};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralCase {
    pub kind: String,
    pub k: u32,
    pub l: u32,
    /// `tau` for J cases, `t` for I cases.
    pub x: f64,
    /// `a` for J cases, `eps` for I cases.
    pub y: f64,
    pub closed_form: f64,
    pub quadrature: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub seed: u64,
    pub cases: Vec<IntegralCase>,
    pub max_rel_error: f64,
    /// max over `2k > l >= 3`, `k <= 6` of both C recursions' residuals.
    pub recursion_residual: f64,
    pub c_3_4: f64,
    pub ratio_c47_c45: f64,
    /// max |C(eps = 0.1) - C(eps = 0.5)|.
    pub eps_dependence: f64,
    /// max relative distance from the Beta closed form.
    pub beta_mismatch: f64,
}

/// `cases` random J cases and `cases` random I cases, plus the C checks.
pub fn verify_appendix(cases: usize, seed: u64) -> Result<AppendixReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * cases);
    for _ in 0..cases {
        let k = rng.random_range(0..=8u32);
        let l = rng.random_range(1..=8u32);
        let tau = 10f64.powf(rng.random_range(1.0..4.0));
        let a = rng.random_range(0.3..1.0);
        let c = j_integral(k, l, tau, a)?;
        let q = j_integral_quadrature(k, l, tau, a);
        out.push(IntegralCase { kind: "J".into(), k, l, x: tau, y: a, closed_form: c, quadrature: q, rel_error: rel(c, q) });
    }
    for _ in 0..cases {
        let k = rng.random_range(1..=8u32);
        let l = rng.random_range(1..=8u32);
        let t = 10f64.powf(rng.random_range(-3.0..-0.3));
        let eps = rng.random_range(0.05..0.9);
        let c = i_integral(k, l, t, eps)?;
        let q = i_integral_quadrature(k, l, t, eps);
        out.push(IntegralCase { kind: "I".into(), k, l, x: t, y: eps, closed_form: c, quadrature: q, rel_error: rel(c, q) });
    }
    let mut recursion_residual = 0.0f64;
    let mut eps_dependence = 0.0f64;
    let mut beta_mismatch = 0.0f64;
    for k in 1..=6u32 {
        for l in 1..2 * k {
            let c = c_coefficient(k, l)?;
            eps_dependence = eps_dependence.max((c - c_coefficient_with_eps(k, l, 0.5)?).abs());
            beta_mismatch = beta_mismatch.max(rel(c, c_coefficient_closed(k, l)?));
            if l >= 3 {
                let sub = c_coefficient(k - 1, l - 2)? - c_coefficient(k, l - 2)?;
                let ratio = (l - 2) as f64 / (2.0 * (k - 1) as f64) * c_coefficient(k - 1, l - 2)?;
                recursion_residual = recursion_residual.max((c - sub).abs()).max((c - ratio).abs());
            }
        }
    }
    Ok(AppendixReport {
        seed,
        max_rel_error: out.iter().map(|c| c.rel_error).fold(0.0, f64::max),
        cases: out,
        recursion_residual,
        c_3_4: c_coefficient(3, 4)?,
        ratio_c47_c45: c_coefficient(4, 7)? / c_coefficient(4, 5)?,
        eps_dependence,
        beta_mismatch,
    })
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// The identity on the example of `C_{111} = 1` (m = 2) and random
/// symmetric forms of dimension 1 through 5.
pub fn verify_sextic(seed: u64) -> Result<Vec<SexticResult>> {
    let mut out = Vec::new();
    let mut c = SymmetricCubic::zeros(2);
    c.set(0, 0, 0, 1.0);
    out.push(sextic_identity_residual(&c, SexticMethod::Quadrature)?);
    for m in 1..=5 {
        let c = SymmetricCubic::random(m, seed.wrapping_add(m as u64));
        let method = if m <= 3 {
            SexticMethod::Quadrature
        } else {
            SexticMethod::MonteCarlo { samples: crate::asymptotics::SEXTIC_MC_SAMPLES, seed }
        };
        out.push(sextic_identity_residual(&c, method)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartCheck {
    pub chart: String,
    pub volume: f64,
    pub expected_volume: Option<f64>,
    pub w_cr: Option<f64>,
    pub expected_w_cr: Option<f64>,
    pub horizontality: f64,
    pub reeb_component: f64,
    pub sigma_asymmetry: f64,
    pub trace_residual: f64,
    pub u_identity_residual: f64,
    pub pythagoras_residual: f64,
    pub beta_curl: f64,
    pub scalar_curvature_residual: f64,
    pub passed: bool,
}

/// Tolerances of [`verify_identities`].
pub const VOLUME_TOL: f64 = 1e-6;
pub const POINTWISE_TOL: f64 = 1e-8;
pub const CURVATURE_TOL: f64 = 1e-4;

/// Checks each default catalog chart at `samples` seeded points.
pub fn verify_identities(samples: usize, seed: u64, res: Option<usize>) -> Result<Vec<ChartCheck>> {
    let names = ["geodesic_sphere", "whitney_sphere", "hexagonal_torus", "horizontal_circle", "perturbed_torus", "legendrian_torus"];
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for name in names {
        let params = ChartParams::default();
        let chart = make_chart(name, &params)?;
        let expected = expected_invariants(name, &params)?;
        let grid = build_grid(&chart, res)?;
        let vol = volume(&chart, &grid)?;
        let w_cr = if chart.m() == 2 { energies(&chart, &grid, expected.genus)?.w_cr } else { None };
        let horizontality = horizontality_residual(&chart, grid.nodes())?;
        let mut check = ChartCheck {
            chart: chart.name().to_string(),
            volume: vol,
            expected_volume: expected.volume,
            w_cr,
            expected_w_cr: expected.w_cr,
            horizontality,
            reeb_component: 0.0,
            sigma_asymmetry: 0.0,
            trace_residual: 0.0,
            u_identity_residual: 0.0,
            pythagoras_residual: 0.0,
            beta_curl: 0.0,
            scalar_curvature_residual: 0.0,
            passed: false,
        };
        for _ in 0..samples {
            // stay away from coordinate poles of closed axes
            let u: Vec<f64> = chart
                .axes()
                .iter()
                .map(|a| a.lo + a.length() * if a.periodic { rng.random::<f64>() } else { rng.random_range(0.15..0.85) })
                .collect();
            let d = fundamental_data(&chart, &u)?;
            let m = d.m;
            check.reeb_component = check
                .reeb_component
                .max(d.h_reeb.abs())
                .max(d.a_reeb.iter().fold(0.0f64, |a, x| a.max(x.abs())));
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let s = d.sigma_at(i, j, k);
                        for t in [d.sigma_at(j, i, k), d.sigma_at(i, k, j), d.sigma_at(k, j, i)] {
                            check.sigma_asymmetry = check.sigma_asymmetry.max((s - t).abs());
                        }
                    }
                }
            }
            check.trace_residual = check.trace_residual.max(d.u_trace().max_abs()).max(d.a_hat_trace().max_abs());
            let uah = d.a_n_norm_sq() - 3.0 / (m as f64 + 2.0) * d.h_n.norm_sq();
            check.u_identity_residual = check.u_identity_residual.max((d.u_norm_sq() - uah).abs());
            let pyth_a = (d.a_norm_sq() - d.a_n_norm_sq() - d.a_nhat_norm_sq()).abs();
            let pyth_h = (d.h_norm_sq() - d.h_n.norm_sq() - d.h_nhat.norm_sq()).abs();
            check.pythagoras_residual = check.pythagoras_residual.max(pyth_a).max(pyth_h);
            if m >= 2 {
                check.beta_curl = check.beta_curl.max(beta_curl(&chart, &u)?.abs());
                check.scalar_curvature_residual =
                    check.scalar_curvature_residual.max(scalar_curvature_residual(&chart, &u)?.abs());
            }
        }
        let close = |x: f64, e: Option<f64>| e.map_or(true, |e| (x - e).abs() <= VOLUME_TOL * e.abs().max(1.0));
        check.passed = close(check.volume, check.expected_volume)
            && check.w_cr.map_or(true, |w| close(w, check.expected_w_cr))
            && check.horizontality <= POINTWISE_TOL
            && check.reeb_component <= POINTWISE_TOL
            && check.sigma_asymmetry <= POINTWISE_TOL
            && check.trace_residual <= POINTWISE_TOL
            && check.u_identity_residual <= POINTWISE_TOL
            && check.pythagoras_residual <= 1e-10
            && check.beta_curl <= CURVATURE_TOL
            && check.scalar_curvature_residual <= CURVATURE_TOL;
        out.push(check);
    }
    Ok(out)
}
