//! Global invariants: CR-volume, CR-Willmore and the `U`/`B` energies,
//! balance points, flat-torus eigenvalues and a centered-dilation lower
//! bound for the conformal volume.
//!
//! The CR-volume is a supremum over the ball of `b`; for immersed but not
//! embedded inputs it need not be attained in the interior. The optimizer
//! cannot tell a ridge running to the boundary from an interior maximum,
//! so [`CrVolumeResult::attained`] only reports that the winning start
//! converged and that its value survived a resolution doubling.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AmbientVector;
use crate::immersion::{fundamental_data, ImmersionChart};
use crate::integration::{pairwise_sum, refine_grid, QuadratureGrid, SampledSurface};
use crate::moebius::{psi_b_raw, MoebiusParam};
use crate::optimize::{clamp_to_ball, nelder_mead, NelderMeadConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrVolumeConfig {
    pub nelder_mead: NelderMeadConfig,
    pub start_radius: f64,
    pub random_starts: usize,
    pub seed: u64,
    /// Radial clamp for `|b|`.
    pub clamp_radius: f64,
    /// Candidates must agree with a doubled-resolution re-evaluation to
    /// this relative tolerance; values within it are also treated as ties.
    pub refine_tol: f64,
}

impl Default for CrVolumeConfig {
    fn default() -> Self {
        Self {
            nelder_mead: NelderMeadConfig::default(),
            start_radius: 0.5,
            random_starts: 8,
            seed: 0,
            clamp_radius: 0.999,
            refine_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub index: usize,
    pub start: Vec<f64>,
    pub b: Vec<f64>,
    pub value: f64,
    pub refined_value: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub resolved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrVolumeResult {
    pub value: f64,
    pub argmax_b: MoebiusParam,
    pub evaluations: usize,
    pub restarts: usize,
    pub winning_start: usize,
    pub attained: bool,
    pub starts: Vec<StartRecord>,
}

fn start_points(dim: usize, cfg: &CrVolumeConfig) -> Vec<Vec<f64>> {
    let mut starts = vec![vec![0.0; dim]];
    for k in 0..dim {
        for sign in [1.0, -1.0] {
            let mut x = vec![0.0; dim];
            x[k] = sign * cfg.start_radius;
            starts.push(x);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.random_starts {
        let mut x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r: f64 = cfg.start_radius * rng.random::<f64>().powf(1.0 / dim as f64);
        x.iter_mut().for_each(|v| *v *= r / norm);
        starts.push(x);
    }
    starts
}

/// `sup_b ∫ W_b^{m/2} dA` by multi-start Nelder-Mead.
pub fn cr_volume(chart: &ImmersionChart, grid: &QuadratureGrid, cfg: &CrVolumeConfig) -> Result<CrVolumeResult> {
    if !(cfg.clamp_radius > 0.0 && cfg.clamp_radius < 1.0) {
        return Err(Error::InvalidParameter("clamp radius must lie in (0, 1)".into()));
    }
    let coarse = SampledSurface::new(chart, grid)?;
    let fine = SampledSurface::new(chart, &refine_grid(chart, grid)?)?;
    let dim = 2 * chart.dim_n() + 2;
    let starts = start_points(dim, cfg);
    let clamp = cfg.clamp_radius;
    let records: Vec<StartRecord> = starts
        .par_iter()
        .enumerate()
        .map(|(index, x0)| {
            let r = nelder_mead(
                |b| -coarse.weighted_volume(b),
                |b| clamp_to_ball(b, clamp),
                x0,
                &cfg.nelder_mead,
            );
            let value = -r.value;
            let refined_value = fine.weighted_volume(&r.x);
            StartRecord {
                index,
                start: x0.clone(),
                b: r.x,
                value,
                refined_value,
                evaluations: r.evaluations,
                converged: r.converged,
                resolved: (refined_value - value).abs() <= cfg.refine_tol * refined_value.abs(),
            }
        })
        .collect();

    let any_resolved = records.iter().any(|r| r.resolved);
    let pool: Vec<&StartRecord> = records.iter().filter(|r| r.resolved || !any_resolved).collect();
    let best = pool.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
    let winner = pool
        .iter()
        .find(|r| r.value >= best - cfg.refine_tol * best.abs())
        .expect("at least one start");
    Ok(CrVolumeResult {
        value: winner.value,
        argmax_b: MoebiusParam::from_coords(winner.b.clone())?,
        evaluations: records.iter().map(|r| r.evaluations).sum(),
        restarts: records.len(),
        winning_start: winner.index,
        attained: winner.converged && winner.resolved,
        starts: records,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub volume: f64,
    /// `∫ 1 + |H^N|^2/8 + |H^N̂|^2/4` (surfaces only).
    pub w_cr: Option<f64>,
    /// `∫ 1 + |H|^2/4` (surfaces only).
    pub w_classical: Option<f64>,
    /// `(1/m) ∫ |U|^m`.
    pub u_cr: f64,
    /// `(1/m) ∫ |Å|^m`.
    pub b_cr: f64,
    pub genus: Option<u32>,
    /// `W_CR - U_CR - B_CR - 4 pi (1 - genus)`.
    pub gauss_bonnet_residual: Option<f64>,
}

pub fn energies(chart: &ImmersionChart, grid: &QuadratureGrid, genus: Option<u32>) -> Result<EnergyReport> {
    let m = chart.m();
    let mf = m as f64;
    let terms: Vec<[f64; 5]> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let d = fundamental_data(chart, grid.node(k))?;
            let a = grid.weights()[k] * d.sqrt_det;
            let u = d.u_norm_sq().max(0.0).powf(mf / 2.0) / mf;
            let b = d.a_hat_traceless_norm_sq().max(0.0).powf(mf / 2.0) / mf;
            let w_cr = 1.0 + d.h_n.norm_sq() / 8.0 + d.h_nhat.norm_sq() / 4.0;
            let w = 1.0 + d.h_norm_sq() / 4.0;
            Ok([a, a * w_cr, a * w, a * u, a * b])
        })
        .collect::<Result<Vec<_>>>()?;
    let total = |i: usize| pairwise_sum(&terms.iter().map(|t| t[i]).collect::<Vec<_>>());
    let (volume, w_cr, w, u_cr, b_cr) = (total(0), total(1), total(2), total(3), total(4));
    let surface = m == 2;
    let w_cr = surface.then_some(w_cr);
    let gauss_bonnet_residual = match (w_cr, genus) {
        (Some(w), Some(g)) => Some(w - u_cr - b_cr - 4.0 * std::f64::consts::PI * (1.0 - g as f64)),
        _ => None,
    };
    Ok(EnergyReport {
        volume,
        w_cr,
        w_classical: surface.then_some(w),
        u_cr,
        b_cr,
        genus,
        gauss_bonnet_residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceResult {
    pub b: MoebiusParam,
    pub residual: f64,
    pub iterations: usize,
    pub method: String,
}

/// Target for `|B(b)|`.
pub const BALANCE_TOL: f64 = 1e-8;

/// Area-weighted mean of `Psi_b ∘ phi` over the sample.
pub fn balance_vector(sample: &SampledSurface, b: &MoebiusParam) -> AmbientVector {
    let dim = sample.dim;
    let n = b.dim_n();
    let mut cols = vec![Vec::with_capacity(sample.len()); dim];
    for k in 0..sample.len() {
        let x = AmbientVector::new(sample.position(k).to_vec(), n).expect("sample dimension");
        let y = psi_b_raw(b, &x);
        for (c, v) in cols.iter_mut().zip(y.coords()) {
            c.push(sample.areas[k] * v);
        }
    }
    let total = sample.volume();
    let coords = cols.iter().map(|c| pairwise_sum(c) / total).collect();
    AmbientVector::new(coords, n).expect("dimension")
}

/// Solves `B(b) = 0` by the damped iteration `b <- b - B(b)/2`, falling
/// back to Newton steps with a finite-difference Jacobian.
pub fn balance_point(chart: &ImmersionChart, grid: &QuadratureGrid) -> Result<BalanceResult> {
    let sample = SampledSurface::new(chart, grid)?;
    let n = chart.dim_n();
    let mut b = MoebiusParam::zero(n);
    let mut res = balance_vector(&sample, &b);
    let mut best = (b.clone(), res.norm());
    let mut it = 0;
    while it < 400 && res.norm() > BALANCE_TOL {
        it += 1;
        let mut next = b.b() - &res.scaled(0.5);
        clamp_to_ball(next.coords_mut(), 0.99);
        b = MoebiusParam::new(next)?;
        res = balance_vector(&sample, &b);
        if res.norm() < best.1 {
            best = (b.clone(), res.norm());
        }
    }
    if best.1 <= BALANCE_TOL {
        return Ok(BalanceResult { b: best.0, residual: best.1, iterations: it, method: "damped".into() });
    }
    let (b, r, newton_its) = newton_balance(&sample, best.0)?;
    if r <= BALANCE_TOL {
        Ok(BalanceResult { b, residual: r, iterations: it + newton_its, method: "newton".into() })
    } else {
        Err(Error::Stagnation { residual: r })
    }
}

fn newton_balance(sample: &SampledSurface, start: MoebiusParam) -> Result<(MoebiusParam, f64, usize)> {
    let n = start.dim_n();
    let dim = 2 * n + 2;
    let mut b = start;
    let mut f = balance_vector(sample, &b);
    for it in 0..50 {
        if f.norm() <= BALANCE_TOL {
            return Ok((b, f.norm(), it));
        }
        let h = 1e-6;
        let mut jac = nalgebra::DMatrix::zeros(dim, dim);
        for c in 0..dim {
            let mut bp = b.b().clone();
            bp.coords_mut()[c] += h;
            let mut bm = b.b().clone();
            bm.coords_mut()[c] -= h;
            let d = (&balance_vector(sample, &MoebiusParam::new(bp)?) - &balance_vector(sample, &MoebiusParam::new(bm)?))
                .scaled(0.5 / h);
            for r in 0..dim {
                jac[(r, c)] = d.coords()[r];
            }
        }
        let rhs = nalgebra::DVector::from_column_slice(f.coords());
        let step = jac
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let mut lambda = 1.0;
        loop {
            let mut next = b.b().clone();
            for (x, s) in next.coords_mut().iter_mut().zip(step.iter()) {
                *x -= lambda * s;
            }
            clamp_to_ball(next.coords_mut(), 0.99);
            let cand = MoebiusParam::new(next)?;
            let fc = balance_vector(sample, &cand);
            if fc.norm() < f.norm() || lambda < 1e-4 {
                b = cand;
                f = fc;
                break;
            }
            lambda *= 0.5;
        }
    }
    Ok((b.clone(), f.norm(), 50))
}

/// First nonzero Laplace eigenvalue of the flat torus `R^2 / Λ`,
/// `4 pi^2 |w|^2` for the shortest nonzero dual vector `w`.
pub fn lambda1_flat_torus(v1: [f64; 2], v2: [f64; 2]) -> Result<f64> {
    let det = v1[0] * v2[1] - v1[1] * v2[0];
    let scale = (v1[0].hypot(v1[1]) * v2[0].hypot(v2[1])).max(f64::MIN_POSITIVE);
    if !(det.abs() > 1e-12 * scale) {
        return Err(Error::InvalidParameter("degenerate lattice basis".into()));
    }
    // dual basis: rows of the inverse transpose
    let mut a = [v2[1] / det, -v2[0] / det];
    let mut b = [-v1[1] / det, v1[0] / det];
    let dot = |x: [f64; 2], y: [f64; 2]| x[0] * y[0] + x[1] * y[1];
    // Lagrange-Gauss reduction; afterwards `a` is a shortest vector.
    loop {
        if dot(a, a) > dot(b, b) {
            std::mem::swap(&mut a, &mut b);
        }
        let mu = (dot(a, b) / dot(a, a)).round();
        if mu == 0.0 {
            break;
        }
        b = [b[0] - mu * a[0], b[1] - mu * a[1]];
        if dot(b, b) >= dot(a, a) {
            break;
        }
    }
    // Confirm against a small enumeration around the reduced basis.
    let mut shortest = dot(a, a);
    for i in -2i32..=2 {
        for j in -2i32..=2 {
            if i == 0 && j == 0 {
                continue;
            }
            let w = [i as f64 * a[0] + j as f64 * b[0], i as f64 * a[1] + j as f64 * b[1]];
            shortest = shortest.min(dot(w, w));
        }
    }
    Ok(4.0 * std::f64::consts::PI.powi(2) * shortest)
}

/// Conformal factor of the dilation by `s` of `S^{2n+1}` fixing `±d`
/// (stereographic from `-d`), at `x`.
pub fn dilation_factor(s: f64, d: &[f64], x: &[f64]) -> f64 {
    let c: f64 = d.iter().zip(x).map(|(a, b)| a * b).sum();
    2.0 * s / ((1.0 + s * s) + (1.0 - s * s) * c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationScan {
    pub direction: Vec<f64>,
    pub parameters: Vec<f64>,
    pub values: Vec<f64>,
    pub max: f64,
    pub argmax: f64,
}

/// Volumes `∫ λ_s^m dV` of the dilated images over the scan parameters;
/// the maximum is a lower bound for the conformal volume.
pub fn dilation_conformal_lower_bound(
    chart: &ImmersionChart,
    grid: &QuadratureGrid,
    direction: &AmbientVector,
    scan: &[f64],
) -> Result<DilationScan> {
    let sample = SampledSurface::new(chart, grid)?;
    dilation_scan_sample(&sample, direction, scan)
}

pub fn dilation_scan_sample(sample: &SampledSurface, direction: &AmbientVector, scan: &[f64]) -> Result<DilationScan> {
    let norm = direction.norm();
    if !(norm > 0.0) || direction.len() != sample.dim {
        return Err(Error::InvalidParameter("dilation direction must be a nonzero ambient vector".into()));
    }
    if scan.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("dilation parameters must be positive".into()));
    }
    let d: Vec<f64> = direction.coords().iter().map(|x| x / norm).collect();
    let m = sample.m as i32;
    let values: Vec<f64> = scan
        .iter()
        .map(|&s| {
            let terms: Vec<f64> = (0..sample.len())
                .map(|k| sample.areas[k] * dilation_factor(s, &d, sample.position(k)).powi(m))
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    let (mut max, mut argmax) = (f64::NEG_INFINITY, 1.0);
    for (s, v) in scan.iter().zip(&values) {
        if *v > max {
            max = *v;
            argmax = *s;
        }
    }
    Ok(DilationScan { direction: d, parameters: scan.to_vec(), values, max, argmax })
}

/// Log-spaced dilation parameters in `[1/r, r]`, always including 1.
pub fn default_dilation_scan(r: f64, count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..count)
        .map(|k| r.powf(2.0 * k as f64 / (count - 1) as f64 - 1.0))
        .collect();
    v.push(1.0);
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn lambda1_square_and_hexagonal() {
        assert_relative_eq!(lambda1_flat_torus([1.0, 0.0], [0.0, 1.0]).unwrap(), 4.0 * PI * PI, max_relative = 1e-14);
        let h = lambda1_flat_torus([1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]).unwrap();
        assert_relative_eq!(h, 16.0 * PI * PI / 3.0, max_relative = 1e-14);
        // a skewed basis of the same square lattice
        assert_relative_eq!(lambda1_flat_torus([1.0, 0.0], [7.0, 1.0]).unwrap(), 4.0 * PI * PI, max_relative = 1e-12);
        assert!(lambda1_flat_torus([1.0, 2.0], [2.0, 4.0]).is_err());
    }

    #[test]
    fn dilation_factor_is_identity_at_one() {
        let d = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(dilation_factor(1.0, &d, &[0.0, 1.0, 0.0, 0.0]), 1.0);
        assert_relative_eq!(dilation_factor(3.0, &d, &d), 3.0);
        assert_relative_eq!(dilation_factor(3.0, &d, &[-1.0, 0.0, 0.0, 0.0]), 1.0 / 3.0);
    }

    #[test]
    fn start_layout() {
        let cfg = CrVolumeConfig::default();
        let s = start_points(6, &cfg);
        assert_eq!(s.len(), 1 + 12 + 8);
        assert!(s[0].iter().all(|x| *x == 0.0));
        assert_eq!(s[1][0], 0.5);
        assert_eq!(s[2][0], -0.5);
        for x in &s[13..] {
            assert!(x.iter().map(|v| v * v).sum::<f64>().sqrt() <= 0.5 + 1e-15);
        }
        assert_eq!(start_points(6, &cfg), s);
    }
}
