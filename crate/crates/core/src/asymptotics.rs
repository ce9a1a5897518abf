//! Degeneration of `|Psi_{-(1-t)X(p)}(Sigma)|` as `t -> 0`, and the special
//! integrals behind its expansion.
//!
//! ```text
//! J_{k,l}(tau; a) = ∫_0^a r^{l-1} (1 + tau r^2)^{-k} dr
//! I_{k,l}(t; eps) = ∫_eps^1 (1-x)^{l/2-1} (1 - (1-t)x)^{-k} dx
//!                 = 2 t^{-k} J_{k,l}(1/t - 1; sqrt(1 - eps))
//! ```
//!
//! For `2k > l` the limit `C_{k,l} = lim t^{k-l/2} I_{k,l}` exists and equals
//! the Beta value `B(l/2, k - l/2)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::sphere_volume;
use crate::error::{Error, Result};
use crate::immersion::{FundamentalData, ImmersionChart};
use crate::integration::{weighted_volume, AxisRule, QuadratureGrid, Scheme};
use crate::moebius::MoebiusParam;

/// `J_{k,l}(tau; a)` by closed forms and recursions.
pub fn j_integral(k: u32, l: u32, tau: f64, a: f64) -> Result<f64> {
    if l == 0 {
        return Err(Error::InvalidParameter("J_{k,l} needs l >= 1".into()));
    }
    if !(tau > 0.0) || !(a > 0.0) || !tau.is_finite() || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("J_{{k,l}} needs tau > 0 and a > 0, got tau={tau}, a={a}")));
    }
    Ok(j_rec(k, l, tau, a))
}

fn j_rec(k: u32, l: u32, tau: f64, a: f64) -> f64 {
    let q = tau * a * a;
    match (k, l) {
        (0, _) => a.powi(l as i32) / l as f64,
        (1, 1) => (a * tau.sqrt()).atan() / tau.sqrt(),
        (_, 1) => {
            // J_{j+1,1} = (2j-1)/(2j) J_{j,1} + a / (2j (1+q)^j)
            let mut j1 = (a * tau.sqrt()).atan() / tau.sqrt();
            for j in 1..k {
                let jf = j as f64;
                j1 = (2.0 * jf - 1.0) / (2.0 * jf) * j1 + a / (2.0 * jf * (1.0 + q).powi(j as i32));
            }
            j1
        }
        (1, 2) => q.ln_1p() / (2.0 * tau),
        (_, 2) => {
            let km1 = (k - 1) as f64;
            // 1 - (1+q)^{1-k} without cancellation for small q
            -(-km1 * q.ln_1p()).exp_m1() / (2.0 * km1 * tau)
        }
        _ => (j_rec(k - 1, l - 2, tau, a) - j_rec(k, l - 2, tau, a)) / tau,
    }
}

/// `I_{k,l}(t; eps)` via the change of variables to `J`.
pub fn i_integral(k: u32, l: u32, t: f64, eps: f64) -> Result<f64> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidParameter("I_{k,l} needs k, l >= 1".into()));
    }
    if !(t > 0.0 && t < 1.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("I_{{k,l}} needs t, eps in (0,1), got t={t}, eps={eps}")));
    }
    Ok(2.0 * t.powi(-(k as i32)) * j_rec(k, l, 1.0 / t - 1.0, (1.0 - eps).sqrt()))
}

/// Tanh-sinh quadrature of `f` over `[lo, hi]` on geometrically growing
/// pieces `[lo, lo+w], [lo+w, lo+2w], ...`, bisecting pieces that do not
/// converge.
pub fn clustered_quadrature<F: Fn(f64) -> f64 + Copy>(f: F, lo: f64, hi: f64, w: f64, rel_tol: f64) -> f64 {
    let mut edges = vec![lo];
    let mut x = w;
    while lo + x < hi {
        edges.push(lo + x);
        x *= 2.0;
    }
    edges.push(hi);
    let rough: f64 = edges
        .windows(2)
        .map(|e| quadrature::double_exponential::integrate(f, e[0], e[1], 1e-6).integral.abs())
        .sum();
    let target = rel_tol * rough.max(f64::MIN_POSITIVE) / edges.len() as f64;
    let pieces: Vec<f64> = edges.windows(2).map(|e| de_piece(f, e[0], e[1], target, 0)).collect();
    crate::integration::pairwise_sum(&pieces)
}

fn de_piece<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, target: f64, depth: u32) -> f64 {
    let out = quadrature::double_exponential::integrate(f, a, b, target);
    if out.error_estimate <= target || depth >= 12 {
        return out.integral;
    }
    let mid = 0.5 * (a + b);
    de_piece(f, a, mid, 0.5 * target, depth + 1) + de_piece(f, mid, b, 0.5 * target, depth + 1)
}

/// `J_{k,l}` by adaptive quadrature of its defining integral.
pub fn j_integral_quadrature(k: u32, l: u32, tau: f64, a: f64) -> f64 {
    let f = move |r: f64| r.powi(l as i32 - 1) / (1.0 + tau * r * r).powi(k as i32);
    clustered_quadrature(f, 0.0, a, 1.0 / tau.sqrt(), 1e-15)
}

/// `I_{k,l}` by adaptive quadrature of its defining integral, written in
/// `y = 1 - x` so the endpoint behaviour sits at `y = 0`. On the first
/// piece `[0, t]` the substitution `y = s^2` removes the `y^{l/2-1}`
/// singularity.
pub fn i_integral_quadrature(k: u32, l: u32, t: f64, eps: f64) -> f64 {
    let f = move |y: f64| y.powf(l as f64 / 2.0 - 1.0) / (t + (1.0 - t) * y).powi(k as i32);
    let hi = 1.0 - eps;
    let w = t.min(hi);
    let head = move |s: f64| 2.0 * s.powi(l as i32 - 1) / (t + (1.0 - t) * s * s).powi(k as i32);
    let first = clustered_quadrature(head, 0.0, w.sqrt(), t.sqrt(), 1e-15);
    if w >= hi {
        return first;
    }
    first + clustered_quadrature(f, w, hi, w, 1e-15)
}

/// Closed form `C_{k,l} = B(l/2, k - l/2)`.
pub fn c_coefficient_closed(k: u32, l: u32) -> Result<f64> {
    check_c_row(k, l)?;
    let (x, y) = (l as f64 / 2.0, k as f64 - l as f64 / 2.0);
    Ok((libm::lgamma(x) + libm::lgamma(y) - libm::lgamma(x + y)).exp())
}

fn check_c_row(k: u32, l: u32) -> Result<()> {
    if l == 0 || 2 * k <= l {
        return Err(Error::InvalidParameter(format!("C_{{k,l}} exists only for 2k > l >= 1, got k={k}, l={l}")));
    }
    Ok(())
}

/// Parameter `t` at which [`c_coefficient`] extracts the limit.
pub const C_EXTRACTION_T: f64 = 1e-8;

/// `C_{k,l}` extracted numerically from `I_{k,l}(t; eps)` near `t = 1e-8`
/// with `eps = 0.1`.
pub fn c_coefficient(k: u32, l: u32) -> Result<f64> {
    c_coefficient_with_eps(k, l, 0.1)
}

/// Uses `G(tau) = 2 tau^{l/2} J_{k,l}(tau; a) = C_{k,l} - O(tau^{-(k-l/2)})`
/// at `tau = 1/t - 1` and `4 tau`, with one Richardson step removing the
/// leading tail term.
pub fn c_coefficient_with_eps(k: u32, l: u32, eps: f64) -> Result<f64> {
    check_c_row(k, l)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter("eps must lie in (0, 1)".into()));
    }
    let a = (1.0 - eps).sqrt();
    let g = |tau: f64| 2.0 * tau.powf(l as f64 / 2.0) * j_rec(k, l, tau, a);
    let tau = 1.0 / C_EXTRACTION_T - 1.0;
    let (g1, g2) = (g(tau), g(4.0 * tau));
    let r = 4f64.powf(k as f64 - l as f64 / 2.0);
    Ok((r * g2 - g1) / (r - 1.0))
}

/// Totally symmetric cubic form on `R^m`, stored in full with every write
/// applied to all index permutations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricCubic {
    m: usize,
    entries: Vec<f64>,
}

impl SymmetricCubic {
    pub fn zeros(m: usize) -> Self {
        Self { m, entries: vec![0.0; m * m * m] }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.m + j) * self.m + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.entries[self.idx(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
            let p = self.idx(a, b, c);
            self.entries[p] = v;
        }
    }

    /// Independent standard normal entries for `i <= j <= k`.
    pub fn random(m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = Self::zeros(m);
        for i in 0..m {
            for j in i..m {
                for k in j..m {
                    c.set(i, j, k, StandardNormal.sample(&mut rng));
                }
            }
        }
        c
    }

    /// `|C|^2 = sum_{ijk} C_{ijk}^2`.
    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum()
    }

    /// `tr(C)_k = sum_i C_{iik}`.
    pub fn trace(&self) -> Vec<f64> {
        (0..self.m).map(|k| (0..self.m).map(|i| self.get(i, i, k)).sum()).collect()
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        let m = self.m;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                let xij = xi[i] * xi[j];
                let row = &self.entries[(i * m + j) * m..(i * m + j + 1) * m];
                s += xij * row.iter().zip(xi).map(|(c, x)| c * x).sum::<f64>();
            }
        }
        s
    }

    pub fn max_asymmetry(&self) -> f64 {
        let m = self.m;
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let v = self.get(i, j, k);
                    for w in [self.get(j, i, k), self.get(i, k, j), self.get(k, j, i)] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SexticMethod {
    /// Quadrature for `m <= 3`, Monte Carlo (`10^6` samples, seed 0) above.
    Auto,
    Quadrature,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SexticResult {
    pub m: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Standard error of the Monte Carlo estimate of `lhs`.
    pub std_error: Option<f64>,
}

pub const SEXTIC_MC_SAMPLES: usize = 1_000_000;

/// `∫_{S^{m-1}} (C ξξξ)^2` against
/// `9 |S^{m-1}| / (m(m+2)(m+4)) ((2/3)|C|^2 + |tr C|^2)`.
pub fn sextic_identity_residual(c: &SymmetricCubic, method: SexticMethod) -> Result<SexticResult> {
    let m = c.m();
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    let mf = m as f64;
    let area = sphere_volume(m - 1);
    let tr2: f64 = c.trace().iter().map(|x| x * x).sum();
    let rhs = 9.0 * area / (mf * (mf + 2.0) * (mf + 4.0)) * (2.0 / 3.0 * c.norm_sq() + tr2);
    let method = match method {
        SexticMethod::Auto if m <= 3 => SexticMethod::Quadrature,
        SexticMethod::Auto => SexticMethod::MonteCarlo { samples: SEXTIC_MC_SAMPLES, seed: 0 },
        other => other,
    };
    let (lhs, std_error) = match method {
        SexticMethod::Quadrature => (sextic_lhs_quadrature(c)?, None),
        SexticMethod::MonteCarlo { samples, seed } => {
            let (mean, se) = sextic_lhs_monte_carlo(c, samples, seed)?;
            (area * mean, Some(area * se))
        }
        SexticMethod::Auto => unreachable!(),
    };
    Ok(SexticResult { m, lhs, rhs, residual: lhs - rhs, std_error })
}

fn sextic_lhs_quadrature(c: &SymmetricCubic) -> Result<f64> {
    let sq = |xi: &[f64]| c.eval(xi).powi(2);
    match c.m() {
        1 => Ok(sq(&[1.0]) + sq(&[-1.0])),
        2 => {
            let n = 64;
            let h = 2.0 * PI / n as f64;
            Ok((0..n).map(|k| (k as f64 * h).sin_cos()).map(|(s, co)| h * sq(&[co, s])).sum())
        }
        3 => {
            // z = cos(theta) by Gauss-Legendre, azimuth uniform; exact for degree 6.
            let zr = AxisRule::gauss_legendre(-1.0, 1.0, 8);
            let n = 16;
            let h = 2.0 * PI / n as f64;
            let mut s = 0.0;
            for (z, wz) in zr.nodes.iter().zip(&zr.weights) {
                let r = (1.0 - z * z).sqrt();
                for k in 0..n {
                    let (sp, cp) = (k as f64 * h).sin_cos();
                    s += wz * h * sq(&[r * cp, r * sp, *z]);
                }
            }
            Ok(s)
        }
        m => Err(Error::InvalidParameter(format!("exact sextic quadrature is implemented for m <= 3, got {m}"))),
    }
}

fn sextic_lhs_monte_carlo(c: &SymmetricCubic, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 Monte Carlo samples".into()));
    }
    let m = c.m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xi = vec![0.0; m];
    let mut values = Vec::with_capacity(samples);
    while values.len() < samples {
        for x in xi.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        let n = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        xi.iter_mut().for_each(|x| *x /= n);
        values.push(c.eval(&xi).powi(2));
    }
    let nf = samples as f64;
    let mean = crate::integration::pairwise_sum(&values) / nf;
    let var = crate::integration::pairwise_sum(&values.iter().map(|v| (v - mean).powi(2)).collect::<Vec<_>>()) / (nf - 1.0);
    Ok((mean, (var / nf).sqrt()))
}

/// `((3m+2)/(3m+3))|U|^2 + |Å|^2 - ((m-2)/(2m)) (m^2/((m+2)(m+1)) |H^N|^2 + |H^N̂|^2)`.
pub fn alpha_coefficient(data: &FundamentalData) -> f64 {
    let m = data.m as f64;
    (3.0 * m + 2.0) / (3.0 * m + 3.0) * data.u_norm_sq() + data.a_hat_traceless_norm_sq()
        - (m - 2.0) / (2.0 * m)
            * (m * m / ((m + 2.0) * (m + 1.0)) * data.h_n.norm_sq() + data.h_nhat.norm_sq())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Starting nodes per axis.
    pub base_nodes: usize,
    /// Cap on nodes per axis.
    pub max_nodes: usize,
    /// Relative agreement required between successive doublings.
    pub rel_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { base_nodes: 48, max_nodes: 1536, rel_tol: 1e-11 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub point: Vec<f64>,
    pub t_samples: Vec<f64>,
    pub values: Vec<f64>,
    pub nodes_per_axis: Vec<usize>,
    pub basis: Vec<String>,
    /// `c0, c1[, c2]` in the order of `basis`.
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    /// `|S^m|`, the expected leading coefficient.
    pub sphere_volume: f64,
}

impl ExpansionFit {
    pub fn c0(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn c1(&self) -> f64 {
        self.coefficients[1]
    }
}

/// Twelve log-spaced values in `[1e-4, 1e-2]`, decreasing.
pub fn default_t_samples() -> Vec<f64> {
    (0..12).map(|k| 10f64.powf(-2.0 - 2.0 * k as f64 / 11.0)).collect()
}

/// Product grid clustered at `u0` with per-axis width `sqrt(2t)/|d_a phi|`.
pub fn clustered_grid(chart: &ImmersionChart, u0: &[f64], t: f64, nodes: usize) -> Result<QuadratureGrid> {
    let jet = chart.jet_of_order(u0, 1)?;
    let rules: Vec<AxisRule> = chart
        .axes()
        .iter()
        .enumerate()
        .map(|(a, ax)| {
            let w = (2.0 * t).sqrt() / jet.d1[a].norm();
            let c = u0[a];
            if ax.periodic {
                let half = 0.5 * ax.length();
                AxisRule::sinh_clustered(c - half, c + half, c, w, nodes)
            } else {
                AxisRule::sinh_clustered(ax.lo, ax.hi, c, w, nodes)
            }
        })
        .collect();
    QuadratureGrid::from_rules(&rules, Scheme::GaussLegendreProduct)
}

/// `|Psi_b(Sigma)|` with `b = -(1-t) phi(u0)`, doubling the clustered
/// resolution until two successive values agree.
pub fn degenerate_volume(chart: &ImmersionChart, u0: &[f64], t: f64, opts: &ScanOptions) -> Result<(f64, usize)> {
    if !(t > 1e-9 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("t must lie in (1e-9, 1), got {t}")));
    }
    let p = chart.point(u0)?;
    let b = MoebiusParam::new(p.scaled(-(1.0 - t)))?;
    let mut nodes = opts.base_nodes;
    let mut prev = weighted_volume(chart, &clustered_grid(chart, u0, t, nodes)?, &b)?;
    while 2 * nodes <= opts.max_nodes {
        nodes *= 2;
        let v = weighted_volume(chart, &clustered_grid(chart, u0, t, nodes)?, &b)?;
        if (v - prev).abs() <= opts.rel_tol * v.abs() {
            return Ok((v, nodes));
        }
        prev = v;
    }
    Err(Error::QuadratureNotConverged(format!("degenerate volume at t = {t} with {nodes} nodes per axis")))
}

/// Measures the degeneration at `phi(u0)` and fits
/// `c0 + c1 t(-log t) + c2 t` (surfaces) or `c0 + c1 t` (otherwise).
pub fn degeneration_scan(chart: &ImmersionChart, u0: &[f64], t_list: &[f64], opts: &ScanOptions) -> Result<ExpansionFit> {
    let m = chart.m();
    let results: Vec<(f64, usize)> = t_list
        .par_iter()
        .map(|&t| degenerate_volume(chart, u0, t, opts))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let (coefficients, residual_norm, basis) = fit_expansion(t_list, &values, m)?;
    Ok(ExpansionFit {
        point: chart.point(u0)?.into_coords(),
        t_samples: t_list.to_vec(),
        values,
        nodes_per_axis: results.iter().map(|r| r.1).collect(),
        basis,
        coefficients,
        residual_norm,
        sphere_volume: sphere_volume(m),
    })
}

/// Least-squares fit; returns coefficients, residual norm and basis names.
pub fn fit_expansion(ts: &[f64], values: &[f64], m: usize) -> Result<(Vec<f64>, f64, Vec<String>)> {
    let funcs: Vec<(&str, fn(f64) -> f64)> = if m == 2 {
        vec![("1", |_| 1.0), ("t(-log t)", |t| -t * t.ln()), ("t", |t| t)]
    } else {
        vec![("1", |_| 1.0), ("t", |t| t)]
    };
    if ts.len() != values.len() || ts.len() < funcs.len() {
        return Err(Error::InvalidParameter("not enough samples for the fit".into()));
    }
    let a = DMatrix::from_fn(ts.len(), funcs.len(), |r, c| (funcs[c].1)(ts[r]));
    let y = DVector::from_column_slice(values);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let residual = (&a * &coef - &y).norm();
    Ok((coef.iter().copied().collect(), residual, funcs.iter().map(|f| f.0.to_string()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn j_examples() {
        assert_relative_eq!(j_integral(0, 3, 5.0, 2.0).unwrap(), 8.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(j_integral(1, 1, 100.0, 1.0).unwrap(), 10f64.atan() / 10.0, max_relative = 1e-15);
        assert!(j_integral(1, 0, 5.0, 1.0).is_err());
        assert!(j_integral(1, 1, -5.0, 1.0).is_err());
    }

    #[test]
    fn j_matches_quadrature() {
        for (k, l, tau, a) in [(1, 1, 10.0, 0.5), (2, 1, 300.0, 1.0), (3, 4, 50.0, 0.7), (5, 8, 1e4, 0.3), (2, 6, 20.0, 0.9)] {
            let q = j_integral_quadrature(k, l, tau, a);
            assert_relative_eq!(j_integral(k, l, tau, a).unwrap(), q, max_relative = 1e-11);
        }
    }

    #[test]
    fn i_matches_quadrature() {
        let exact = i_integral(3, 4, 0.01, 0.1).unwrap();
        assert_relative_eq!(exact, i_integral_quadrature(3, 4, 0.01, 0.1), max_relative = 1e-11);
        assert_relative_eq!(i_integral(1, 1, 0.3, 0.5).unwrap(), i_integral_quadrature(1, 1, 0.3, 0.5), max_relative = 1e-11);
    }

    #[test]
    fn c_values() {
        assert_relative_eq!(c_coefficient(3, 4).unwrap(), 0.5, max_relative = 1e-9);
        assert_relative_eq!(c_coefficient(4, 7).unwrap() / c_coefficient(4, 5).unwrap(), 5.0, max_relative = 1e-8);
        assert_relative_eq!(c_coefficient_closed(3, 4).unwrap(), 0.5, max_relative = 1e-14);
        assert!(c_coefficient(2, 4).is_err());
    }

    #[test]
    fn sextic_circle_example() {
        let mut c = SymmetricCubic::zeros(2);
        c.set(0, 0, 0, 1.0);
        let r = sextic_identity_residual(&c, SexticMethod::Auto).unwrap();
        assert_relative_eq!(r.lhs, 5.0 * PI / 8.0, max_relative = 1e-14);
        assert_relative_eq!(r.rhs, 5.0 * PI / 8.0, max_relative = 1e-14);
    }

    #[test]
    fn symmetric_storage() {
        let c = SymmetricCubic::random(4, 1);
        assert_eq!(c.max_asymmetry(), 0.0);
        assert_eq!(c.get(0, 1, 3), c.get(3, 0, 1));
    }

    #[test]
    fn fit_recovers_coefficients() {
        let ts = default_t_samples();
        let vs: Vec<f64> = ts.iter().map(|t| 3.0 + 2.0 * t * -t.ln() - 0.5 * t).collect();
        let (c, r, _) = fit_expansion(&ts, &vs, 2).unwrap();
        assert_relative_eq!(c[0], 3.0, max_relative = 1e-10);
        assert_relative_eq!(c[1], 2.0, max_relative = 1e-8);
        assert!(r < 1e-12);
    }
}
