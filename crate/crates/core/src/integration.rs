//! Product quadrature over chart domains and the volume integrals built
//! on it.
//!
//! Periodic axes use the uniform (trapezoid) rule, which is spectrally
//! accurate for smooth periodic integrands; closed axes use
//! Gauss-Legendre. Sums are formed from per-node values in node order
//! with pairwise summation, so results do not depend on thread count.

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::immersion::ImmersionChart;
use crate::moebius::{weight_coords, MoebiusParam};

/// Default nodes per periodic axis.
pub const DEFAULT_PERIODIC_NODES: usize = 64;
/// Default nodes per closed axis.
pub const DEFAULT_CLOSED_NODES: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    PeriodicUniform,
    GaussLegendreProduct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AxisRule {
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Self {
        let h = (hi - lo) / n as f64;
        Self {
            nodes: (0..n).map(|k| lo + k as f64 * h).collect(),
            weights: vec![h; n],
        }
    }

    pub fn gauss_legendre(lo: f64, hi: f64, n: usize) -> Self {
        let rule = GaussLegendre::new(n.max(2).try_into().expect("n >= 2"));
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let mut pairs: Vec<(f64, f64)> = rule
            .nodes()
            .zip(rule.weights())
            .map(|(x, w)| (c + r * x, r * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Gauss-Legendre in `s` under `x = c + w sinh(s)`, which clusters
    /// nodes in a window of width `~w` around `c`.
    pub fn sinh_clustered(lo: f64, hi: f64, center: f64, width: f64, n: usize) -> Self {
        let s_lo = ((lo - center) / width).asinh();
        let s_hi = ((hi - center) / width).asinh();
        let base = Self::gauss_legendre(s_lo, s_hi, n);
        Self {
            nodes: base.nodes.iter().map(|s| center + width * s.sinh()).collect(),
            weights: base
                .nodes
                .iter()
                .zip(&base.weights)
                .map(|(s, w)| w * width * s.cosh())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    m: usize,
    /// Flattened nodes, stride `m`, last axis fastest.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    resolution: Vec<usize>,
    scheme: Scheme,
}

impl QuadratureGrid {
    pub fn from_rules(rules: &[AxisRule], scheme: Scheme) -> Result<Self> {
        if rules.is_empty() || rules.iter().any(AxisRule::is_empty) {
            return Err(Error::InvalidParameter("empty quadrature rule".into()));
        }
        let m = rules.len();
        let total: usize = rules.iter().map(AxisRule::len).product();
        let mut nodes = Vec::with_capacity(total * m);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; m];
        for _ in 0..total {
            let mut w = 1.0;
            for (a, r) in rules.iter().enumerate() {
                nodes.push(r.nodes[idx[a]]);
                w *= r.weights[idx[a]];
            }
            weights.push(w);
            for a in (0..m).rev() {
                idx[a] += 1;
                if idx[a] < rules[a].len() {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(Self { m, nodes, weights, resolution: rules.iter().map(AxisRule::len).collect(), scheme })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.m..(k + 1) * self.m]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.m)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Integral of per-node values against the weights.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        let terms: Vec<f64> = values.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
        pairwise_sum(&terms)
    }

    /// Integral of `f(u)` over the domain (parallel map, ordered sum).
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let values: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|k| f(self.node(k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.integrate_values(&values))
    }
}

/// Resolution per axis: `res` applies to every axis when given, otherwise
/// the defaults for periodic and closed axes.
pub fn build_grid(chart: &ImmersionChart, res: Option<usize>) -> Result<QuadratureGrid> {
    let per_axis: Vec<usize> = chart
        .axes()
        .iter()
        .map(|a| res.unwrap_or(if a.periodic { DEFAULT_PERIODIC_NODES } else { DEFAULT_CLOSED_NODES }))
        .collect();
    build_grid_with(chart, &per_axis)
}

pub fn build_grid_with(chart: &ImmersionChart, per_axis: &[usize]) -> Result<QuadratureGrid> {
    if per_axis.len() != chart.m() {
        return Err(Error::DimensionMismatch { expected: chart.m(), found: per_axis.len() });
    }
    if per_axis.iter().any(|&n| n < 2) {
        return Err(Error::InvalidParameter("need at least 2 nodes per axis".into()));
    }
    let rules: Vec<AxisRule> = chart
        .axes()
        .iter()
        .zip(per_axis)
        .map(|(a, &n)| {
            if a.periodic {
                AxisRule::uniform(a.lo, a.hi, n)
            } else {
                AxisRule::gauss_legendre(a.lo, a.hi, n)
            }
        })
        .collect();
    let scheme = if chart.axes().iter().all(|a| a.periodic) {
        Scheme::PeriodicUniform
    } else {
        Scheme::GaussLegendreProduct
    };
    QuadratureGrid::from_rules(&rules, scheme)
}

/// Same grid with every axis resolution doubled.
pub fn refine_grid(chart: &ImmersionChart, grid: &QuadratureGrid) -> Result<QuadratureGrid> {
    let doubled: Vec<usize> = grid.resolution().iter().map(|n| 2 * n).collect();
    build_grid_with(chart, &doubled)
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Node positions and area elements `w_k sqrt(det g(u_k))`, computed once
/// and reused by integrals that only need the image points.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSurface {
    pub m: usize,
    pub dim: usize,
    /// Flattened positions, stride `dim = 2n + 2`.
    pub positions: Vec<f64>,
    pub areas: Vec<f64>,
}

impl SampledSurface {
    pub fn new(chart: &ImmersionChart, grid: &QuadratureGrid) -> Result<Self> {
        let per_node: Vec<(Vec<f64>, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let u = grid.node(k);
                let jet = chart.jet_of_order(u, 1)?;
                let det = jet.metric().determinant();
                if !(det > 0.0) {
                    return Err(Error::DegenerateMetric { det });
                }
                Ok((jet.point.into_coords(), grid.weights()[k] * det.sqrt()))
            })
            .collect::<Result<Vec<_>>>()?;
        let dim = 2 * chart.dim_n() + 2;
        let mut positions = Vec::with_capacity(per_node.len() * dim);
        let mut areas = Vec::with_capacity(per_node.len());
        for (p, a) in per_node {
            positions.extend_from_slice(&p);
            areas.push(a);
        }
        Ok(Self { m: chart.m(), dim, positions, areas })
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn position(&self, k: usize) -> &[f64] {
        &self.positions[k * self.dim..(k + 1) * self.dim]
    }

    pub fn volume(&self) -> f64 {
        pairwise_sum(&self.areas)
    }

    /// `∫ W_b^{m/2} dA`. Sequential: this is the inner loop of the
    /// optimizer, which is itself run serially.
    pub fn weighted_volume(&self, b: &[f64]) -> f64 {
        let half_m = self.m as f64 / 2.0;
        let terms: Vec<f64> = self
            .areas
            .iter()
            .enumerate()
            .map(|(k, a)| a * weight_power(weight_coords(b, self.position(k)), self.m, half_m))
            .collect();
        pairwise_sum(&terms)
    }
}

#[inline]
fn weight_power(w: f64, m: usize, half_m: f64) -> f64 {
    match m {
        1 => w.sqrt(),
        2 => w,
        3 => w * w.sqrt(),
        4 => w * w,
        _ => w.powf(half_m),
    }
}

/// Riemannian volume `∫ sqrt(det g)`.
pub fn volume(chart: &ImmersionChart, grid: &QuadratureGrid) -> Result<f64> {
    check_grid(chart, grid)?;
    grid.integrate(|u| {
        let det = chart.jet_of_order(u, 1)?.metric().determinant();
        if !(det > 0.0) {
            return Err(Error::DegenerateMetric { det });
        }
        Ok(det.sqrt())
    })
}

/// Volume of `Psi_b(Sigma)`: `∫ W_b^{m/2} sqrt(det g)`.
pub fn weighted_volume(chart: &ImmersionChart, grid: &QuadratureGrid, b: &MoebiusParam) -> Result<f64> {
    check_grid(chart, grid)?;
    if b.dim_n() != chart.dim_n() {
        return Err(Error::DimensionMismatch { expected: 2 * chart.dim_n() + 2, found: b.b().len() });
    }
    let m = chart.m();
    let half_m = m as f64 / 2.0;
    let bc = b.b().coords();
    grid.integrate(|u| {
        let jet = chart.jet_of_order(u, 1)?;
        let det = jet.metric().determinant();
        if !(det > 0.0) {
            return Err(Error::DegenerateMetric { det });
        }
        Ok(det.sqrt() * weight_power(weight_coords(bc, jet.point.coords()), m, half_m))
    })
}

fn check_grid(chart: &ImmersionChart, grid: &QuadratureGrid) -> Result<()> {
    if grid.m() != chart.m() {
        return Err(Error::DimensionMismatch { expected: chart.m(), found: grid.m() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gl_rule_integrates_polynomials() {
        let r = AxisRule::gauss_legendre(0.0, 2.0, 5);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(9)).sum();
        assert_relative_eq!(s, 2f64.powi(10) / 10.0, max_relative = 1e-13);
        assert!(r.nodes.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn uniform_rule_is_spectral_for_trig() {
        let r = AxisRule::uniform(0.0, 1.0, 16);
        let s: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(x, w)| w * (2.0 * std::f64::consts::PI * 3.0 * x).cos().powi(2))
            .sum();
        assert_relative_eq!(s, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn sinh_rule_integrates_a_narrow_peak() {
        let t: f64 = 1e-6;
        let r = AxisRule::sinh_clustered(-1.0, 1.0, 0.0, t.sqrt(), 200);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * t / (t + x * x)).sum();
        let exact = 2.0 * t.sqrt() * (1.0 / t.sqrt()).atan();
        assert_relative_eq!(s, exact, max_relative = 1e-12);
    }

    #[test]
    fn product_grid_weights() {
        let rules = [AxisRule::uniform(0.0, 1.0, 4), AxisRule::gauss_legendre(0.0, 3.0, 3)];
        let g = QuadratureGrid::from_rules(&rules, Scheme::GaussLegendreProduct).unwrap();
        assert_eq!(g.len(), 12);
        assert_relative_eq!(pairwise_sum(g.weights()), 3.0, max_relative = 1e-14);
        assert_eq!(g.node(1), &[0.0, rules[1].nodes[1]]);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}
