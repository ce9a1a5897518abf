//! Parameterized immersions into S^{2n+1} and their extrinsic data.
//!
//! A chart is a map from an m-dimensional parameter box into the sphere.
//! Catalog charts carry analytic jets; anything else falls back to
//! central finite differences of the raw map values.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AmbientVector;

/// Default contact-residual tolerance for horizontality checks.
pub const HORIZ_TOL: f64 = 1e-8;
/// Smallest admissible singular value of the differential.
pub const RANK_TOL: f64 = 1e-8;
const SPHERE_VALUE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn periodic(lo: f64, hi: f64) -> Self {
        Self { lo, hi, periodic: true }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, periodic: false }
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * (1.0 + self.length().abs());
        self.periodic || (x >= self.lo - slack && x <= self.hi + slack)
    }
}

/// Position together with first and (optionally) second partial derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub point: AmbientVector,
    pub d1: Vec<AmbientVector>,
    /// Row-major `m × m`; empty when only first derivatives were requested.
    pub d2: Vec<AmbientVector>,
}

impl Jet {
    #[inline]
    pub fn m(&self) -> usize {
        self.d1.len()
    }

    #[inline]
    pub fn second(&self, i: usize, j: usize) -> &AmbientVector {
        &self.d2[i * self.m() + j]
    }

    pub fn has_second(&self) -> bool {
        !self.d2.is_empty()
    }

    /// Gram matrix of the first derivatives.
    pub fn metric(&self) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_fn(m, m, |i, j| self.d1[i].dot(&self.d1[j]))
    }
}

/// The map behind a chart.
pub trait ChartMap: Send + Sync {
    fn eval(&self, u: &[f64]) -> AmbientVector;

    /// Analytic derivatives up to `order` (1 or 2). `None` selects the
    /// finite-difference fallback.
    fn jet(&self, _u: &[f64], _order: usize) -> Option<Jet> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdSteps {
    pub first: f64,
    pub second: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self { first: 1e-5, second: 1e-4 }
    }
}

#[derive(Clone)]
pub struct ImmersionChart {
    name: String,
    dim_n: usize,
    axes: Vec<Axis>,
    map: Arc<dyn ChartMap>,
    fd_step: FdSteps,
    analytic: bool,
}

impl fmt::Debug for ImmersionChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImmersionChart")
            .field("name", &self.name)
            .field("m", &self.m())
            .field("n", &self.dim_n)
            .field("axes", &self.axes)
            .field("analytic", &self.analytic)
            .finish()
    }
}

impl ImmersionChart {
    /// Builds a chart and checks that the map is sphere-valued with the
    /// right ambient dimension at the domain center.
    pub fn new(
        name: impl Into<String>,
        dim_n: usize,
        axes: Vec<Axis>,
        map: Arc<dyn ChartMap>,
    ) -> Result<Self> {
        let m = axes.len();
        if m == 0 || m > dim_n {
            return Err(Error::InvalidParameter(format!(
                "intrinsic dimension m = {m} must satisfy 1 <= m <= n = {dim_n}"
            )));
        }
        for a in &axes {
            if !(a.hi > a.lo) || !a.lo.is_finite() || !a.hi.is_finite() {
                return Err(Error::InvalidParameter(format!("bad axis [{}, {}]", a.lo, a.hi)));
            }
        }
        let center: Vec<f64> = axes.iter().map(Axis::midpoint).collect();
        let analytic = map.jet(&center, 1).is_some();
        let chart = Self {
            name: name.into(),
            dim_n,
            axes,
            map,
            fd_step: FdSteps::default(),
            analytic,
        };
        let p = chart.map.eval(&center);
        if p.len() != 2 * dim_n + 2 {
            return Err(Error::DimensionMismatch { expected: 2 * dim_n + 2, found: p.len() });
        }
        if (p.norm() - 1.0).abs() > SPHERE_VALUE_TOL {
            return Err(Error::NotOnSphere { norm: p.norm() });
        }
        Ok(chart)
    }

    pub fn with_fd_step(mut self, steps: FdSteps) -> Self {
        self.fd_step = steps;
        self
    }

    /// Drops the analytic jets so that every derivative is differenced.
    pub fn finite_difference_only(mut self) -> Self {
        struct NoJet(Arc<dyn ChartMap>);
        impl ChartMap for NoJet {
            fn eval(&self, u: &[f64]) -> AmbientVector {
                self.0.eval(u)
            }
        }
        self.map = Arc::new(NoJet(self.map.clone()));
        self.analytic = false;
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.axes.len()
    }

    #[inline]
    pub fn dim_n(&self) -> usize {
        self.dim_n
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn fd_step(&self) -> FdSteps {
        self.fd_step
    }

    pub fn has_analytic_jets(&self) -> bool {
        self.analytic
    }

    pub fn map(&self) -> &Arc<dyn ChartMap> {
        &self.map
    }

    pub fn check_domain(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), found: u.len() });
        }
        if u.iter().zip(&self.axes).any(|(x, a)| !x.is_finite() || !a.contains(*x)) {
            return Err(Error::OutsideDomain { point: u.to_vec() });
        }
        Ok(())
    }

    pub fn point(&self, u: &[f64]) -> Result<AmbientVector> {
        self.check_domain(u)?;
        Ok(self.map.eval(u))
    }

    /// Raw map value without the domain check (used by stencils that may
    /// step slightly past a closed axis end).
    #[inline]
    pub fn eval_unchecked(&self, u: &[f64]) -> AmbientVector {
        self.map.eval(u)
    }

    /// Point, first and second derivatives at `u`.
    pub fn evaluate_jet(&self, u: &[f64]) -> Result<Jet> {
        self.jet_of_order(u, 2)
    }

    pub fn jet_of_order(&self, u: &[f64], order: usize) -> Result<Jet> {
        self.check_domain(u)?;
        let jet = self.jet_unchecked(u, order);
        check_rank(&jet)?;
        Ok(jet)
    }

    pub(crate) fn jet_unchecked(&self, u: &[f64], order: usize) -> Jet {
        match self.map.jet(u, order) {
            Some(j) => j,
            None => self.fd_jet(u, order),
        }
    }

    /// Central finite-difference jet, regardless of analytic availability.
    pub fn fd_jet(&self, u: &[f64], order: usize) -> Jet {
        let m = self.m();
        let f0 = self.map.eval(u);
        let h1 = self.fd_step.first;
        let mut w = u.to_vec();
        let mut d1 = Vec::with_capacity(m);
        for i in 0..m {
            w[i] = u[i] + h1;
            let fp = self.map.eval(&w);
            w[i] = u[i] - h1;
            let fm = self.map.eval(&w);
            w[i] = u[i];
            d1.push((&fp - &fm).scaled(0.5 / h1));
        }
        let mut d2 = Vec::new();
        if order >= 2 {
            let h = self.fd_step.second;
            d2 = vec![AmbientVector::zeros(self.dim_n); m * m];
            for i in 0..m {
                w[i] = u[i] + h;
                let fp = self.map.eval(&w);
                w[i] = u[i] - h;
                let fm = self.map.eval(&w);
                w[i] = u[i];
                let mut dii = &fp + &fm;
                dii.add_scaled(-2.0, &f0);
                d2[i * m + i] = dii.scaled(1.0 / (h * h));
                for j in (i + 1)..m {
                    let mut acc = AmbientVector::zeros(self.dim_n);
                    for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                        w[i] = u[i] + si * h;
                        w[j] = u[j] + sj * h;
                        acc.add_scaled(sign, &self.map.eval(&w));
                    }
                    w[i] = u[i];
                    w[j] = u[j];
                    let dij = acc.scaled(0.25 / (h * h));
                    d2[j * m + i] = dij.clone();
                    d2[i * m + j] = dij;
                }
            }
        }
        Jet { point: f0, d1, d2 }
    }
}

fn check_rank(jet: &Jet) -> Result<()> {
    let g = jet.metric();
    let eig = g.symmetric_eigenvalues();
    let lmin = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let sigma_min = lmin.max(0.0).sqrt();
    if !(sigma_min > RANK_TOL) {
        return Err(Error::RankDeficient { sigma_min });
    }
    Ok(())
}

/// Max over the given parameter points and coordinate directions of
/// `|theta(d_i phi)|`.
pub fn horizontality_residual<'a, I>(chart: &ImmersionChart, nodes: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut worst = 0.0f64;
    for u in nodes {
        let jet = chart.jet_of_order(u, 1)?;
        worst = worst.max(contact_residual(&jet));
    }
    Ok(worst)
}

pub(crate) fn contact_residual(jet: &Jet) -> f64 {
    let t = -jet.point.j();
    jet.d1.iter().fold(0.0f64, |acc, d| acc.max(d.dot(&t).abs()))
}

/// Extrinsic data of a horizontal immersion at one parameter point.
///
/// `A`, `U` and `Å` are stored row-major as `m × m` arrays of ambient
/// vectors; `sigma` is row-major `m × m × m`.
#[derive(Clone, Debug)]
pub struct FundamentalData {
    pub m: usize,
    pub point: AmbientVector,
    pub reeb: AmbientVector,
    pub tangents: Vec<AmbientVector>,
    pub metric: DMatrix<f64>,
    pub inverse_metric: DMatrix<f64>,
    pub sqrt_det: f64,
    pub second_fund: Vec<AmbientVector>,
    pub mean_curv: AmbientVector,
    pub a_n: Vec<AmbientVector>,
    pub a_nhat: Vec<AmbientVector>,
    pub h_n: AmbientVector,
    pub h_nhat: AmbientVector,
    /// `<A(i,j), T>`; zero for horizontal immersions.
    pub a_reeb: Vec<f64>,
    pub h_reeb: f64,
    pub sigma: Vec<f64>,
    pub beta: Vec<f64>,
    pub e_n: Vec<AmbientVector>,
    pub u: Vec<AmbientVector>,
    pub a_hat_traceless: Vec<AmbientVector>,
}

impl FundamentalData {
    /// Builds the data from a second-order jet, failing if the jet is not
    /// horizontal to `horiz_tol`.
    pub fn from_jet(jet: &Jet, horiz_tol: f64) -> Result<Self> {
        if !jet.has_second() {
            return Err(Error::InvalidParameter("second derivatives are required".into()));
        }
        let m = jet.m();
        let residual = contact_residual(jet);
        if residual > horiz_tol {
            return Err(Error::NotHorizontal { residual, tolerance: horiz_tol });
        }
        let p = &jet.point;
        let reeb = -p.j();
        let metric = jet.metric();
        let det = metric.determinant();
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::DegenerateMetric { det });
        }
        let inverse_metric = metric
            .clone()
            .cholesky()
            .ok_or(Error::DegenerateMetric { det })?
            .inverse();
        let ginv = &inverse_metric;
        let tangents = jet.d1.clone();
        let jt: Vec<AmbientVector> = tangents.iter().map(AmbientVector::j).collect();

        // A(i,j) = d_i d_j phi minus its tangential and radial parts.
        let mut second_fund = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let dij = jet.second(i, j);
                let mut a = dij.clone();
                let rhs: Vec<f64> = tangents.iter().map(|t| dij.dot(t)).collect();
                for k in 0..m {
                    let ck: f64 = (0..m).map(|l| ginv[(k, l)] * rhs[l]).sum();
                    a.add_scaled(-ck, &tangents[k]);
                }
                a.add_scaled(-dij.dot(p), p);
                second_fund.push(a);
            }
        }
        let mean_curv = trace(ginv, &second_fund, m, p.dim_n());

        let split = |v: &AmbientVector| -> (AmbientVector, AmbientVector) {
            let vn = n_part(ginv, &jt, v);
            let mut rest = v - &vn;
            rest.add_scaled(-rest.dot(&reeb), &reeb);
            rest.add_scaled(-rest.dot(p), p);
            let rhs: Vec<f64> = tangents.iter().map(|t| rest.dot(t)).collect();
            for k in 0..m {
                let ck: f64 = (0..m).map(|l| ginv[(k, l)] * rhs[l]).sum();
                rest.add_scaled(-ck, &tangents[k]);
            }
            (vn, rest)
        };
        let mut a_n = Vec::with_capacity(m * m);
        let mut a_nhat = Vec::with_capacity(m * m);
        for a in &second_fund {
            let (x, y) = split(a);
            a_n.push(x);
            a_nhat.push(y);
        }
        let (h_n, h_nhat) = split(&mean_curv);
        let a_reeb: Vec<f64> = second_fund.iter().map(|a| a.dot(&reeb)).collect();
        let h_reeb = mean_curv.dot(&reeb);

        let mut sigma = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    sigma[(i * m + j) * m + k] = second_fund[i * m + j].dot(&jt[k]);
                }
            }
        }
        let beta: Vec<f64> = (0..m)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        s += ginv[(i, j)] * sigma[(i * m + j) * m + k];
                    }
                }
                s
            })
            .collect();

        let mut e_n = Vec::with_capacity(m * m);
        let mut u = Vec::with_capacity(m * m);
        let mut a_hat_traceless = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let mut e = h_n.scaled(metric[(i, j)]);
                e.add_scaled(beta[i], &jt[j]);
                e.add_scaled(beta[j], &jt[i]);
                let mut uij = a_n[i * m + j].clone();
                uij.add_scaled(-1.0 / (m as f64 + 2.0), &e);
                e_n.push(e);
                u.push(uij);
                let mut ah = a_nhat[i * m + j].clone();
                ah.add_scaled(-metric[(i, j)] / m as f64, &h_nhat);
                a_hat_traceless.push(ah);
            }
        }

        Ok(Self {
            m,
            point: p.clone(),
            reeb,
            tangents,
            sqrt_det: det.sqrt(),
            metric,
            inverse_metric,
            second_fund,
            mean_curv,
            a_n,
            a_nhat,
            h_n,
            h_nhat,
            a_reeb,
            h_reeb,
            sigma,
            beta,
            e_n,
            u,
            a_hat_traceless,
        })
    }

    #[inline]
    pub fn sigma_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.sigma[(i * self.m + j) * self.m + k]
    }

    /// `|B|^2 = g^{ia} g^{jb} <B_ij, B_ab>` for a vector-valued 2-tensor.
    pub fn tensor_norm_sq(&self, b: &[AmbientVector]) -> f64 {
        let m = self.m;
        let g = &self.inverse_metric;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                for a in 0..m {
                    for c in 0..m {
                        let w = g[(i, a)] * g[(j, c)];
                        if w != 0.0 {
                            s += w * b[i * m + j].dot(&b[a * m + c]);
                        }
                    }
                }
            }
        }
        s
    }

    pub fn a_norm_sq(&self) -> f64 {
        self.tensor_norm_sq(&self.second_fund)
    }

    pub fn a_n_norm_sq(&self) -> f64 {
        self.tensor_norm_sq(&self.a_n)
    }

    pub fn a_nhat_norm_sq(&self) -> f64 {
        self.tensor_norm_sq(&self.a_nhat)
    }

    pub fn u_norm_sq(&self) -> f64 {
        self.tensor_norm_sq(&self.u)
    }

    pub fn a_hat_traceless_norm_sq(&self) -> f64 {
        self.tensor_norm_sq(&self.a_hat_traceless)
    }

    pub fn h_norm_sq(&self) -> f64 {
        self.mean_curv.norm_sq()
    }

    /// Projection onto `N_p = J(T_p Sigma)`.
    pub fn n_part(&self, v: &AmbientVector) -> AmbientVector {
        let jt: Vec<AmbientVector> = self.tangents.iter().map(AmbientVector::j).collect();
        n_part(&self.inverse_metric, &jt, v)
    }

    /// Tangential projection onto `T_p Sigma`.
    pub fn tangent_part(&self, v: &AmbientVector) -> AmbientVector {
        let m = self.m;
        let rhs: Vec<f64> = self.tangents.iter().map(|t| v.dot(t)).collect();
        let mut out = AmbientVector::zeros(self.point.dim_n());
        for k in 0..m {
            let ck: f64 = (0..m).map(|l| self.inverse_metric[(k, l)] * rhs[l]).sum();
            out.add_scaled(ck, &self.tangents[k]);
        }
        out
    }

    /// Component of `v` in the normal bundle of Sigma inside `H_p`
    /// (`N ⊕ N̂`): removes the tangential, radial and Reeb parts.
    pub fn normal_part(&self, v: &AmbientVector) -> AmbientVector {
        let mut out = v - &self.tangent_part(v);
        out.add_scaled(-out.dot(&self.point), &self.point);
        out.add_scaled(-out.dot(&self.reeb), &self.reeb);
        out
    }

    /// Trace of `U` (should vanish).
    pub fn u_trace(&self) -> AmbientVector {
        trace(&self.inverse_metric, &self.u, self.m, self.point.dim_n())
    }

    pub fn a_hat_trace(&self) -> AmbientVector {
        trace(&self.inverse_metric, &self.a_hat_traceless, self.m, self.point.dim_n())
    }

    pub fn e_trace(&self) -> AmbientVector {
        trace(&self.inverse_metric, &self.e_n, self.m, self.point.dim_n())
    }

    /// Right side of the Gauss-equation identity for the scalar curvature.
    pub fn scalar_curvature_rhs(&self) -> f64 {
        let m = self.m as f64;
        m * (m - 1.0) + (m - 1.0) / m * self.h_norm_sq()
            - self.u_norm_sq()
            - self.a_hat_traceless_norm_sq()
            - 2.0 * (m - 1.0) / (m * (m + 2.0)) * self.h_n.norm_sq()
    }
}

fn n_part(ginv: &DMatrix<f64>, jt: &[AmbientVector], v: &AmbientVector) -> AmbientVector {
    // Least squares in the (non-orthonormal) basis J(d_l phi); the Gram
    // matrix of that basis is g because J is orthogonal.
    let m = jt.len();
    let rhs = DVector::from_iterator(m, jt.iter().map(|w| v.dot(w)));
    let c = ginv * rhs;
    let mut out = AmbientVector::zeros(v.dim_n());
    for l in 0..m {
        out.add_scaled(c[l], &jt[l]);
    }
    out
}

fn trace(ginv: &DMatrix<f64>, b: &[AmbientVector], m: usize, dim_n: usize) -> AmbientVector {
    let mut out = AmbientVector::zeros(dim_n);
    for i in 0..m {
        for j in 0..m {
            out.add_scaled(ginv[(i, j)], &b[i * m + j]);
        }
    }
    out
}

pub fn fundamental_data(chart: &ImmersionChart, u: &[f64]) -> Result<FundamentalData> {
    fundamental_data_with_tol(chart, u, HORIZ_TOL)
}

pub fn fundamental_data_with_tol(
    chart: &ImmersionChart,
    u: &[f64],
    horiz_tol: f64,
) -> Result<FundamentalData> {
    let jet = chart.evaluate_jet(u)?;
    FundamentalData::from_jet(&jet, horiz_tol)
}

/// Fundamental data at a stencil point, which may lie just past a closed
/// axis end.
fn stencil_data(chart: &ImmersionChart, u: &[f64]) -> Result<FundamentalData> {
    let jet = chart.jet_unchecked(u, 2);
    check_rank(&jet)?;
    FundamentalData::from_jet(&jet, HORIZ_TOL)
}

/// Fourth-order central derivative of `f` along axis `k` at `u`.
fn five_point<F>(u: &[f64], k: usize, h: f64, mut f: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut w = u.to_vec();
    let mut at = |s: f64| -> Result<f64> {
        w[k] = u[k] + s * h;
        f(&w)
    };
    let (p2, p1, m1, m2) = (at(2.0)?, at(1.0)?, at(-1.0)?, at(-2.0)?);
    Ok((-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h))
}

/// Step used by the third-order stencils (divergence, closedness, curvature).
pub const STENCIL_STEP: f64 = 1e-3;

/// Christoffel symbols `Gamma^k_ij`, row-major `[k][i][j]`, from the
/// second-order jet (`Gamma_ij,l = <d_i d_j phi, d_l phi>`).
fn christoffel(jet: &Jet) -> Result<Vec<f64>> {
    let m = jet.m();
    let g = jet.metric();
    let ginv = g.clone().try_inverse().ok_or(Error::DegenerateMetric { det: g.determinant() })?;
    let mut first = vec![0.0; m * m * m];
    for i in 0..m {
        for j in 0..m {
            for l in 0..m {
                first[(i * m + j) * m + l] = jet.second(i, j).dot(&jet.d1[l]);
            }
        }
    }
    let mut out = vec![0.0; m * m * m];
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                out[(k * m + i) * m + j] = (0..m).map(|l| ginv[(k, l)] * first[(i * m + j) * m + l]).sum();
            }
        }
    }
    Ok(out)
}

fn scalar_curvature_at_step(chart: &ImmersionChart, u: &[f64], h: f64) -> Result<f64> {
    let m = chart.m();
    let jet0 = chart.evaluate_jet(u)?;
    let gam = christoffel(&jet0)?;
    let ginv = jet0.metric().try_inverse().ok_or(Error::DegenerateMetric { det: 0.0 })?;
    let idx = |k: usize, i: usize, j: usize| (k * m + i) * m + j;
    // dgam[a][k][i][j] = d_a Gamma^k_ij
    let mut dgam = vec![vec![0.0; m * m * m]; m];
    for (a, slot) in dgam.iter_mut().enumerate() {
        let mut w = u.to_vec();
        let mut at = |s: f64| -> Result<Vec<f64>> {
            w[a] = u[a] + s * h;
            christoffel(&chart.jet_unchecked(&w, 2))
        };
        let (p2, p1, m1, m2) = (at(2.0)?, at(1.0)?, at(-1.0)?, at(-2.0)?);
        for (t, v) in slot.iter_mut().enumerate() {
            *v = (-p2[t] + 8.0 * p1[t] - 8.0 * m1[t] + m2[t]) / (12.0 * h);
        }
    }
    // R_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik
    let mut r = 0.0;
    for i in 0..m {
        for j in 0..m {
            let mut rij = 0.0;
            for k in 0..m {
                rij += dgam[k][idx(k, i, j)] - dgam[j][idx(k, i, k)];
                for l in 0..m {
                    rij += gam[idx(k, k, l)] * gam[idx(l, i, j)] - gam[idx(k, j, l)] * gam[idx(l, i, k)];
                }
            }
            r += ginv[(i, j)] * rij;
        }
    }
    Ok(r)
}

/// Intrinsic scalar curvature (`R = 2` on the unit 2-sphere) from
/// differenced Christoffel symbols, checked at steps `h` and `h/2`.
pub fn intrinsic_scalar_curvature(chart: &ImmersionChart, u: &[f64]) -> Result<f64> {
    let coarse = scalar_curvature_at_step(chart, u, STENCIL_STEP)?;
    let fine = scalar_curvature_at_step(chart, u, 0.5 * STENCIL_STEP)?;
    let tolerance = 1e-6 * (1.0 + coarse.abs());
    if !((coarse - fine).abs() <= tolerance) {
        return Err(Error::CurvatureUnstable { coarse, fine, tolerance });
    }
    Ok(fine)
}

/// `R_intrinsic` minus the extrinsic expression for the scalar curvature.
pub fn scalar_curvature_residual(chart: &ImmersionChart, u: &[f64]) -> Result<f64> {
    let data = fundamental_data(chart, u)?;
    let r = intrinsic_scalar_curvature(chart, u)?;
    Ok(r - data.scalar_curvature_rhs())
}

/// `d_1 beta_2 - d_2 beta_1` on a chart with `m >= 2` (first two axes).
pub fn beta_curl(chart: &ImmersionChart, u: &[f64]) -> Result<f64> {
    if chart.m() < 2 {
        return Err(Error::InvalidParameter("closedness needs m >= 2".into()));
    }
    chart.check_domain(u)?;
    let h = STENCIL_STEP;
    let d1b2 = five_point(u, 0, h, |w| Ok(stencil_data(chart, w)?.beta[1]))?;
    let d2b1 = five_point(u, 1, h, |w| Ok(stencil_data(chart, w)?.beta[0]))?;
    Ok(d1b2 - d2b1)
}

/// `div_Sigma J(H^N)` at `u`. Uses `J(H^N) = -beta^#`, so the divergence
/// is `-(1/sqrt g) d_k (sqrt g g^{kj} beta_j)`.
pub fn div_j_mean_curvature_n(chart: &ImmersionChart, u: &[f64]) -> Result<f64> {
    chart.check_domain(u)?;
    let m = chart.m();
    let h = STENCIL_STEP;
    let sqrt_det = fundamental_data(chart, u)?.sqrt_det;
    let mut total = 0.0;
    for k in 0..m {
        total += five_point(u, k, h, |w| {
            let d = stencil_data(chart, w)?;
            let flux: f64 = (0..m).map(|j| d.inverse_metric[(k, j)] * d.beta[j]).sum();
            Ok(d.sqrt_det * flux)
        })?;
    }
    Ok(-total / sqrt_det)
}
