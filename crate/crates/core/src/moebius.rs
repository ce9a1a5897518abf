//! CR automorphisms of S^{2n+1}: `Psi = Psi_A ∘ Psi_b` with `A` unitary
//! and `b` in the open unit ball.
//!
//! `Psi_b` is the restriction of the holomorphic ball automorphism
//!
//! ```text
//! Phi_b(z) = [ s (z + b) + (|b|^2 + <z, b>) / (1 + s) b ] / (1 + <z, b>),
//! s = sqrt(1 - |b|^2),  <z, b> = sum conj(b_j) z_j,
//! ```
//!
//! which sends 0 to `b`, fixes `±b/|b|` and has inverse `Phi_{-b}`. Because
//! it is holomorphic its real differential commutes with `J`, and jets of
//! composed charts follow from the complex chain rule.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{horizontal_project_raw, sphere_tangent_project, AmbientVector, SpherePoint};
use crate::immersion::{
    div_j_mean_curvature_n, fundamental_data, Axis, ChartMap, FundamentalData, ImmersionChart, Jet,
};

/// Hard guard on `|b|`.
pub const BALL_GUARD: f64 = 1.0 - 1e-9;
/// Step of the finite-difference differential used by the conformality check.
pub const DPSI_FD_STEP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoebiusParam {
    b: AmbientVector,
}

impl MoebiusParam {
    pub fn new(b: AmbientVector) -> Result<Self> {
        let norm = b.norm();
        if !(norm <= BALL_GUARD) {
            return Err(Error::BallGuard { norm, limit: BALL_GUARD });
        }
        Ok(Self { b })
    }

    pub fn from_coords(coords: Vec<f64>) -> Result<Self> {
        Self::new(AmbientVector::from_coords(coords)?)
    }

    pub fn zero(dim_n: usize) -> Self {
        Self { b: AmbientVector::zeros(dim_n) }
    }

    #[inline]
    pub fn b(&self) -> &AmbientVector {
        &self.b
    }

    pub fn norm(&self) -> f64 {
        self.b.norm()
    }

    pub fn dim_n(&self) -> usize {
        self.b.dim_n()
    }

    pub fn is_zero(&self) -> bool {
        self.b.max_abs() == 0.0
    }

    /// Parameter of `Psi_b^{-1}`.
    pub fn inverse(&self) -> Self {
        Self { b: -self.b.clone() }
    }
}

/// Complex arithmetic form of `Phi_b`, precomputed per parameter.
#[derive(Clone, Debug)]
struct PhiB {
    b: Vec<Complex64>,
    s: f64,
    nb2: f64,
}

impl PhiB {
    fn new(p: &MoebiusParam) -> Self {
        let nb2 = p.b.norm_sq();
        Self { b: p.b.to_complex(), s: (1.0 - nb2).sqrt(), nb2 }
    }

    #[inline]
    fn pair(&self, z: &[Complex64]) -> Complex64 {
        self.b.iter().zip(z).map(|(b, z)| b.conj() * z).sum()
    }

    fn numerator(&self, z: &[Complex64], bz: Complex64) -> Vec<Complex64> {
        let c = (self.nb2 + bz) / (1.0 + self.s);
        z.iter()
            .zip(&self.b)
            .map(|(z, b)| self.s * (z + b) + c * b)
            .collect()
    }

    fn eval(&self, z: &[Complex64]) -> Vec<Complex64> {
        let bz = self.pair(z);
        let d = Complex64::new(1.0, 0.0) + bz;
        self.numerator(z, bz).into_iter().map(|n| n / d).collect()
    }

    /// Value, and differentials applied to the given directions, plus the
    /// symmetric second differential on all pairs (row-major).
    fn jet(
        &self,
        z: &[Complex64],
        dirs: &[Vec<Complex64>],
        second: &[Vec<Complex64>],
        want_second: bool,
    ) -> (Vec<Complex64>, Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
        let m = dirs.len();
        let bz = self.pair(z);
        let d = Complex64::new(1.0, 0.0) + bz;
        let dinv = 1.0 / d;
        let nvec = self.numerator(z, bz);
        let value: Vec<Complex64> = nvec.iter().map(|x| x * dinv).collect();
        let dn = |v: &[Complex64], bv: Complex64| -> Vec<Complex64> {
            let c = bv / (1.0 + self.s);
            v.iter().zip(&self.b).map(|(v, b)| self.s * v + c * b).collect()
        };
        // dPhi[v] = dN[v]/D - N <v>/D^2 = (dN[v] - Phi <v>)/D
        let dphi = |v: &[Complex64]| -> Vec<Complex64> {
            let bv = self.pair(v);
            dn(v, bv)
                .iter()
                .zip(&value)
                .map(|(a, f)| (a - f * bv) * dinv)
                .collect()
        };
        let pairs: Vec<Complex64> = dirs.iter().map(|v| self.pair(v)).collect();
        let dns: Vec<Vec<Complex64>> = dirs.iter().zip(&pairs).map(|(v, bv)| dn(v, *bv)).collect();
        let d1: Vec<Vec<Complex64>> = dirs.iter().map(|v| dphi(v)).collect();
        let mut d2 = Vec::new();
        if want_second {
            d2.reserve(m * m);
            let d2inv = dinv * dinv;
            let d3inv = d2inv * dinv;
            for i in 0..m {
                for j in 0..m {
                    let first = dphi(&second[i * m + j]);
                    let (pi, pj) = (pairs[i], pairs[j]);
                    let v: Vec<Complex64> = (0..z.len())
                        .map(|c| {
                            first[c] - (dns[i][c] * pj + dns[j][c] * pi) * d2inv
                                + 2.0 * nvec[c] * pi * pj * d3inv
                        })
                        .collect();
                    d2.push(v);
                }
            }
        }
        (value, d1, d2)
    }
}

/// `Psi_b(z)` for a point of the sphere.
pub fn apply_psi_b(b: &MoebiusParam, z: &SpherePoint) -> Result<SpherePoint> {
    if b.dim_n() != z.dim_n() {
        return Err(Error::DimensionMismatch { expected: b.b.len(), found: z.vec().len() });
    }
    let w = psi_b_raw(b, z.vec());
    let norm = w.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return SpherePoint::normalize(w);
    }
    Ok(SpherePoint::new_unchecked(w))
}

/// `Phi_b` on an arbitrary ambient vector (no sphere check).
pub fn psi_b_raw(b: &MoebiusParam, z: &AmbientVector) -> AmbientVector {
    if b.is_zero() {
        return z.clone();
    }
    AmbientVector::from_complex(&PhiB::new(b).eval(&z.to_complex()))
}

/// Analytic real differential `dPsi_b(z)[v]`.
pub fn dpsi_b(b: &MoebiusParam, z: &AmbientVector, v: &AmbientVector) -> AmbientVector {
    if b.is_zero() {
        return v.clone();
    }
    let (_, d1, _) = PhiB::new(b).jet(&z.to_complex(), &[v.to_complex()], &[], false);
    AmbientVector::from_complex(&d1[0])
}

/// Central-difference differential with step [`DPSI_FD_STEP`], projected
/// to the tangent space of the sphere at the image point.
pub fn dpsi_b_fd(b: &MoebiusParam, z: &AmbientVector, v: &AmbientVector) -> AmbientVector {
    let h = DPSI_FD_STEP;
    let mut zp = z.clone();
    zp.add_scaled(h, v);
    let mut zm = z.clone();
    zm.add_scaled(-h, v);
    let d = (&psi_b_raw(b, &zp) - &psi_b_raw(b, &zm)).scaled(0.5 / h);
    sphere_tangent_project(&psi_b_raw(b, z), &d)
}

/// `W_b(z) = (1 - |b|^2) / |1 + <z, b>|^2`.
pub fn weight(b: &MoebiusParam, z: &SpherePoint) -> f64 {
    weight_raw(b, z.vec())
}

#[inline]
pub fn weight_raw(b: &MoebiusParam, x: &AmbientVector) -> f64 {
    weight_coords(b.b.coords(), x.coords())
}

/// Weight from raw coordinate slices; the hot loop of the CR-volume
/// objective.
#[inline]
pub fn weight_coords(b: &[f64], x: &[f64]) -> f64 {
    let n1 = b.len() / 2;
    let (mut re, mut im, mut nb2) = (1.0, 0.0, 0.0);
    for k in 0..n1 {
        let (bx, by, xx, xy) = (b[k], b[n1 + k], x[k], x[n1 + k]);
        re += bx * xx + by * xy;
        im += bx * xy - by * xx;
        nb2 += bx * bx + by * by;
    }
    (1.0 - nb2) / (re * re + im * im)
}

/// Euclidean gradient of the extension
/// `W_b^{-1}(X) = ((1 + b.X)^2 + (J b.X)^2) / (1 - |b|^2)`.
pub fn grad_weight_inv(b: &MoebiusParam, x: &AmbientVector) -> AmbientVector {
    let jb = b.b.j();
    let c = 2.0 / (1.0 - b.b.norm_sq());
    let mut g = b.b.scaled(c * (1.0 + b.b.dot(x)));
    g.add_scaled(c * jb.dot(x), &jb);
    g
}

/// `S_b = -(1/2) J (grad^H log W_b)`.
pub fn s_field(b: &MoebiusParam, p: &SpherePoint) -> AmbientVector {
    s_field_raw(b, p.vec())
}

pub(crate) fn s_field_raw(b: &MoebiusParam, p: &AmbientVector) -> AmbientVector {
    let w = weight_raw(b, p);
    let grad_log_w = grad_weight_inv(b, p).scaled(-w);
    horizontal_project_raw(p, &grad_log_w).j().scaled(-0.5)
}

/// Unitary matrix of size `n+1`, stored in its real `2(n+1)` form
/// `[[Re A, -Im A], [Im A, Re A]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryMatrix {
    real: DMatrix<f64>,
    dim_n: usize,
}

impl UnitaryMatrix {
    pub fn identity(dim_n: usize) -> Self {
        Self { real: DMatrix::identity(2 * dim_n + 2, 2 * dim_n + 2), dim_n }
    }

    pub fn from_complex(a: &DMatrix<Complex64>) -> Result<Self> {
        let n1 = a.nrows();
        if a.ncols() != n1 || n1 < 2 {
            return Err(Error::InvalidParameter("unitary must be square of size >= 2".into()));
        }
        let mut real = DMatrix::zeros(2 * n1, 2 * n1);
        for r in 0..n1 {
            for c in 0..n1 {
                let z = a[(r, c)];
                real[(r, c)] = z.re;
                real[(r, n1 + c)] = -z.im;
                real[(n1 + r, c)] = z.im;
                real[(n1 + r, n1 + c)] = z.re;
            }
        }
        let u = Self { real, dim_n: n1 - 1 };
        let res = u.orthogonality_residual();
        if res > 1e-9 {
            return Err(Error::Numerical(format!("matrix is not unitary (residual {res:e})")));
        }
        Ok(u)
    }

    /// Accepts a real `2(n+1)` matrix that must be orthogonal and commute
    /// with `J` to 1e-12.
    pub fn from_real(real: DMatrix<f64>) -> Result<Self> {
        let d = real.nrows();
        if real.ncols() != d || d < 4 || d % 2 != 0 {
            return Err(Error::InvalidParameter("bad real unitary shape".into()));
        }
        let u = Self { real, dim_n: d / 2 - 1 };
        if u.orthogonality_residual() > 1e-12 || u.j_commutator_residual() > 1e-12 {
            return Err(Error::InvalidParameter("matrix is not a J-commuting orthogonal matrix".into()));
        }
        Ok(u)
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        let n1 = self.dim_n + 1;
        DMatrix::from_fn(n1, n1, |r, c| Complex64::new(self.real[(r, c)], self.real[(n1 + r, c)]))
    }

    pub fn real(&self) -> &DMatrix<f64> {
        &self.real
    }

    pub fn dim_n(&self) -> usize {
        self.dim_n
    }

    pub fn apply(&self, v: &AmbientVector) -> AmbientVector {
        let d = self.real.nrows();
        let x = v.coords();
        let mut out = vec![0.0; d];
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for c in 0..d {
                s += self.real[(r, c)] * x[c];
            }
            *o = s;
        }
        AmbientVector::new(out, self.dim_n).expect("dimension preserved")
    }

    pub fn inverse(&self) -> Self {
        Self { real: self.real.transpose(), dim_n: self.dim_n }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self { real: &self.real * &other.real, dim_n: self.dim_n }
    }

    pub fn is_identity(&self) -> bool {
        let d = self.real.nrows();
        (&self.real - DMatrix::<f64>::identity(d, d)).amax() == 0.0
    }

    /// `max |M^T M - I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let d = self.real.nrows();
        (self.real.transpose() * &self.real - DMatrix::<f64>::identity(d, d)).amax()
    }

    /// `max |M J - J M|`.
    pub fn j_commutator_residual(&self) -> f64 {
        let d = self.real.nrows();
        let n1 = d / 2;
        let j = DMatrix::from_fn(d, d, |r, c| {
            if r < n1 && c == r + n1 {
                1.0
            } else if r >= n1 && c + n1 == r {
                -1.0
            } else {
                0.0
            }
        });
        (&self.real * &j - &j * &self.real).amax()
    }
}

/// Complex Gram-Schmidt on the columns, in order. Columns that become
/// numerically dependent are an error.
fn complex_gram_schmidt(cols: &mut [Vec<Complex64>]) -> Result<()> {
    for i in 0..cols.len() {
        for _ in 0..2 {
            for j in 0..i {
                let proj: Complex64 = cols[j].iter().zip(&cols[i]).map(|(a, b)| a.conj() * b).sum();
                let qj = cols[j].clone();
                for (x, q) in cols[i].iter_mut().zip(&qj) {
                    *x -= proj * q;
                }
            }
        }
        let norm: f64 = cols[i].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 1e-10) {
            return Err(Error::RankDeficient { sigma_min: norm });
        }
        for x in cols[i].iter_mut() {
            *x /= norm;
        }
    }
    Ok(())
}

/// Completes complex-orthonormal columns to a unitary basis of `C^{n+1}`
/// using standard basis vectors; returns all `n+1` columns.
fn complete_basis(mut cols: Vec<Vec<Complex64>>, n1: usize) -> Result<Vec<Vec<Complex64>>> {
    complex_gram_schmidt(&mut cols)?;
    let mut k = 0;
    while cols.len() < n1 && k < n1 {
        let mut e = vec![Complex64::new(0.0, 0.0); n1];
        e[k] = Complex64::new(1.0, 0.0);
        let mut trial = cols.clone();
        trial.push(e);
        if complex_gram_schmidt(&mut trial).is_ok() {
            cols = trial;
        }
        k += 1;
    }
    if cols.len() != n1 {
        return Err(Error::Numerical("failed to complete a unitary basis".into()));
    }
    Ok(cols)
}

fn matrix_from_columns(cols: &[Vec<Complex64>]) -> DMatrix<Complex64> {
    let n1 = cols.len();
    DMatrix::from_fn(n1, n1, |r, c| cols[c][r])
}

/// Haar-like random unitary: complex Gaussian matrix orthonormalized by
/// complex Gram-Schmidt; deterministic in `seed`.
pub fn random_unitary(dim_n: usize, seed: u64) -> UnitaryMatrix {
    let n1 = dim_n + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut cols: Vec<Vec<Complex64>> = (0..n1)
            .map(|_| {
                (0..n1)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(re, im)
                    })
                    .collect()
            })
            .collect();
        if complex_gram_schmidt(&mut cols).is_ok() {
            return UnitaryMatrix::from_complex(&matrix_from_columns(&cols))
                .expect("Gram-Schmidt output is unitary");
        }
    }
}

/// A full CR automorphism `Psi_A ∘ Psi_b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrAutomorphism {
    pub unitary: UnitaryMatrix,
    pub b: MoebiusParam,
}

impl CrAutomorphism {
    pub fn new(unitary: UnitaryMatrix, b: MoebiusParam) -> Result<Self> {
        if unitary.dim_n() != b.dim_n() {
            return Err(Error::DimensionMismatch {
                expected: 2 * unitary.dim_n() + 2,
                found: b.b.len(),
            });
        }
        Ok(Self { unitary, b })
    }

    pub fn identity(dim_n: usize) -> Self {
        Self { unitary: UnitaryMatrix::identity(dim_n), b: MoebiusParam::zero(dim_n) }
    }

    pub fn from_b(b: MoebiusParam) -> Self {
        Self { unitary: UnitaryMatrix::identity(b.dim_n()), b }
    }

    pub fn from_unitary(unitary: UnitaryMatrix) -> Self {
        let n = unitary.dim_n();
        Self { unitary, b: MoebiusParam::zero(n) }
    }

    pub fn dim_n(&self) -> usize {
        self.b.dim_n()
    }

    pub fn apply_raw(&self, z: &AmbientVector) -> AmbientVector {
        self.unitary.apply(&psi_b_raw(&self.b, z))
    }

    pub fn apply(&self, z: &SpherePoint) -> Result<SpherePoint> {
        let w = apply_psi_b(&self.b, z)?;
        SpherePoint::normalize(self.unitary.apply(w.vec()))
    }

    /// `(Psi_A ∘ Psi_b)^{-1} = Psi_{A^H} ∘ Psi_{-A b}`.
    pub fn inverse(&self) -> Self {
        let ab = self.unitary.apply(self.b.b());
        Self { unitary: self.unitary.inverse(), b: MoebiusParam { b: -ab } }
    }

    /// Jet of `Psi ∘ phi` from a jet of `phi`.
    pub fn push_jet(&self, jet: &Jet, order: usize) -> Jet {
        let want_second = order >= 2 && jet.has_second();
        let (point, d1, d2) = if self.b.is_zero() {
            (jet.point.clone(), jet.d1.clone(), if want_second { jet.d2.clone() } else { Vec::new() })
        } else {
            let phi = PhiB::new(&self.b);
            let z = jet.point.to_complex();
            let dirs: Vec<Vec<Complex64>> = jet.d1.iter().map(AmbientVector::to_complex).collect();
            let second: Vec<Vec<Complex64>> = if want_second {
                jet.d2.iter().map(AmbientVector::to_complex).collect()
            } else {
                Vec::new()
            };
            let (v, d1, d2) = phi.jet(&z, &dirs, &second, want_second);
            (
                AmbientVector::from_complex(&v),
                d1.iter().map(|c| AmbientVector::from_complex(c)).collect(),
                d2.iter().map(|c| AmbientVector::from_complex(c)).collect(),
            )
        };
        if self.unitary.is_identity() {
            return Jet { point, d1, d2 };
        }
        let a = &self.unitary;
        Jet {
            point: a.apply(&point),
            d1: d1.iter().map(|v| a.apply(v)).collect(),
            d2: d2.iter().map(|v| a.apply(v)).collect(),
        }
    }
}

struct ComposedMap {
    base: Arc<dyn ChartMap>,
    aut: CrAutomorphism,
}

impl ChartMap for ComposedMap {
    fn eval(&self, u: &[f64]) -> AmbientVector {
        self.aut.apply_raw(&self.base.eval(u))
    }

    fn jet(&self, u: &[f64], order: usize) -> Option<Jet> {
        let inner = self.base.jet(u, order)?;
        Some(self.aut.push_jet(&inner, order))
    }
}

/// The chart `Psi ∘ phi`; analytic jets are kept when the base has them.
pub fn compose_chart(chart: &ImmersionChart, aut: &CrAutomorphism) -> Result<ImmersionChart> {
    if aut.dim_n() != chart.dim_n() {
        return Err(Error::DimensionMismatch {
            expected: 2 * chart.dim_n() + 2,
            found: 2 * aut.dim_n() + 2,
        });
    }
    let map = Arc::new(ComposedMap { base: chart.map().clone(), aut: aut.clone() });
    let axes: Vec<Axis> = chart.axes().to_vec();
    Ok(ImmersionChart::new(format!("psi({})", chart.name()), chart.dim_n(), axes, map)?
        .with_fd_step(chart.fd_step()))
}

/// Max over the given nodes of
/// `|<dPsi_b d_i phi, dPsi_b d_j phi> - W_b <d_i phi, d_j phi>|`, with
/// `dPsi_b` by central differences.
pub fn pullback_conformal_residual<'a, I>(b: &MoebiusParam, chart: &ImmersionChart, nodes: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut worst = 0.0f64;
    for u in nodes {
        let jet = chart.jet_of_order(u, 1)?;
        let w = weight_raw(b, &jet.point);
        let pushed: Vec<AmbientVector> = jet.d1.iter().map(|v| dpsi_b_fd(b, &jet.point, v)).collect();
        let m = jet.m();
        for i in 0..m {
            for j in i..m {
                let lhs = pushed[i].dot(&pushed[j]);
                let rhs = w * jet.d1[i].dot(&jet.d1[j]);
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Mean curvature of Sigma with respect to `Psi_b^* g_S`:
/// `(1/W) H - (2/W) J(S^T) - (m/W) (J S)^perp`.
pub fn mean_curvature_transform_rhs(b: &MoebiusParam, data: &FundamentalData) -> AmbientVector {
    let p = &data.point;
    let w = weight_raw(b, p);
    let s = s_field_raw(b, p);
    let s_tan = data.tangent_part(&s);
    let js_perp = data.normal_part(&s.j());
    let mut h = data.mean_curv.clone();
    h.add_scaled(-2.0, &s_tan.j());
    h.add_scaled(-(data.m as f64), &js_perp);
    h.scaled(1.0 / w)
}

/// The Legendrian simplifications `(1/W) H - ((m+2)/W) (J S)^perp` and
/// `(1/W) H - ((m+2)/W) J(S^T)`.
pub fn mean_curvature_transform_rhs_legendrian(
    b: &MoebiusParam,
    data: &FundamentalData,
) -> (AmbientVector, AmbientVector) {
    let p = &data.point;
    let w = weight_raw(b, p);
    let s = s_field_raw(b, p);
    let k = data.m as f64 + 2.0;
    let mut first = data.mean_curv.clone();
    first.add_scaled(-k, &data.normal_part(&s.j()));
    let mut second = data.mean_curv.clone();
    second.add_scaled(-k, &data.tangent_part(&s).j());
    (first.scaled(1.0 / w), second.scaled(1.0 / w))
}

/// The transform law pushed to the image: the predicted mean curvature of
/// `Psi_b(Sigma)` at `Psi_b(p)`.
pub fn predicted_image_mean_curvature(b: &MoebiusParam, data: &FundamentalData) -> AmbientVector {
    dpsi_b(b, &data.point, &mean_curvature_transform_rhs(b, data))
}

/// Right side of the transformation formula for `div J(H^N)` under `Psi_b`.
pub fn div_transform_rhs(b: &MoebiusParam, chart: &ImmersionChart, u: &[f64]) -> Result<f64> {
    let data = fundamental_data(chart, u)?;
    let gamma = div_j_mean_curvature_n(chart, u)?;
    Ok(div_transform_rhs_from(b, &data, gamma))
}

pub(crate) fn div_transform_rhs_from(b: &MoebiusParam, data: &FundamentalData, gamma: f64) -> f64 {
    let m = data.m as f64;
    let p = &data.point;
    let w = weight_raw(b, p);
    let s = s_field_raw(b, p);
    let grad = grad_weight_inv(b, p);
    let grad_sigma = data.tangent_part(&grad);
    let grad_sphere = sphere_tangent_project(p, &grad);
    let first = (gamma + 2.0 * m * s.dot(&data.h_n) + (m + 2.0) * s.dot(&data.h_nhat)) / w;
    let second = m * (m + 2.0) / 4.0 * w * grad_sigma.dot(&grad_sphere.j());
    let third = m * (m + 2.0) / (1.0 - b.b().norm_sq()) * b.b().j().dot(p);
    first - second - third
}

/// Which closed-form stage parameters to use in [`normalize_at_point`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageFormulas {
    /// Parameters solving the stage equations with `J S_b(p) =
    /// -beta v / (1 + alpha)`, which is what the weight gradient gives.
    #[default]
    Consistent,
    /// The alternative coefficients `-4|v|^2/(k^2+4|v|^2)`, `-2k/(k^2+4|v|^2)`;
    /// they reverse `v` instead of cancelling it.
    Reversing,
}

fn stage_coefficients(v_norm_sq: f64, k: f64, formulas: StageFormulas) -> (f64, f64) {
    match formulas {
        StageFormulas::Consistent => {
            let d = k * k + v_norm_sq;
            (-v_norm_sq / d, -k / d)
        }
        StageFormulas::Reversing => {
            let d = k * k + 4.0 * v_norm_sq;
            (-4.0 * v_norm_sq / d, -2.0 * k / d)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub b: Vec<f64>,
    pub mean_curvature_norm: f64,
    pub div_j_h_n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub point: Vec<f64>,
    pub stages: Vec<StageRecord>,
    /// Largest deviation of the final map from fixing `p` and acting as
    /// `sqrt(W)` times the identity on `T_p Sigma`.
    pub frame_residual: f64,
    pub final_mean_curvature_norm: f64,
    pub final_div_j_h_n: f64,
}

/// Unitary `A` with `A Psi_b(p) = p` and `A dPsi_b(p) = sqrt(W_b(p)) I` on
/// `H_p`. It is unique: `A = P Q^H` with `P = [p, h_1..h_n]` any complex
/// basis adapted to `H_p` and `Q` its image normalized by `sqrt(W)`.
pub fn realigning_unitary(b: &MoebiusParam, p: &AmbientVector) -> Result<UnitaryMatrix> {
    let n1 = p.dim_n() + 1;
    if b.is_zero() {
        return Ok(UnitaryMatrix::identity(p.dim_n()));
    }
    let pc = p.to_complex();
    let pcols = complete_basis(vec![pc.clone()], n1)?;
    let phi = PhiB::new(b);
    let (q0, dq, _) = phi.jet(&pc, &pcols[1..], &[], false);
    let w = weight_raw(b, p);
    let mut qcols = vec![q0];
    qcols.extend(dq.into_iter().map(|c| c.into_iter().map(|z| z / w.sqrt()).collect::<Vec<_>>()));
    let pm = matrix_from_columns(&pcols);
    let qm = matrix_from_columns(&qcols);
    let a = &pm * qm.adjoint();
    UnitaryMatrix::from_complex(&a)
}

/// Finds a CR automorphism fixing `p = phi(u)` and `T_p Sigma` after which
/// the image has vanishing mean curvature and `div J(H^N)` at `p`.
///
/// Returns the factors in application order (first element applied
/// first): the aligning rotation, the three stages, the inverse rotation.
pub fn normalize_at_point(
    chart: &ImmersionChart,
    u: &[f64],
) -> Result<(Vec<CrAutomorphism>, NormalizationReport)> {
    normalize_at_point_with(chart, u, StageFormulas::Consistent)
}

pub fn normalize_at_point_with(
    chart: &ImmersionChart,
    u: &[f64],
    formulas: StageFormulas,
) -> Result<(Vec<CrAutomorphism>, NormalizationReport)> {
    let n = chart.dim_n();
    let n1 = n + 1;
    let m = chart.m() as f64;
    let data0 = fundamental_data(chart, u)?;
    let p = data0.point.clone();

    // Rotation sending p -> e_1 and an orthonormal tangent frame to e_2..e_{m+1}.
    let mut frame: Vec<Vec<Complex64>> = vec![p.to_complex()];
    frame.extend(data0.tangents.iter().map(AmbientVector::to_complex));
    let cols = complete_basis(frame, n1)?;
    let q = matrix_from_columns(&cols);
    let rot = UnitaryMatrix::from_complex(&q.adjoint())?;
    let rot_aut = CrAutomorphism::from_unitary(rot.clone());

    let mut factors = vec![rot_aut.clone()];
    let mut current = compose_chart(chart, &rot_aut)?;
    let e1 = AmbientVector::basis(n, 0);
    let en2 = AmbientVector::basis(n, n + 1);
    let mut stages = Vec::new();
    let record = |name: &str, b: &MoebiusParam, c: &ImmersionChart| -> Result<StageRecord> {
        let d = fundamental_data(c, u)?;
        Ok(StageRecord {
            stage: name.to_string(),
            b: b.b().coords().to_vec(),
            mean_curvature_norm: d.mean_curv.norm(),
            div_j_h_n: div_j_mean_curvature_n(c, u)?,
        })
    };
    stages.push(record("input", &MoebiusParam::zero(n), &current)?);

    let apply_stage = |b: MoebiusParam, current: &mut ImmersionChart, factors: &mut Vec<CrAutomorphism>| -> Result<()> {
        let a = realigning_unitary(&b, &e1)?;
        let aut = CrAutomorphism::new(a, b)?;
        *current = compose_chart(current, &aut)?;
        factors.push(aut);
        Ok(())
    };

    // Stage 1: remove H^N̂.
    let d = fundamental_data(&current, u)?;
    let v1 = d.h_nhat.clone();
    let (a1, b1) = stage_coefficients(v1.norm_sq(), m, formulas);
    let mut bv = e1.scaled(a1);
    bv.add_scaled(b1, &v1);
    let b_stage = MoebiusParam::new(bv)?;
    apply_stage(b_stage.clone(), &mut current, &mut factors)?;
    stages.push(record("stage1", &b_stage, &current)?);

    // Stage 2: remove H (now equal to H^N at p).
    let d = fundamental_data(&current, u)?;
    let v2 = d.mean_curv.clone();
    let (a2, b2) = stage_coefficients(v2.norm_sq(), m + 2.0, formulas);
    let mut bv = e1.scaled(a2);
    bv.add_scaled(b2, &v2);
    let b_stage = MoebiusParam::new(bv)?;
    apply_stage(b_stage.clone(), &mut current, &mut factors)?;
    stages.push(record("stage2", &b_stage, &current)?);

    // Stage 3: remove div J(H^N) using b in span{e_1, e_{n+2}}.
    let gamma = div_j_mean_curvature_n(&current, u)?;
    let k = m * (m + 2.0);
    let den = gamma * gamma + k * k;
    let mut bv = e1.scaled(-gamma * gamma / den);
    bv.add_scaled(k * gamma / den, &en2);
    let b_stage = MoebiusParam::new(bv)?;
    apply_stage(b_stage.clone(), &mut current, &mut factors)?;
    stages.push(record("stage3", &b_stage, &current)?);

    let unrot = CrAutomorphism::from_unitary(rot.inverse());
    current = compose_chart(&current, &unrot)?;
    factors.push(unrot);

    let fin = fundamental_data(&current, u)?;
    let final_div = div_j_mean_curvature_n(&current, u)?;
    // The composite should fix p and act conformally on T_p Sigma.
    let mut frame_residual = (&fin.point - &p).max_abs();
    let ratio = fin.metric[(0, 0)] / data0.metric[(0, 0)];
    for (t_new, t_old) in fin.tangents.iter().zip(&data0.tangents) {
        frame_residual = frame_residual.max((t_new - &t_old.scaled(ratio.sqrt())).max_abs());
    }
    let report = NormalizationReport {
        point: p.coords().to_vec(),
        stages,
        frame_residual,
        final_mean_curvature_norm: fin.mean_curv.norm(),
        final_div_j_h_n: final_div,
    };
    Ok((factors, report))
}

/// Applies a list of automorphisms in order to a chart.
pub fn compose_all(chart: &ImmersionChart, factors: &[CrAutomorphism]) -> Result<ImmersionChart> {
    let mut c = chart.clone();
    for f in factors {
        c = compose_chart(&c, f)?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn e(n: usize, k: usize) -> AmbientVector {
        AmbientVector::basis(n, k)
    }

    #[test]
    fn guard_rejects_boundary() {
        assert!(MoebiusParam::new(e(2, 0).scaled(1.0)).is_err());
        assert!(MoebiusParam::new(e(2, 0).scaled(0.999_999)).is_ok());
    }

    #[test]
    fn weight_examples() {
        let b = MoebiusParam::new(e(2, 0).scaled(0.5)).unwrap();
        let z = SpherePoint::new(e(2, 0)).unwrap();
        assert_abs_diff_eq!(weight(&b, &z), 1.0 / 3.0, epsilon = 1e-15);
        let z = SpherePoint::new(e(2, 0).scaled(-1.0)).unwrap();
        assert_abs_diff_eq!(weight(&b, &z), 3.0, epsilon = 1e-14);
        let zero = MoebiusParam::zero(2);
        assert_eq!(weight(&zero, &z), 1.0);
    }

    #[test]
    fn psi_fixes_b_direction_and_sends_zero_to_b() {
        let b = MoebiusParam::new(e(2, 0).scaled(0.5)).unwrap();
        let z = SpherePoint::new(e(2, 0)).unwrap();
        let w = apply_psi_b(&b, &z).unwrap();
        assert!((w.vec() - &e(2, 0)).max_abs() < 1e-15);
        let origin = psi_b_raw(&b, &AmbientVector::zeros(2));
        assert!((&origin - b.b()).max_abs() < 1e-15);
    }

    #[test]
    fn minus_b_inverts() {
        let b = MoebiusParam::from_coords(vec![0.1, -0.3, 0.2, 0.25, 0.05, -0.4]).unwrap();
        let z = SpherePoint::normalize(AmbientVector::from_coords(vec![0.3, 0.1, -0.5, 0.7, 0.2, 0.1]).unwrap()).unwrap();
        let w = apply_psi_b(&b, &z).unwrap();
        let back = apply_psi_b(&b.inverse(), &w).unwrap();
        assert!((back.vec() - z.vec()).max_abs() < 1e-14);
    }

    #[test]
    fn analytic_differential_matches_fd() {
        let b = MoebiusParam::from_coords(vec![0.1, -0.3, 0.2, 0.25, 0.05, -0.4]).unwrap();
        let z = AmbientVector::from_coords(vec![0.3, 0.1, -0.5, 0.7, 0.2, 0.1]).unwrap().scaled(0.8);
        let v = AmbientVector::from_coords(vec![0.2, -0.1, 0.4, 0.0, 0.3, -0.2]).unwrap();
        let h = 1e-6;
        let mut zp = z.clone();
        zp.add_scaled(h, &v);
        let mut zm = z.clone();
        zm.add_scaled(-h, &v);
        let fd = (&psi_b_raw(&b, &zp) - &psi_b_raw(&b, &zm)).scaled(0.5 / h);
        assert!((&fd - &dpsi_b(&b, &z, &v)).max_abs() < 1e-8);
    }

    #[test]
    fn unitary_round_trip_and_inverse() {
        let u = random_unitary(2, 11);
        assert!(u.orthogonality_residual() < 1e-12);
        assert!(u.j_commutator_residual() < 1e-12);
        let back = UnitaryMatrix::from_complex(&u.to_complex()).unwrap();
        assert_eq!(back, u);
        assert!(u.compose(&u.inverse()).orthogonality_residual() < 1e-12);
        assert_eq!(random_unitary(2, 11), u);
        assert_ne!(random_unitary(2, 12), u);
    }

    #[test]
    fn automorphism_inverse() {
        let aut = CrAutomorphism::new(
            random_unitary(2, 3),
            MoebiusParam::from_coords(vec![0.2, 0.1, -0.3, 0.0, 0.4, 0.1]).unwrap(),
        )
        .unwrap();
        let z = AmbientVector::from_coords(vec![0.5, 0.5, 0.5, 0.5, 0.0, 0.0]).unwrap();
        let back = aut.inverse().apply_raw(&aut.apply_raw(&z));
        assert!((&back - &z).max_abs() < 1e-14);
    }

    #[test]
    fn realigning_unitary_fixes_point_and_is_conformal() {
        let n = 2;
        let b = MoebiusParam::from_coords(vec![-0.3, 0.1, 0.2, 0.15, -0.2, 0.1]).unwrap();
        let p = e(n, 0);
        let a = realigning_unitary(&b, &p).unwrap();
        let aut = CrAutomorphism::new(a, b.clone()).unwrap();
        assert!((&aut.apply_raw(&p) - &p).max_abs() < 1e-13);
        let w = weight_raw(&b, &p);
        for k in [1, 2, 4, 5] {
            let h = e(n, k);
            let img = aut.unitary.apply(&dpsi_b(&b, &p, &h));
            assert!((&img - &h.scaled(w.sqrt())).max_abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn stage_coefficients_solve_their_equations() {
        for (v2, k) in [(0.3, 2.0), (4.0, 4.0), (25.0, 3.0)] {
            let (a, b) = stage_coefficients(v2, k, StageFormulas::Consistent);
            assert_abs_diff_eq!(1.0 + k * b / (1.0 + a), 0.0, epsilon = 1e-14);
            assert!(a * a + b * b * v2 < 1.0);
            let (a, b) = stage_coefficients(v2, k, StageFormulas::Reversing);
            // reversing coefficients give factor 1 + k beta / (1 + alpha) = -1
            assert_abs_diff_eq!(1.0 + k * b / (1.0 + a), -1.0, epsilon = 1e-14);
        }
    }
}
