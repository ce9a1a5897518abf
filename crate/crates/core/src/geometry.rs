//! Euclidean, complex and contact structures on R^{2n+2} = C^{n+1} and on
//! the unit sphere S^{2n+1}.
//!
//! Coordinates are ordered `(x_1, .., x_{n+1}, y_1, .., y_{n+1})` with
//! `z_j = x_j + i y_j`. The complex structure follows
//! `J(d/dx_j) = -d/dy_j`, `J(d/dy_j) = d/dx_j`, so on complex coordinates
//! `J` is multiplication by `-i`.
//!
//! Sign check: with `omega = sum dx_j ^ dy_j` one has
//! `omega(d/dx, d/dy) = 1 = g(d/dx, J d/dy)`, so `omega(X, Y) = g(X, J Y)`
//! and the coordinate formula for `J` agree. The Reeb field is
//! `T = -J(X) = sum x_j d/dy_j - y_j d/dx_j` (multiplication by `i`), and
//! `theta = (1/r) dr o J` gives `theta(v) = <v, T> / r^2`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating sphere membership.
pub const SPHERE_TOL: f64 = 1e-12;

/// A point or vector of R^{2n+2}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmbientVector {
    coords: Vec<f64>,
    dim_n: usize,
}

impl AmbientVector {
    pub fn new(coords: Vec<f64>, dim_n: usize) -> Result<Self> {
        if dim_n == 0 {
            return Err(Error::InvalidParameter("ambient dimension n must be >= 1".into()));
        }
        if coords.len() != 2 * dim_n + 2 {
            return Err(Error::DimensionMismatch {
                expected: 2 * dim_n + 2,
                found: coords.len(),
            });
        }
        Ok(Self { coords, dim_n })
    }

    /// Infers `n` from the coordinate count.
    pub fn from_coords(coords: Vec<f64>) -> Result<Self> {
        let len = coords.len();
        if len < 4 || len % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "an ambient vector needs an even number >= 4 of coordinates, got {len}"
            )));
        }
        Self::new(coords, len / 2 - 1)
    }

    pub fn zeros(dim_n: usize) -> Self {
        Self { coords: vec![0.0; 2 * dim_n + 2], dim_n }
    }

    /// Standard basis vector `e_{k+1}` (zero-based `k`).
    pub fn basis(dim_n: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim_n);
        v.coords[k] = 1.0;
        v
    }

    pub fn from_complex(z: &[Complex64]) -> Self {
        let n1 = z.len();
        let mut coords = vec![0.0; 2 * n1];
        for (j, zj) in z.iter().enumerate() {
            coords[j] = zj.re;
            coords[n1 + j] = zj.im;
        }
        Self { coords, dim_n: n1 - 1 }
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        let n1 = self.dim_n + 1;
        (0..n1)
            .map(|j| Complex64::new(self.coords[j], self.coords[n1 + j]))
            .collect()
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    #[inline]
    pub fn dim_n(&self) -> usize {
        self.dim_n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coords: self.coords.iter().map(|c| c * s).collect(),
            dim_n: self.dim_n,
        }
    }

    /// `self += s * other`
    #[inline]
    pub fn add_scaled(&mut self, s: f64, other: &Self) {
        for (a, b) in self.coords.iter_mut().zip(&other.coords) {
            *a += s * b;
        }
    }

    /// `J_R v`.
    pub fn j(&self) -> Self {
        let n1 = self.dim_n + 1;
        let mut out = vec![0.0; 2 * n1];
        for k in 0..n1 {
            out[k] = self.coords[n1 + k];
            out[n1 + k] = -self.coords[k];
        }
        Self { coords: out, dim_n: self.dim_n }
    }

    pub fn max_abs(&self) -> f64 {
        self.coords.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }
}

impl Add<&AmbientVector> for &AmbientVector {
    type Output = AmbientVector;
    fn add(self, rhs: &AmbientVector) -> AmbientVector {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for AmbientVector {
    type Output = AmbientVector;
    fn add(mut self, rhs: AmbientVector) -> AmbientVector {
        self += &rhs;
        self
    }
}

impl Sub<&AmbientVector> for &AmbientVector {
    type Output = AmbientVector;
    fn sub(self, rhs: &AmbientVector) -> AmbientVector {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Sub for AmbientVector {
    type Output = AmbientVector;
    fn sub(mut self, rhs: AmbientVector) -> AmbientVector {
        self -= &rhs;
        self
    }
}

impl AddAssign<&AmbientVector> for AmbientVector {
    fn add_assign(&mut self, rhs: &AmbientVector) {
        self.add_scaled(1.0, rhs);
    }
}

impl SubAssign<&AmbientVector> for AmbientVector {
    fn sub_assign(&mut self, rhs: &AmbientVector) {
        self.add_scaled(-1.0, rhs);
    }
}

impl Neg for AmbientVector {
    type Output = AmbientVector;
    fn neg(self) -> AmbientVector {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &AmbientVector {
    type Output = AmbientVector;
    fn mul(self, s: f64) -> AmbientVector {
        self.scaled(s)
    }
}

impl Mul<f64> for AmbientVector {
    type Output = AmbientVector;
    fn mul(self, s: f64) -> AmbientVector {
        self.scaled(s)
    }
}

/// A unit vector of R^{2n+2}, i.e. a point of S^{2n+1}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    vec: AmbientVector,
}

impl SpherePoint {
    pub fn new(vec: AmbientVector) -> Result<Self> {
        let norm = vec.norm();
        if (norm - 1.0).abs() > SPHERE_TOL {
            return Err(Error::NotOnSphere { norm });
        }
        Ok(Self { vec })
    }

    /// Rescales a nonzero vector onto the sphere.
    pub fn normalize(vec: AmbientVector) -> Result<Self> {
        let norm = vec.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotOnSphere { norm });
        }
        Ok(Self { vec: vec.scaled(1.0 / norm) })
    }

    /// Skips validation; callers guarantee the norm.
    pub(crate) fn new_unchecked(vec: AmbientVector) -> Self {
        Self { vec }
    }

    #[inline]
    pub fn vec(&self) -> &AmbientVector {
        &self.vec
    }

    pub fn into_vec(self) -> AmbientVector {
        self.vec
    }

    #[inline]
    pub fn dim_n(&self) -> usize {
        self.vec.dim_n()
    }
}

/// The contact form and Reeb field of S^{2n+1} at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactData {
    pub reeb: AmbientVector,
}

impl ContactData {
    /// `theta_p(v) = <v, T(p)>` (the radius is one on the sphere).
    #[inline]
    pub fn theta_of(&self, v: &AmbientVector) -> f64 {
        v.dot(&self.reeb)
    }
}

pub fn apply_complex_structure(v: &AmbientVector) -> AmbientVector {
    v.j()
}

pub fn contact_at(p: &SpherePoint) -> ContactData {
    ContactData { reeb: -p.vec().j() }
}

/// Orthogonal projection of `v` onto `H_p = ker theta_p ∩ T_p S^{2n+1}`.
pub fn horizontal_project(p: &SpherePoint, v: &AmbientVector) -> Result<AmbientVector> {
    p.vec().check_same(v)?;
    Ok(horizontal_project_raw(p.vec(), v))
}

/// Same as [`horizontal_project`] for a position that is already known to
/// be a unit vector.
pub(crate) fn horizontal_project_raw(p: &AmbientVector, v: &AmbientVector) -> AmbientVector {
    let t = -p.j();
    let mut out = v.clone();
    out.add_scaled(-v.dot(p), p);
    out.add_scaled(-v.dot(&t), &t);
    out
}

/// Projection of `v` onto `T_p S^{2n+1}` (removes the radial part).
pub(crate) fn sphere_tangent_project(p: &AmbientVector, v: &AmbientVector) -> AmbientVector {
    let mut out = v.clone();
    out.add_scaled(-v.dot(p), p);
    out
}
