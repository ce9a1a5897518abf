//! Numerical CR geometry of horizontal submanifolds of `S^{2n+1} ⊂ C^{n+1}`.
//!
//! Points of `C^{n+1}` are stored as real vectors `(x_1..x_{n+1}, y_1..y_{n+1})`.
//! The main entry points:
//!
//! - [`catalog::make_chart`] builds example charts,
//! - [`immersion::fundamental_data`] gives curvature data at a point,
//! - [`moebius`] holds CR automorphisms and their transformation laws,
//! - [`functionals`] computes CR-volume, CR-Willmore energy and friends,
//! - [`asymptotics`] has the degeneration expansion and its special integrals.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod catalog;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod immersion;
pub mod integration;
pub mod moebius;
pub mod optimize;
pub mod verify;

pub use catalog::{make_chart, ChartParams};
pub use error::{Error, Result};
pub use geometry::{AmbientVector, SpherePoint};
pub use immersion::{fundamental_data, Axis, ChartMap, FundamentalData, ImmersionChart, Jet};
pub use integration::{build_grid, QuadratureGrid};
pub use moebius::{CrAutomorphism, MoebiusParam, UnitaryMatrix};
