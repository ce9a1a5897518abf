use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point is not on the unit sphere (|v| = {norm})")]
    NotOnSphere { norm: f64 },

    #[error("parameter point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("differential is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("chart is not horizontal: contact residual {residual:e} exceeds {tolerance:e}")]
    NotHorizontal { residual: f64, tolerance: f64 },

    #[error("induced metric is degenerate (det = {det:e})")]
    DegenerateMetric { det: f64 },

    #[error("|b| = {norm} violates the ball guard |b| <= {limit}")]
    BallGuard { norm: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("finite-difference curvature is unstable: estimates {coarse} and {fine} differ by more than {tolerance:e}")]
    CurvatureUnstable { coarse: f64, fine: f64, tolerance: f64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("iteration stagnated with residual {residual:e}")]
    Stagnation { residual: f64 },

    #[error("unknown chart `{0}`")]
    UnknownChart(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
