use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed tridiagonal matrix: {0}")]
    MalformedMatrix(String),

    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    #[error("adaptive quadrature hit the subdivision limit (value {value:e}, error estimate {error_estimate:e})")]
    MaxSubdivisions { value: f64, error_estimate: f64 },

    #[error("degenerate or mis-ordered semiaxes ({a}, {b}, {c}); need 0 < c < b < a with distinct values")]
    DegenerateEllipsoid { a: f64, b: f64, c: f64 },

    #[error("cartesian/ellipsoidal round trip failed for ({x}, {y}, {z}): residual {residual:e}")]
    RoundTripFailure { x: f64, y: f64, z: f64, residual: f64 },

    #[error("ellipsoidal coordinate out of range: {0}")]
    RangeViolation(String),

    #[error("order p = {p} out of range 1..={max} for degree n = {n}")]
    OrderOutOfRange { n: usize, p: usize, max: usize },

    #[error("degree n = {n} exceeds the configured maximum {n_max}")]
    DegreeTooLarge { n: usize, n_max: usize },

    #[error("Lamé derivative unbounded at branch point s = {s}")]
    BranchPointDerivative { s: f64 },

    #[error("second-kind integral needs lambda > k (lambda = {lambda}, k = {k})")]
    SingularLowerLimit { lambda: f64, k: f64 },

    #[error("Lamé function E_{n}^{p} vanishes on the integration ray at s = {s}")]
    ZeroOnIntegrationPath { n: usize, p: usize, s: f64 },

    #[error("numerical integration did not converge: {0}")]
    NonConvergence(String),

    #[error("expansion needs lambda(field) > lambda(source): {field} <= {source_lambda}")]
    OrderingViolation { field: f64, source_lambda: f64 },

    #[error("charge at ({x}, {y}, {z}) is not strictly inside the ellipsoid")]
    ChargeOutsideEllipsoid { x: f64, y: f64, z: f64 },

    #[error("reaction-field denominator vanishes for (n, p) = ({n}, {p})")]
    ResonantDenominator { n: usize, p: usize },

    #[error("invalid dielectric model: {0}")]
    InvalidDielectric(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear solve failed: {0}")]
    SingularSystem(String),
}

impl Error {
    /// True for failures caused by bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MalformedMatrix(_)
                | Error::DegenerateEllipsoid { .. }
                | Error::RangeViolation(_)
                | Error::OrderOutOfRange { .. }
                | Error::DegreeTooLarge { .. }
                | Error::SingularLowerLimit { .. }
                | Error::OrderingViolation { .. }
                | Error::ChargeOutsideEllipsoid { .. }
                | Error::InvalidDielectric(_)
                | Error::InvalidInput(_)
        )
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedMatrix(_) => "MalformedMatrix",
            Error::EigenFailure(_) => "EigenFailure",
            Error::MaxSubdivisions { .. } => "MaxSubdivisions",
            Error::DegenerateEllipsoid { .. } => "DegenerateEllipsoid",
            Error::RoundTripFailure { .. } => "RoundTripFailure",
            Error::RangeViolation(_) => "RangeViolation",
            Error::OrderOutOfRange { .. } => "OrderOutOfRange",
            Error::DegreeTooLarge { .. } => "DegreeTooLarge",
            Error::BranchPointDerivative { .. } => "BranchPointDerivative",
            Error::SingularLowerLimit { .. } => "SingularLowerLimit",
            Error::ZeroOnIntegrationPath { .. } => "ZeroOnIntegrationPath",
            Error::NonConvergence(_) => "NonConvergence",
            Error::OrderingViolation { .. } => "OrderingViolation",
            Error::ChargeOutsideEllipsoid { .. } => "ChargeOutsideEllipsoid",
            Error::ResonantDenominator { .. } => "ResonantDenominator",
            Error::InvalidDielectric(_) => "InvalidDielectric",
            Error::InvalidInput(_) => "InvalidInput",
            Error::SingularSystem(_) => "SingularSystem",
        }
    }
}
