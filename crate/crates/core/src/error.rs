use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point} is not on the lattice with step {step}")]
    NonLatticePoint { point: f64, step: f64 },

    #[error("incompatible lattices: step {left} vs {right}")]
    IncompatibleLattice { left: f64, right: f64 },

    #[error("numerical corruption: weight {weight} at index {index} after transform")]
    NumericalCorruption { index: i64, weight: f64 },

    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("support of {size} atoms exceeds the cap of {cap}")]
    SupportOverflow { size: usize, cap: usize },

    #[error("g = {name} is not in class G: {reason}")]
    NotClassG { name: String, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("missing parameter `{0}`")]
    MissingParam(&'static str),

    #[error("component {component}: U has mass outside the ball of radius {tau}")]
    SupportViolation { component: usize, tau: f64 },

    #[error("parameter `{name}` = {value} is below lambda = {lambda}")]
    ParamBelowLambda {
        name: &'static str,
        value: f64,
        lambda: f64,
    },

    #[error("empty sample")]
    EmptySample,

    #[error("regions overlap")]
    OverlappingRegions,

    #[error("instance too large for brute force: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;
