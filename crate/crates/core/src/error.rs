use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("profile has zero mass")]
    ZeroMass,
    #[error("negative density value {value} at grid index {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("moment E|X|^{order} diverges or exceeds the tail budget (tail estimate {tail:e})")]
    DivergentMoment { order: f64, tail: f64 },
    #[error("density vanishes at r = {r}")]
    VanishingDensity { r: f64 },
    #[error("{what}: two-resolution estimates disagree ({fine:e} vs {coarse:e})")]
    QuadratureDivergence { what: &'static str, fine: f64, coarse: f64 },
    #[error("score is unbounded: excluded mass {excluded_mass:e} exceeds budget")]
    UnboundedScore { excluded_mass: f64 },
    #[error("quantile inversion failed at probability {q}")]
    QuantileInversionFailure { q: f64 },
    #[error("convolution resolution estimate {estimate:e} exceeds budget {budget:e}")]
    ResolutionFailure { estimate: f64, budget: f64 },
    #[error("numerical convolution deviates from mixture algebra by {deviation:e}")]
    ConvolutionMismatch { deviation: f64 },
    #[error("sampler failure: {0}")]
    SamplerFailure(String),
    #[error("radius law must satisfy E R0^2 = 1, got {second_moment}")]
    InvalidR0 { second_moment: f64 },
}
