use crate::ratio_approx::RatioKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("quadrature window [{lower}, {upper}] too small: {tail_mass:.3e} of the mass lies outside")]
    WindowTooSmall { lower: f64, upper: f64, tail_mass: f64 },

    #[error("fit optimum {param} = {value} lies on the search-grid boundary; widen the range")]
    BoundaryHit { param: &'static str, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ratios {0} and {1} do not share a denominator")]
    UnsupportedPair(RatioKind, RatioKind),

    #[error("no correlation coefficient for the pair ({0}, {1})")]
    MissingCorrelation(RatioKind, RatioKind),

    #[error("degenerate log-normal combination: ln-domain variance {variance:e}")]
    DegenerateCombination { variance: f64 },

    #[error("moment overflow caused by term {index}")]
    Range { index: usize },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("femtocell intensity too high: occupancy probability {p} is not below 1")]
    IntensityTooHigh { p: f64 },

    #[error("QoS infeasible: {tier} outage {outage:.4} already exceeds {eps} without femtocells")]
    InfeasibleQos { tier: &'static str, outage: f64, eps: f64 },
}
