//! Measurement adjustment and propagation of error covariances.
//!
//! Variance here always belongs to an *error*: a measured value is a
//! constant with zero variance, while its error has zero expectation and a
//! variance describing the probability interval of all its possible values.
//!
//! - [`error_model`]: error budgets and the covariance matrices they induce.
//! - [`distributions`]: distributions of regular (cyclic, rounding) errors.
//! - [`adjustment`]: least-squares adjustment and Type A evaluation.
//! - [`propagation`]: covariance propagation and Type A/B synthesis.
//! - [`montecarlo`]: simulated campaigns used as an independent check.

pub mod adjustment;
pub mod distributions;
pub mod error;
pub mod error_model;
pub mod montecarlo;
pub mod propagation;

pub use adjustment::{
    solve, solve_direct, solve_single_indirect, AdjustOptions, Adjuster, AdjustmentResult,
    DesignMatrix, ObservationVector,
};
pub use distributions::{empirical_moments, Center, RegularErrorDistribution};
pub use error::{Error, Result};
pub use error_model::{co_uncertainty, CovarianceMatrix, ErrorBudget, ErrorSequence, ErrorSource};
pub use montecarlo::{empirical_covariance, simulate, CampaignSpec};
pub use propagation::{
    expanded_to_standard, propagate, synthesize, true_value_expression, LinearMap, UncertaintyReport,
};
