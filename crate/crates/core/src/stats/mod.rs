//! Regression and hypothesis tests linking network measures to hospital
//! outcomes.

mod dist;
mod ols;
mod ttest;

pub use dist::t_distribution_sf;
pub use ols::{ols, ols_moderation, ols_simple, Predictor, RegressionFit, TermEstimate, INTERCEPT};
pub use ttest::{two_sample_ttest, TTestResult, TestKind};

/// Default significance level for p-value based decisions.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("predictor `{0}` is constant")]
    ConstantPredictor(String),
    #[error("design matrix is rank deficient: `{term}` is collinear with {others}")]
    RankDeficient { term: String, others: String },
    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDegreesOfFreedom(f64),
    #[error("non-finite value in input")]
    NonFinite,
}
