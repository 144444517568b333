use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dist::two_sided_p;
use super::StatsError;

pub const INTERCEPT: &str = "(intercept)";

#[derive(Debug, Clone)]
pub struct Predictor<'a> {
    pub name: String,
    pub values: &'a [f64],
}

impl<'a> Predictor<'a> {
    pub fn new(name: impl Into<String>, values: &'a [f64]) -> Self {
        Predictor {
            name: name.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
}

/// Ordinary least squares fit with an intercept. `terms[0]` is always the
/// intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub terms: Vec<TermEstimate>,
    pub r_squared: f64,
    pub n_observations: usize,
    pub residual_df: usize,
}

impl RegressionFit {
    pub fn term(&self, name: &str) -> Option<&TermEstimate> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn intercept(&self) -> f64 {
        self.terms[0].coefficient
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.term(name).map(|t| t.coefficient)
    }

    pub fn p_value(&self, name: &str) -> Option<f64> {
        self.term(name).map(|t| t.p_value)
    }

    /// Fitted values for the design the model was estimated on.
    pub fn predict(&self, predictors: &[Predictor<'_>]) -> Vec<f64> {
        let n = predictors.first().map_or(0, |p| p.values.len());
        (0..n)
            .map(|i| {
                self.intercept()
                    + predictors
                        .iter()
                        .map(|p| self.coefficient(&p.name).unwrap_or(0.0) * p.values[i])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Least squares of `y` on an intercept plus `predictors`, solved through a
/// Householder QR factorisation of the design matrix.
pub fn ols(y: &[f64], predictors: &[Predictor<'_>]) -> Result<RegressionFit, StatsError> {
    let n = y.len();
    let p = predictors.len() + 1;
    for pred in predictors {
        if pred.values.len() != n {
            return Err(StatsError::LengthMismatch(n, pred.values.len()));
        }
    }
    if n <= p {
        return Err(StatsError::TooFewObservations { needed: p + 1, got: n });
    }
    if y.iter().chain(predictors.iter().flat_map(|p| p.values)).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }

    let names: Vec<&str> = std::iter::once(INTERCEPT)
        .chain(predictors.iter().map(|p| p.name.as_str()))
        .collect();
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { predictors[j - 1].values[i] });
    let yv = DVector::from_column_slice(y);

    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let col_norm = x.column(j).norm();
        if r[(j, j)].abs() <= 1e-9 * col_norm.max(f64::MIN_POSITIVE) {
            let others = if j == 0 {
                "nothing".to_string()
            } else {
                names[..j].iter().map(|s| format!("`{s}`")).collect::<Vec<_>>().join(", ")
            };
            return Err(StatsError::RankDeficient {
                term: names[j].to_string(),
                others,
            });
        }
    }

    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .expect("nonsingular after rank check");
    let fitted = &x * &beta;
    let ss_res: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let df = n - p;
    let sigma2 = ss_res / df as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .expect("nonsingular after rank check");
    // (X'X)^-1 = R^-1 R^-T
    let cov_unscaled = &r_inv * r_inv.transpose();

    let mut terms = Vec::with_capacity(p);
    for j in 0..p {
        let coefficient = beta[j];
        let std_error = (sigma2 * cov_unscaled[(j, j)]).max(0.0).sqrt();
        let (t_value, p_value) = if std_error > 0.0 {
            let t = coefficient / std_error;
            (t, two_sided_p(t, df as f64)?)
        } else if coefficient == 0.0 {
            (0.0, 1.0)
        } else {
            (coefficient.signum() * f64::INFINITY, 0.0)
        };
        terms.push(TermEstimate {
            name: names[j].to_string(),
            coefficient,
            std_error,
            t_value,
            p_value,
        });
    }
    Ok(RegressionFit {
        terms,
        r_squared,
        n_observations: n,
        residual_df: df,
    })
}

/// Simple regression `y = a + b x`; the slope term is named `x`.
pub fn ols_simple(y: &[f64], x: &[f64]) -> Result<RegressionFit, StatsError> {
    if y.len() != x.len() {
        return Err(StatsError::LengthMismatch(y.len(), x.len()));
    }
    if y.len() < 3 {
        return Err(StatsError::TooFewObservations { needed: 3, got: y.len() });
    }
    if x.iter().all(|v| *v == x[0]) {
        return Err(StatsError::ConstantPredictor("x".into()));
    }
    ols(y, &[Predictor::new("x", x)])
}

/// Moderated regression on `{x, x*m}`, or on `{x, m, x*m}` when
/// `include_moderator` is set. Terms are named `x`, `m` and `x*m`.
pub fn ols_moderation(
    y: &[f64],
    x: &[f64],
    m: &[f64],
    include_moderator: bool,
) -> Result<RegressionFit, StatsError> {
    if x.len() != m.len() {
        return Err(StatsError::LengthMismatch(x.len(), m.len()));
    }
    if y.len() < 4 {
        return Err(StatsError::TooFewObservations { needed: 4, got: y.len() });
    }
    let product: Vec<f64> = x.iter().zip(m).map(|(a, b)| a * b).collect();
    let mut predictors = vec![Predictor::new("x", x)];
    if include_moderator {
        predictors.push(Predictor::new("m", m));
    }
    predictors.push(Predictor::new("x*m", &product));
    ols(y, &predictors)
}
