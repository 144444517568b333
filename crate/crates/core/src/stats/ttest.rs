use serde::{Deserialize, Serialize};

use super::dist::two_sided_p;
use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    /// Student's t with pooled variance, `df = n_a + n_b - 2`.
    #[default]
    Pooled,
    /// Welch's unequal-variance t with Satterthwaite degrees of freedom.
    Welch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub kind: TestKind,
    pub t_value: f64,
    pub degrees_of_freedom: f64,
    /// Two-sided.
    pub p_value: f64,
    pub group_means: (f64, f64),
    /// Standard error of each group mean, `sd / sqrt(n)`.
    pub group_standard_errors: (f64, f64),
    pub group_sizes: (usize, usize),
    /// Both samples have zero variance but different means; reported as
    /// `p = 0` with an infinite statistic.
    pub zero_variance: bool,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sample t-test of `mean(a) = mean(b)`.
pub fn two_sample_ttest(a: &[f64], b: &[f64], kind: TestKind) -> Result<TTestResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooFewObservations { needed: 2, got: s.len() });
        }
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mean_a, var_a) = mean_var(a);
    let (mean_b, var_b) = mean_var(b);

    let (se, df) = match kind {
        TestKind::Pooled => {
            let pooled = ((na - 1.0) * var_a + (nb - 1.0) * var_b) / (na + nb - 2.0);
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), na + nb - 2.0)
        }
        TestKind::Welch => {
            let (qa, qb) = (var_a / na, var_b / nb);
            let se2 = qa + qb;
            let df = if se2 > 0.0 {
                se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0))
            } else {
                na + nb - 2.0
            };
            (se2.sqrt(), df)
        }
    };

    let diff = mean_a - mean_b;
    let (t_value, p_value, zero_variance) = if se > 0.0 {
        let t = diff / se;
        (t, two_sided_p(t, df)?, false)
    } else if diff == 0.0 {
        (0.0, 1.0, false)
    } else {
        (diff.signum() * f64::INFINITY, 0.0, true)
    };

    Ok(TTestResult {
        kind,
        t_value,
        degrees_of_freedom: df,
        p_value,
        group_means: (mean_a, mean_b),
        group_standard_errors: ((var_a / na).sqrt(), (var_b / nb).sqrt()),
        group_sizes: (a.len(), b.len()),
        zero_variance,
    })
}
