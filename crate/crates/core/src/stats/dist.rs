use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

/// Upper-tail probability `P(T > t)` of Student's t with `df` degrees of
/// freedom, via the regularized incomplete beta function.
pub fn t_distribution_sf(t: f64, df: f64) -> Result<f64, StatsError> {
    if !(df > 0.0) {
        return Err(StatsError::InvalidDegreesOfFreedom(df));
    }
    if t.is_nan() {
        return Err(StatsError::NonFinite);
    }
    if t == f64::INFINITY {
        return Ok(0.0);
    }
    if t == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|_| StatsError::InvalidDegreesOfFreedom(df))?;
    Ok(dist.sf(t).clamp(0.0, 1.0))
}

/// Two-sided p-value for a t statistic.
pub(crate) fn two_sided_p(t: f64, df: f64) -> Result<f64, StatsError> {
    Ok((2.0 * t_distribution_sf(t.abs(), df)?).min(1.0))
}
