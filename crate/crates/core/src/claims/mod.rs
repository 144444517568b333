//! Insurance-claims records and their aggregation into admissions and
//! per-hospital outcomes.
//!
//! Three claim categories exist: hospital claims (accommodation, theatre and
//! other facility charges), medical claims lodged by physicians, and
//! ancillary claims for auxiliary services. Only medical claims identify
//! physicians, so only they contribute to collaboration networks; all three
//! contribute to admission cost.

mod admissions;
mod csv_io;
pub mod generator;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use admissions::{build_admissions, hospital_outcomes, DEFAULT_READMISSION_WINDOW_DAYS};
pub use csv_io::{parse_claims, write_claims, CLAIMS_HEADER};
pub use generator::{generate_synthetic_claims, GeneratorConfig};

#[derive(Debug, thiserror::Error)]
pub enum ClaimsError {
    #[error("claims csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("claims csv header is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: field `{field}`: {message}")]
    Field {
        line: u64,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: {message}")]
    InvalidRow { line: u64, message: String },
    #[error("admission {admission_id}: {message}")]
    ConflictingAdmission {
        admission_id: String,
        message: String,
    },
    #[error("invalid generator config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClaimKind {
    Hospital,
    Medical,
    Ancillary,
}

impl ClaimKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClaimKind::Hospital => "hospital",
            ClaimKind::Medical => "medical",
            ClaimKind::Ancillary => "ancillary",
        }
    }
}

impl FromStr for ClaimKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hospital" => Ok(ClaimKind::Hospital),
            "medical" => Ok(ClaimKind::Medical),
            "ancillary" => Ok(ClaimKind::Ancillary),
            other => Err(format!("unknown claim kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Other,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Other => "other",
        }
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "female" => Ok(Gender::Female),
            "male" => Ok(Gender::Male),
            "other" => Ok(Gender::Other),
            other => Err(format!("unknown gender `{other}`")),
        }
    }
}

/// Non-negative currency amount held as integer cents so that sums are exact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cents(pub u64);

impl Cents {
    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl std::ops::Add for Cents {
    type Output = Cents;
    fn add(self, rhs: Cents) -> Cents {
        Cents(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Cents {
    fn sum<I: Iterator<Item = Cents>>(iter: I) -> Cents {
        Cents(iter.map(|c| c.0).sum())
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl FromStr for Cents {
    type Err = String;

    /// Accepts `123`, `123.4` or `123.45`; more than two decimals, signs and
    /// exponents are rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("invalid amount `{s}`");
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if frac.len() > 2 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: u64 = whole.parse().map_err(|_| bad())?;
        let frac_cents = match frac.len() {
            0 => 0,
            1 => frac.parse::<u64>().map_err(|_| bad())? * 10,
            _ => frac.parse::<u64>().map_err(|_| bad())?,
        };
        whole
            .checked_mul(100)
            .and_then(|c| c.checked_add(frac_cents))
            .map(Cents)
            .ok_or_else(bad)
    }
}

/// One insurance claim line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub claim_id: String,
    pub claim_kind: ClaimKind,
    pub patient_id: String,
    /// Physician for medical claims, facility or service provider otherwise.
    pub provider_id: String,
    pub hospital_id: String,
    pub admission_id: String,
    pub admission_date: NaiveDate,
    pub discharge_date: NaiveDate,
    pub cost: Cents,
    pub patient_age: u32,
    pub patient_gender: Gender,
}

/// One hospital stay assembled from its claims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionRecord {
    pub admission_id: String,
    pub hospital_id: String,
    pub patient_id: String,
    pub patient_age: u32,
    pub admission_date: NaiveDate,
    pub discharge_date: NaiveDate,
    pub length_of_stay: u32,
    pub total_cost: Cents,
    /// Sorted provider ids of the admission's medical claims.
    pub physician_set: Vec<String>,
    pub readmitted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HospitalOutcomes {
    pub hospital_id: String,
    pub n_admissions: usize,
    pub mean_cost: f64,
    pub mean_los: f64,
    pub readmission_rate: f64,
    pub mean_patient_age: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cents_parse_and_display() {
        assert_eq!("12".parse::<Cents>().unwrap(), Cents(1200));
        assert_eq!("12.5".parse::<Cents>().unwrap(), Cents(1250));
        assert_eq!("0.07".parse::<Cents>().unwrap(), Cents(7));
        assert_eq!(Cents(1250).to_string(), "12.50");
        assert_eq!(Cents(7).to_string(), "0.07");
        for bad in ["", "-1", "1.234", "1e3", ".5", "1.x", "+3"] {
            assert!(bad.parse::<Cents>().is_err(), "{bad}");
        }
    }

    #[test]
    fn enums_round_trip_text() {
        for k in [ClaimKind::Hospital, ClaimKind::Medical, ClaimKind::Ancillary] {
            assert_eq!(k.as_str().parse::<ClaimKind>().unwrap(), k);
        }
        for g in [Gender::Female, Gender::Male, Gender::Other] {
            assert_eq!(g.as_str().parse::<Gender>().unwrap(), g);
        }
        assert!("dental".parse::<ClaimKind>().is_err());
    }
}
