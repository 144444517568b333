use std::io::{Read, Write};

use chrono::NaiveDate;

use super::{Cents, ClaimRecord, ClaimsError, Gender};

/// Column order of the claims CSV.
pub const CLAIMS_HEADER: [&str; 11] = [
    "claim_id",
    "claim_kind",
    "patient_id",
    "provider_id",
    "hospital_id",
    "admission_id",
    "admission_date",
    "discharge_date",
    "cost",
    "patient_age",
    "patient_gender",
];

/// Parses a claims CSV. Columns are located by header name; unknown columns
/// are ignored with a warning.
pub fn parse_claims<R: Read>(source: R) -> Result<Vec<ClaimRecord>, ClaimsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let mut index = [0usize; CLAIMS_HEADER.len()];
    for (slot, name) in index.iter_mut().zip(CLAIMS_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(ClaimsError::MissingColumn(name))?;
    }
    for extra in headers.iter().filter(|h| !CLAIMS_HEADER.contains(h)) {
        log::warn!("ignoring unknown claims column `{extra}`");
    }

    let mut claims = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |i: usize| record.get(index[i]).unwrap_or("");
        let field_err = |field: &'static str, message: String| ClaimsError::Field {
            line,
            field,
            message,
        };
        let id = |i: usize| -> Result<String, ClaimsError> {
            let v = get(i);
            if v.is_empty() {
                Err(field_err(CLAIMS_HEADER[i], "empty identifier".into()))
            } else {
                Ok(v.to_string())
            }
        };
        let date = |i: usize| -> Result<NaiveDate, ClaimsError> {
            NaiveDate::parse_from_str(get(i), "%Y-%m-%d")
                .map_err(|e| field_err(CLAIMS_HEADER[i], format!("`{}`: {e}", get(i))))
        };

        let claim = ClaimRecord {
            claim_id: id(0)?,
            claim_kind: get(1).parse().map_err(|m| field_err("claim_kind", m))?,
            patient_id: id(2)?,
            provider_id: id(3)?,
            hospital_id: id(4)?,
            admission_id: id(5)?,
            admission_date: date(6)?,
            discharge_date: date(7)?,
            cost: get(8).parse::<Cents>().map_err(|m| field_err("cost", m))?,
            patient_age: get(9)
                .parse()
                .map_err(|_| field_err("patient_age", format!("invalid age `{}`", get(9))))?,
            patient_gender: get(10)
                .parse::<Gender>()
                .map_err(|m| field_err("patient_gender", m))?,
        };
        if claim.discharge_date < claim.admission_date {
            return Err(ClaimsError::InvalidRow {
                line,
                message: format!(
                    "discharge_date {} precedes admission_date {}",
                    claim.discharge_date, claim.admission_date
                ),
            });
        }
        claims.push(claim);
    }
    Ok(claims)
}

pub fn write_claims<W: Write>(claims: &[ClaimRecord], sink: W) -> Result<(), ClaimsError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(CLAIMS_HEADER)?;
    for c in claims {
        writer.write_record([
            c.claim_id.as_str(),
            c.claim_kind.as_str(),
            &c.patient_id,
            &c.provider_id,
            &c.hospital_id,
            &c.admission_id,
            &c.admission_date.format("%Y-%m-%d").to_string(),
            &c.discharge_date.format("%Y-%m-%d").to_string(),
            &c.cost.to_string(),
            &c.patient_age.to_string(),
            c.patient_gender.as_str(),
        ])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}
