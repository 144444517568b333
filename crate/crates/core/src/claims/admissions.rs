use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use super::{AdmissionRecord, Cents, ClaimKind, ClaimRecord, ClaimsError, HospitalOutcomes};

/// Days after discharge within which a further admission of the same patient
/// marks the earlier admission as readmitted.
pub const DEFAULT_READMISSION_WINDOW_DAYS: u32 = 28;

struct Accumulator<'a> {
    first: &'a ClaimRecord,
    age: u32,
    cost: Cents,
    physicians: BTreeSet<&'a str>,
}

/// Groups claims by admission, sums their costs and flags readmissions.
///
/// An admission is readmitted when the same patient has another admission
/// starting on a day in `[discharge, discharge + window]`. Records come back
/// sorted by admission id.
pub fn build_admissions(
    claims: &[ClaimRecord],
    readmission_window: u32,
) -> Result<Vec<AdmissionRecord>, ClaimsError> {
    let mut groups: BTreeMap<&str, Accumulator<'_>> = BTreeMap::new();
    for claim in claims {
        let acc = groups
            .entry(claim.admission_id.as_str())
            .or_insert_with(|| Accumulator {
                first: claim,
                age: claim.patient_age,
                cost: Cents(0),
                physicians: BTreeSet::new(),
            });
        let first = acc.first;
        let conflict = |message: String| ClaimsError::ConflictingAdmission {
            admission_id: claim.admission_id.clone(),
            message,
        };
        if first.admission_date != claim.admission_date || first.discharge_date != claim.discharge_date {
            return Err(conflict(format!(
                "claims {} and {} disagree on dates ({}..{} vs {}..{})",
                first.claim_id,
                claim.claim_id,
                first.admission_date,
                first.discharge_date,
                claim.admission_date,
                claim.discharge_date
            )));
        }
        if first.patient_id != claim.patient_id || first.hospital_id != claim.hospital_id {
            return Err(conflict(format!(
                "claims {} and {} disagree on patient or hospital",
                first.claim_id, claim.claim_id
            )));
        }
        acc.age = acc.age.min(claim.patient_age);
        acc.cost = acc.cost + claim.cost;
        if claim.claim_kind == ClaimKind::Medical {
            acc.physicians.insert(claim.provider_id.as_str());
        }
    }

    let mut admissions: Vec<AdmissionRecord> = groups
        .into_iter()
        .map(|(id, acc)| {
            let days = (acc.first.discharge_date - acc.first.admission_date).num_days();
            AdmissionRecord {
                admission_id: id.to_string(),
                hospital_id: acc.first.hospital_id.clone(),
                patient_id: acc.first.patient_id.clone(),
                patient_age: acc.age,
                admission_date: acc.first.admission_date,
                discharge_date: acc.first.discharge_date,
                length_of_stay: u32::try_from(days.max(0)).unwrap_or(u32::MAX),
                total_cost: acc.cost,
                physician_set: acc.physicians.into_iter().map(str::to_string).collect(),
                readmitted: false,
            }
        })
        .collect();

    let mut by_patient: BTreeMap<&str, Vec<(NaiveDate, usize)>> = BTreeMap::new();
    for (i, a) in admissions.iter().enumerate() {
        by_patient
            .entry(a.patient_id.as_str())
            .or_default()
            .push((a.admission_date, i));
    }
    let window = chrono::Duration::days(i64::from(readmission_window));
    let mut flags = vec![false; admissions.len()];
    for stays in by_patient.values() {
        for &(_, i) in stays {
            let discharge = admissions[i].discharge_date;
            flags[i] = stays
                .iter()
                .any(|&(start, j)| j != i && start >= discharge && start <= discharge + window);
        }
    }
    for (a, flag) in admissions.iter_mut().zip(flags) {
        a.readmitted = flag;
    }
    Ok(admissions)
}

/// Per-hospital means over admissions.
pub fn hospital_outcomes(admissions: &[AdmissionRecord]) -> BTreeMap<String, HospitalOutcomes> {
    #[derive(Default)]
    struct Totals {
        n: usize,
        cost: u64,
        los: u64,
        readmitted: usize,
        age: u64,
    }
    let mut totals: BTreeMap<&str, Totals> = BTreeMap::new();
    for a in admissions {
        let t = totals.entry(a.hospital_id.as_str()).or_default();
        t.n += 1;
        t.cost += a.total_cost.0;
        t.los += u64::from(a.length_of_stay);
        t.readmitted += usize::from(a.readmitted);
        t.age += u64::from(a.patient_age);
    }
    totals
        .into_iter()
        .map(|(id, t)| {
            let n = t.n as f64;
            (
                id.to_string(),
                HospitalOutcomes {
                    hospital_id: id.to_string(),
                    n_admissions: t.n,
                    mean_cost: t.cost as f64 / 100.0 / n,
                    mean_los: t.los as f64 / n,
                    readmission_rate: t.readmitted as f64 / n,
                    mean_patient_age: t.age as f64 / n,
                },
            )
        })
        .collect()
}
