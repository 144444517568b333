//! Seeded synthetic claims generator.
//!
//! Defaults follow the published cohort profile of the hip-replacement case
//! study: 85 hospitals, 2352 patients (1302 female), mean age 65.02 and mean
//! length of stay 10.51 days, with claim multiplicities chosen so that totals
//! land near 24559 hospital, 69619 medical and 1388 ancillary claims.
//!
//! Each hospital draws a latent clustering level `c` in `[0, 1]`. An
//! admission is treated either by a team of consecutive physicians on a ring
//! of the hospital's non-lead roster (probability `c`; overlapping teams
//! close triangles in the collaboration network) or by the hospital's lead
//! physician with one or two others (a star-like pattern). Later admissions
//! of the same patient keep the index team.
//! `triangle_readmission_coupling` ties the readmission probability to `c`
//! so that pipelines can be tested against a planted signal.

use chrono::NaiveDate;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{Cents, ClaimKind, ClaimRecord, ClaimsError, Gender};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_hospitals: usize,
    pub n_patients: usize,
    /// Inclusive `[min, max]` roster size per hospital.
    pub physicians_per_hospital: [usize; 2],
    /// Inclusive `[min, max]` size of a ring-window team.
    pub group_size: [usize; 2],
    /// Probability that a hub-treated admission involves two non-lead
    /// physicians instead of one.
    pub hub_second_physician_prob: f64,
    /// Probability that a hospital's roster also contains one physician from
    /// the next hospital.
    pub visiting_physician_prob: f64,
    pub female_fraction: f64,
    pub age_mean: f64,
    pub age_sd: f64,
    pub los_mean: f64,
    pub readmission_los_mean: f64,
    /// Mean readmission probability of an index admission.
    pub readmission_base_rate: f64,
    /// 0 leaves readmission independent of clustering; 1 spreads the
    /// per-hospital rate linearly over `[0, 2 * base]` by clustering level.
    pub triangle_readmission_coupling: f64,
    /// Largest gap in days between discharge and a planted readmission.
    pub readmission_max_gap_days: u32,
    /// Probability of an unrelated later admission (outside any 28-day window).
    pub repeat_admission_prob: f64,
    /// Hospital claims per admission are `1 + Poisson(rate * los)`.
    pub hospital_claims_per_day: f64,
    pub medical_claims_per_admission: f64,
    pub ancillary_claims_per_admission: f64,
    pub hospital_claim_cost_mean: f64,
    pub medical_claim_cost_mean: f64,
    pub ancillary_claim_cost_mean: f64,
    /// Log-scale standard deviation of every claim cost.
    pub cost_log_sd: f64,
    pub start_date: NaiveDate,
    pub span_days: u32,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_hospitals: 85,
            n_patients: 2352,
            physicians_per_hospital: [14, 22],
            group_size: [3, 4],
            hub_second_physician_prob: 0.25,
            visiting_physician_prob: 0.2,
            female_fraction: 1302.0 / 2352.0,
            age_mean: 65.02,
            age_sd: 10.5,
            los_mean: 10.51,
            readmission_los_mean: 6.0,
            readmission_base_rate: 0.15,
            triangle_readmission_coupling: 0.0,
            readmission_max_gap_days: 25,
            repeat_admission_prob: 0.05,
            hospital_claims_per_day: 0.78,
            medical_claims_per_admission: 25.0,
            ancillary_claims_per_admission: 0.5,
            hospital_claim_cost_mean: 1600.0,
            medical_claim_cost_mean: 320.0,
            ancillary_claim_cost_mean: 90.0,
            cost_log_sd: 0.6,
            start_date: NaiveDate::from_ymd_opt(2009, 1, 1).expect("valid date"),
            span_days: 4 * 365,
            seed: 7,
        }
    }
}

impl GeneratorConfig {
    pub fn from_toml(text: &str) -> Result<Self, ClaimsError> {
        toml::from_str(text).map_err(|e| ClaimsError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ClaimsError> {
        let fail = |m: &str| Err(ClaimsError::Config(m.to_string()));
        if self.n_hospitals == 0 || self.n_patients == 0 {
            return fail("n_hospitals and n_patients must be positive");
        }
        if self.n_patients < self.n_hospitals {
            return fail("every hospital needs at least one patient (n_patients < n_hospitals)");
        }
        let [pmin, pmax] = self.physicians_per_hospital;
        if pmin == 0 || pmin > pmax {
            return fail("physicians_per_hospital must be a nonempty range of positive counts");
        }
        let [gmin, gmax] = self.group_size;
        if gmin < 2 || gmin > gmax {
            return fail("group_size must be a range with minimum at least 2");
        }
        if pmin < gmin + 1 {
            return fail("physicians_per_hospital minimum must exceed group_size minimum");
        }
        for (name, p) in [
            ("hub_second_physician_prob", self.hub_second_physician_prob),
            ("visiting_physician_prob", self.visiting_physician_prob),
            ("female_fraction", self.female_fraction),
            ("readmission_base_rate", self.readmission_base_rate),
            ("triangle_readmission_coupling", self.triangle_readmission_coupling),
            ("repeat_admission_prob", self.repeat_admission_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ClaimsError::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if 2.0 * self.readmission_base_rate > 1.0 && self.triangle_readmission_coupling > 0.0 {
            return fail("readmission_base_rate must be at most 0.5 when coupling is enabled");
        }
        for (name, v) in [
            ("age_mean", self.age_mean),
            ("los_mean", self.los_mean),
            ("readmission_los_mean", self.readmission_los_mean),
            ("medical_claims_per_admission", self.medical_claims_per_admission),
            ("hospital_claim_cost_mean", self.hospital_claim_cost_mean),
            ("medical_claim_cost_mean", self.medical_claim_cost_mean),
            ("ancillary_claim_cost_mean", self.ancillary_claim_cost_mean),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ClaimsError::Config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("age_sd", self.age_sd),
            ("cost_log_sd", self.cost_log_sd),
            ("hospital_claims_per_day", self.hospital_claims_per_day),
            ("ancillary_claims_per_admission", self.ancillary_claims_per_admission),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ClaimsError::Config(format!("{name} must be non-negative")));
            }
        }
        if self.readmission_max_gap_days == 0 || self.span_days < 120 {
            return fail("readmission_max_gap_days must be positive and span_days at least 120");
        }
        Ok(())
    }
}

struct Hospital {
    id: String,
    lead: String,
    others: Vec<String>,
    clustering: f64,
    readmission_prob: f64,
}

struct Patient {
    id: String,
    hospital: usize,
    age: u32,
    gender: Gender,
}

struct Emitter<'a> {
    cfg: &'a GeneratorConfig,
    rng: ChaCha8Rng,
    claims: Vec<ClaimRecord>,
    next_admission: usize,
    hospital_cost: LogNormal<f64>,
    medical_cost: LogNormal<f64>,
    ancillary_cost: LogNormal<f64>,
}

fn lognormal_with_mean(mean: f64, log_sd: f64) -> LogNormal<f64> {
    LogNormal::new(mean.ln() - 0.5 * log_sd * log_sd, log_sd).expect("finite lognormal parameters")
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

fn to_cents(amount: f64) -> Cents {
    Cents((amount * 100.0).round().max(0.0) as u64)
}

impl Emitter<'_> {
    fn draw_los(&mut self, mean: f64) -> u32 {
        // Gamma with shape 4 keeps the right skew typical of stays.
        let gamma = Gamma::new(4.0, mean / 4.0).expect("positive gamma parameters");
        gamma.sample(&mut self.rng).round() as u32
    }

    fn draw_team(&mut self, hospital: &Hospital) -> Vec<String> {
        if self.rng.random_bool(hospital.clustering) {
            let n = hospital.others.len();
            let size = self.rng.random_range(self.cfg.group_size[0]..=self.cfg.group_size[1]).min(n);
            let first = self.rng.random_range(0..n);
            return (0..size).map(|k| hospital.others[(first + k) % n].clone()).collect();
        }
        let mut team = vec![hospital.lead.clone()];
        let extra = if self.rng.random_bool(self.cfg.hub_second_physician_prob) { 2 } else { 1 };
        team.extend(
            hospital
                .others
                .choose_multiple(&mut self.rng, extra)
                .cloned(),
        );
        team
    }

    fn emit_admission(&mut self, hospital: &Hospital, team: &[String], patient: &Patient, start: NaiveDate, los: u32) {
        let admission_id = format!("A{:06}", self.next_admission);
        self.next_admission += 1;
        let discharge = start + chrono::Duration::days(i64::from(los));

        let n_hospital = 1 + poisson(&mut self.rng, self.cfg.hospital_claims_per_day * f64::from(los));
        let n_medical = (poisson(&mut self.rng, self.cfg.medical_claims_per_admission) as usize).max(team.len());
        let n_ancillary = poisson(&mut self.rng, self.cfg.ancillary_claims_per_admission);

        let mut lines: Vec<(ClaimKind, String, Cents)> = Vec::new();
        for _ in 0..n_hospital {
            let cost = to_cents(self.hospital_cost.sample(&mut self.rng));
            lines.push((ClaimKind::Hospital, hospital.id.clone(), cost));
        }
        for k in 0..n_medical {
            let physician = if k < team.len() {
                team[k].clone()
            } else {
                team.choose(&mut self.rng).expect("nonempty team").clone()
            };
            let cost = to_cents(self.medical_cost.sample(&mut self.rng));
            lines.push((ClaimKind::Medical, physician, cost));
        }
        for _ in 0..n_ancillary {
            let provider = format!("ANC{:03}", self.rng.random_range(0..200));
            let cost = to_cents(self.ancillary_cost.sample(&mut self.rng));
            lines.push((ClaimKind::Ancillary, provider, cost));
        }

        for (kind, provider, cost) in lines {
            let claim_id = format!("C{:07}", self.claims.len() + 1);
            self.claims.push(ClaimRecord {
                claim_id,
                claim_kind: kind,
                patient_id: patient.id.clone(),
                provider_id: provider,
                hospital_id: hospital.id.clone(),
                admission_id: admission_id.clone(),
                admission_date: start,
                discharge_date: discharge,
                cost,
                patient_age: patient.age,
                patient_gender: patient.gender,
            });
        }
    }
}

/// Generates a synthetic claims population. Output is a pure function of the
/// config (including its seed).
pub fn generate_synthetic_claims(cfg: &GeneratorConfig) -> Result<Vec<ClaimRecord>, ClaimsError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let width = cfg.n_hospitals.to_string().len().max(2);
    let mut clustering: Vec<f64> = (0..cfg.n_hospitals)
        .map(|i| if cfg.n_hospitals == 1 { 0.5 } else { i as f64 / (cfg.n_hospitals - 1) as f64 })
        .collect();
    clustering.shuffle(&mut rng);

    let mut physician_counter = 0usize;
    let mut hospitals: Vec<Hospital> = Vec::with_capacity(cfg.n_hospitals);
    for (h, &c) in clustering.iter().enumerate() {
        let size = rng.random_range(cfg.physicians_per_hospital[0]..=cfg.physicians_per_hospital[1]);
        let mut roster: Vec<String> = (0..size)
            .map(|_| {
                physician_counter += 1;
                format!("DR{physician_counter:05}")
            })
            .collect();
        let lead = roster.remove(0);
        let others = roster;

        let base = cfg.readmission_base_rate;
        let coupled = 2.0 * base * c;
        let readmission_prob = (1.0 - cfg.triangle_readmission_coupling) * base
            + cfg.triangle_readmission_coupling * coupled;
        hospitals.push(Hospital {
            id: format!("H{:0width$}", h + 1),
            lead,
            others,
            clustering: c,
            readmission_prob: readmission_prob.clamp(0.0, 1.0),
        });
    }

    // Visiting physicians: the first non-lead physician of the next hospital
    // also works here. Added after all rosters exist so ids stay stable.
    if cfg.n_hospitals > 1 {
        let visitors: Vec<Option<String>> = (0..cfg.n_hospitals)
            .map(|h| {
                rng.random_bool(cfg.visiting_physician_prob)
                    .then(|| hospitals[(h + 1) % cfg.n_hospitals].others.first().cloned())
                    .flatten()
            })
            .collect();
        for (hospital, visitor) in hospitals.iter_mut().zip(visitors) {
            if let Some(v) = visitor {
                hospital.others.push(v);
            }
        }
    }

    let age_dist = Normal::new(cfg.age_mean, cfg.age_sd).expect("finite normal parameters");
    let patients: Vec<Patient> = (0..cfg.n_patients)
        .map(|i| {
            let hospital = if i < cfg.n_hospitals { i } else { rng.random_range(0..cfg.n_hospitals) };
            let age = age_dist.sample(&mut rng).round().clamp(18.0, 100.0) as u32;
            let gender = if rng.random_bool(cfg.female_fraction) { Gender::Female } else { Gender::Male };
            Patient {
                id: format!("P{:05}", i + 1),
                hospital,
                age,
                gender,
            }
        })
        .collect();

    let mut emitter = Emitter {
        cfg,
        rng,
        claims: Vec::new(),
        next_admission: 1,
        hospital_cost: lognormal_with_mean(cfg.hospital_claim_cost_mean, cfg.cost_log_sd),
        medical_cost: lognormal_with_mean(cfg.medical_claim_cost_mean, cfg.cost_log_sd),
        ancillary_cost: lognormal_with_mean(cfg.ancillary_claim_cost_mean, cfg.cost_log_sd),
    };

    // Leave room after the index stay for a readmission and a later repeat.
    let latest_start = i64::from(cfg.span_days) - 100;
    for patient in &patients {
        let hospital = &hospitals[patient.hospital];
        let offset = emitter.rng.random_range(0..latest_start.max(1));
        let start = cfg.start_date + chrono::Duration::days(offset);
        let los = emitter.draw_los(cfg.los_mean);
        // later admissions of the same patient keep the index team
        let team = emitter.draw_team(hospital);
        emitter.emit_admission(hospital, &team, patient, start, los);
        let discharge = start + chrono::Duration::days(i64::from(los));

        let mut last_discharge = discharge;
        if emitter.rng.random_bool(hospital.readmission_prob) {
            let gap = emitter.rng.random_range(1..=cfg.readmission_max_gap_days);
            let re_start = discharge + chrono::Duration::days(i64::from(gap));
            let re_los = emitter.draw_los(cfg.readmission_los_mean);
            emitter.emit_admission(hospital, &team, patient, re_start, re_los);
            last_discharge = re_start + chrono::Duration::days(i64::from(re_los));
        }
        if emitter.rng.random_bool(cfg.repeat_admission_prob) {
            let gap = emitter.rng.random_range(60..=90);
            let rep_start = last_discharge + chrono::Duration::days(gap);
            let rep_los = emitter.draw_los(cfg.readmission_los_mean);
            emitter.emit_admission(hospital, &team, patient, rep_start, rep_los);
        }
    }
    Ok(emitter.claims)
}
