//! The staged analysis: claims, admissions and outcomes, collaboration
//! networks, centralization metrics, cost regressions, and the comparison of
//! Markov graph parameters between the hospitals with the highest and lowest
//! readmission rates.
//!
//! Every stage is a public function over plain data so the command-line
//! subcommands can run stages one at a time over the intermediate files and
//! reproduce [`run_pipeline`] exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centrality::{centralization_report, CentralizationReport};
use crate::claims::{
    build_admissions, generate_synthetic_claims, hospital_outcomes, parse_claims, write_claims, ClaimRecord,
    GeneratorConfig, HospitalOutcomes, DEFAULT_READMISSION_WINDOW_DAYS,
};
use crate::ergm::{
    compare_parameter_groups, derive_seed, estimate_parameters_with, ErgFit, EstimationSettings, FitSet, McmcConfig,
    ModelTerm,
};
use crate::network::{partition_pcns, write_edge_list, Pcn};
use crate::stats::{ols_moderation, ols_simple, RegressionFit, TTestResult, TestKind, DEFAULT_ALPHA, INTERCEPT};

pub const REPORT_SCHEMA: &str = "pcnlab.report/1";
pub const MANIFEST_SCHEMA: &str = "pcnlab.manifest/1";

pub const METRICS_HEADER: [&str; 5] = [
    "hospital_id",
    "N",
    "density",
    "degree_centralization",
    "betweenness_centralization",
];
pub const OUTCOMES_HEADER: [&str; 6] = [
    "hospital_id",
    "n_admissions",
    "mean_cost",
    "mean_los",
    "readmission_rate",
    "mean_patient_age",
];
pub const REGRESSION_HEADER: [&str; 7] = [
    "model",
    "dependent",
    "independent",
    "r_squared",
    "beta",
    "constant",
    "significance",
];

/// Network measures regressed on cost, in report order.
pub const MEASURES: [&str; 2] = ["degree_centralization", "betweenness_centralization"];
pub const OUTCOME: &str = "mean_cost";
pub const MODERATOR: &str = "mean_patient_age";
/// Fewest hospitals for which the regression stage runs; the full
/// moderation model has four coefficients.
pub const MIN_REGRESSION_ROWS: usize = 5;

/// Artifact file names inside the output directory.
pub mod files {
    pub const CLAIMS: &str = "claims.csv";
    pub const EDGES: &str = "pcn_edges.csv";
    pub const OUTCOMES: &str = "outcomes.csv";
    pub const METRICS: &str = "metrics.csv";
    pub const REGRESSION: &str = "regression.csv";
    pub const FITS_TOP: &str = "ergm_fits_top.json";
    pub const FITS_BOTTOM: &str = "ergm_fits_bottom.json";
    pub const COMPARISON: &str = "comparison.json";
    pub const FEATURES: &str = "features.csv";
    pub const REPORT: &str = "report.json";
    pub const MANIFEST: &str = "manifest.json";
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl PipelineError {
    fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            message: err.to_string(),
        }
    }

    pub fn stage_name(&self) -> Option<&'static str> {
        match self {
            PipelineError::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl std::fmt::Display) -> PipelineError {
    PipelineError::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Run settings. Deserializes from TOML with every field optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Claims CSV to analyse; synthetic claims from `generator` when absent.
    pub input: Option<PathBuf>,
    pub generator: GeneratorConfig,
    pub readmission_window: u32,
    /// Number of hospitals in each readmission group.
    pub group_size: usize,
    pub ergm_terms: Vec<ModelTerm>,
    /// Term whose estimates are compared between the groups.
    pub comparison_term: ModelTerm,
    pub mcmc: McmcConfig,
    pub estimation: EstimationSettings,
    /// Base seed. Seeds the generator and, per hospital, every ERG chain.
    pub seed: u64,
    pub test_kind: TestKind,
    /// Adds the moderator main effect to the moderation models.
    pub full_moderation: bool,
    pub alpha: f64,
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            generator: GeneratorConfig::default(),
            readmission_window: DEFAULT_READMISSION_WINDOW_DAYS,
            group_size: 5,
            ergm_terms: ModelTerm::ALL.to_vec(),
            comparison_term: ModelTerm::Triangle,
            mcmc: McmcConfig {
                thinning: 2_000,
                ..McmcConfig::default()
            },
            estimation: EstimationSettings::default(),
            seed: GeneratorConfig::default().seed,
            test_kind: TestKind::Pooled,
            full_moderation: false,
            alpha: DEFAULT_ALPHA,
            out_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.group_size < 2 {
            return Err(PipelineError::Config("group_size must be at least 2".into()));
        }
        if self.ergm_terms.is_empty() {
            return Err(PipelineError::Config("ergm_terms must not be empty".into()));
        }
        if !self.ergm_terms.contains(&self.comparison_term) {
            return Err(PipelineError::Config(format!(
                "comparison term {} is not among the model terms",
                self.comparison_term
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PipelineError::Config("alpha must lie in (0, 1)".into()));
        }
        self.mcmc.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Generator settings with the run seed applied.
    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            seed: self.seed,
            ..self.generator.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HospitalRow {
    pub metrics: CentralizationReport,
    pub outcomes: HospitalOutcomes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Simple,
    Moderation,
}

/// One fitted cost model. Term names are the measure, the moderator and
/// `measure*moderator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub kind: ModelKind,
    pub dependent: String,
    pub measure: String,
    pub fit: RegressionFit,
}

impl RegressionModel {
    pub fn name(&self) -> String {
        let kind = match self.kind {
            ModelKind::Simple => "simple",
            ModelKind::Moderation => "moderation",
        };
        format!("{kind}:{}", self.measure)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureLabel {
    Positive,
    Negative,
    Inconclusive,
}

impl FeatureLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureLabel::Positive => "positive",
            FeatureLabel::Negative => "negative",
            FeatureLabel::Inconclusive => "inconclusive",
        }
    }
}

/// Direction of a measure's association with the outcome: the sign of its
/// simple-regression slope when `p < alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub measure: String,
    pub outcome: String,
    pub beta: f64,
    pub p_value: f64,
    pub label: FeatureLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub hospital_id: String,
    pub error: String,
}

/// ERG fits for one readmission group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFits {
    pub hospitals: Vec<String>,
    pub fits: Vec<ErgFit>,
    pub failures: Vec<FitFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub term: ModelTerm,
    /// Hospitals whose converged fits entered the test.
    pub top_included: Vec<String>,
    pub bottom_included: Vec<String>,
    pub excluded: Vec<String>,
    pub test: TTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameworkReport {
    pub schema: String,
    pub seed: u64,
    pub readmission_window: u32,
    pub group_size: usize,
    pub ergm_terms: Vec<ModelTerm>,
    pub hospitals: Vec<HospitalRow>,
    pub regressions: Vec<RegressionModel>,
    /// Hospital ids by descending readmission rate.
    pub ranking: Vec<String>,
    pub top: Option<GroupFits>,
    pub bottom: Option<GroupFits>,
    pub comparison: Option<GroupComparison>,
    pub features: Vec<Feature>,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
    pub detail: Option<String>,
    pub files: Vec<String>,
}

/// Written last, also after a failure, so partial runs are self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub seed: u64,
    pub completed: bool,
    pub stages: Vec<StageRecord>,
}

// ---------------------------------------------------------------------------
// Stages

/// Reads a claims CSV.
pub fn load_claims(path: &Path) -> Result<Vec<ClaimRecord>, PipelineError> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_claims(std::io::BufReader::new(file)).map_err(|e| format_err(path, e))
}

/// Per-hospital outcomes from assembled admissions.
pub fn outcome_table(
    claims: &[ClaimRecord],
    readmission_window: u32,
) -> Result<BTreeMap<String, HospitalOutcomes>, PipelineError> {
    let admissions = build_admissions(claims, readmission_window).map_err(|e| PipelineError::stage("admissions", e))?;
    Ok(hospital_outcomes(&admissions))
}

/// Centralization metrics for every network, in hospital order.
pub fn metrics_table(pcns: &BTreeMap<String, Pcn>) -> Vec<CentralizationReport> {
    let list: Vec<&Pcn> = pcns.values().collect();
    list.par_iter().map(|p| centralization_report(p)).collect()
}

/// Joins metrics with outcomes; hospitals missing from either side are
/// reported in the returned notices.
pub fn join_rows(
    metrics: &[CentralizationReport],
    outcomes: &BTreeMap<String, HospitalOutcomes>,
) -> (Vec<HospitalRow>, Vec<String>) {
    let mut rows = Vec::new();
    let mut notices = Vec::new();
    for m in metrics {
        match outcomes.get(&m.hospital_id) {
            Some(o) => rows.push(HospitalRow {
                metrics: m.clone(),
                outcomes: o.clone(),
            }),
            None => notices.push(format!("hospital {} has a network but no admissions; left out", m.hospital_id)),
        }
    }
    for id in outcomes.keys() {
        if !metrics.iter().any(|m| &m.hospital_id == id) {
            notices.push(format!("hospital {id} has admissions but no physician claims; left out"));
        }
    }
    (rows, notices)
}

fn measure_values(rows: &[HospitalRow], measure: &str) -> Vec<f64> {
    rows.iter()
        .map(|r| match measure {
            "degree_centralization" => r.metrics.degree_centralization,
            "betweenness_centralization" => r.metrics.betweenness_centralization,
            "density" => r.metrics.density,
            other => unreachable!("unknown measure {other}"),
        })
        .collect()
}

fn rename_terms(fit: &mut RegressionFit, measure: &str) {
    for t in &mut fit.terms {
        t.name = match t.name.as_str() {
            "x" => measure.to_string(),
            "m" => MODERATOR.to_string(),
            "x*m" => format!("{measure}*{MODERATOR}"),
            other => other.to_string(),
        };
    }
}

/// Simple cost regressions for each measure, then the moderation models with
/// mean patient age.
pub fn fit_regressions(rows: &[HospitalRow], full_moderation: bool) -> Result<Vec<RegressionModel>, PipelineError> {
    let y: Vec<f64> = rows.iter().map(|r| r.outcomes.mean_cost).collect();
    let age: Vec<f64> = rows.iter().map(|r| r.outcomes.mean_patient_age).collect();
    let mut models = Vec::new();
    for kind in [ModelKind::Simple, ModelKind::Moderation] {
        for measure in MEASURES {
            let x = measure_values(rows, measure);
            let fitted = match kind {
                ModelKind::Simple => ols_simple(&y, &x),
                ModelKind::Moderation => ols_moderation(&y, &x, &age, full_moderation),
            };
            let mut fit = fitted.map_err(|e| PipelineError::stage("regression", format!("{measure}: {e}")))?;
            rename_terms(&mut fit, measure);
            models.push(RegressionModel {
                kind,
                dependent: OUTCOME.to_string(),
                measure: measure.to_string(),
                fit,
            });
        }
    }
    Ok(models)
}

/// Hospital ids by descending readmission rate, ties by id.
pub fn rank_by_readmission(rows: &[HospitalRow]) -> Vec<String> {
    let mut ranked: Vec<&HospitalRow> = rows.iter().filter(|r| r.outcomes.n_admissions > 0).collect();
    ranked.sort_by(|a, b| {
        b.outcomes
            .readmission_rate
            .total_cmp(&a.outcomes.readmission_rate)
            .then_with(|| a.metrics.hospital_id.cmp(&b.metrics.hospital_id))
    });
    ranked.into_iter().map(|r| r.metrics.hospital_id.clone()).collect()
}

/// Top and bottom `k` of a ranking, or `None` when there are fewer than `2k`.
pub fn select_groups(ranking: &[String], k: usize) -> Option<(Vec<String>, Vec<String>)> {
    if k == 0 || ranking.len() < 2 * k {
        return None;
    }
    let top = ranking[..k].to_vec();
    let bottom = ranking[ranking.len() - k..].to_vec();
    Some((top, bottom))
}

/// Fits every listed network. Each chain is seeded from the base seed and the
/// hospital id.
pub fn fit_networks(
    pcns: &BTreeMap<String, Pcn>,
    hospitals: &[String],
    terms: &[ModelTerm],
    mcmc: &McmcConfig,
    settings: &EstimationSettings,
    seed: u64,
) -> GroupFits {
    let results: Vec<Result<ErgFit, FitFailure>> = hospitals
        .par_iter()
        .map(|id| {
            let fail = |error: String| FitFailure {
                hospital_id: id.clone(),
                error,
            };
            let pcn = pcns.get(id).ok_or_else(|| fail("no network for this hospital".into()))?;
            let cfg = McmcConfig {
                seed: derive_seed(seed, id),
                ..*mcmc
            };
            estimate_parameters_with(pcn, terms, &cfg, settings).map_err(|e| fail(e.to_string()))
        })
        .collect();
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(f) => fits.push(f),
            Err(e) => failures.push(e),
        }
    }
    GroupFits {
        hospitals: hospitals.to_vec(),
        fits,
        failures,
    }
}

/// t-test on one parameter over the converged fits of each group.
pub fn compare_groups(
    top: &[ErgFit],
    bottom: &[ErgFit],
    term: ModelTerm,
    kind: TestKind,
) -> Result<GroupComparison, PipelineError> {
    let usable = |fits: &[ErgFit]| -> Vec<ErgFit> {
        fits.iter().filter(|f| f.converged && f.term(term).is_some()).cloned().collect()
    };
    let (a, b) = (usable(top), usable(bottom));
    let excluded = top
        .iter()
        .chain(bottom)
        .filter(|f| !(f.converged && f.term(term).is_some()))
        .map(|f| f.hospital_id.clone())
        .collect();
    let test = compare_parameter_groups(&a, &b, term, kind).map_err(|e| PipelineError::stage("comparison", e))?;
    Ok(GroupComparison {
        term,
        top_included: a.iter().map(|f| f.hospital_id.clone()).collect(),
        bottom_included: b.iter().map(|f| f.hospital_id.clone()).collect(),
        excluded,
        test,
    })
}

pub fn label_features(models: &[RegressionModel], alpha: f64) -> Vec<Feature> {
    models
        .iter()
        .filter(|m| m.kind == ModelKind::Simple)
        .filter_map(|m| {
            let t = m.fit.term(&m.measure)?;
            let label = if t.p_value < alpha && t.coefficient > 0.0 {
                FeatureLabel::Positive
            } else if t.p_value < alpha && t.coefficient < 0.0 {
                FeatureLabel::Negative
            } else {
                FeatureLabel::Inconclusive
            };
            Some(Feature {
                measure: m.measure.clone(),
                outcome: m.dependent.clone(),
                beta: t.coefficient,
                p_value: t.p_value,
                label,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// File formats

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, PipelineError> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>, PipelineError> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn finish_csv(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> Result<(), PipelineError> {
    w.flush().map_err(io_err(path))
}

/// Reads rows of a CSV whose header must match `header` exactly.
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>, PipelineError> {
    let mut r = csv_reader(path)?;
    let found = r.headers().map_err(|e| format_err(path, e))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(format_err(
            path,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    r.records().map(|rec| rec.map_err(|e| format_err(path, e))).collect()
}

fn parse_field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, PipelineError> {
    let line = rec.position().map_or(0, |p| p.line());
    rec.get(i)
        .unwrap_or("")
        .parse()
        .map_err(|_| format_err(path, format!("line {line}: invalid {name} `{}`", rec.get(i).unwrap_or(""))))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    std::fs::write(path, to_json(value)).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let mut text = String::new();
    File::open(path)
        .map_err(io_err(path))?
        .read_to_string(&mut text)
        .map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e))
}

pub fn write_claims_file(path: &Path, claims: &[ClaimRecord]) -> Result<(), PipelineError> {
    let mut w = create(path)?;
    write_claims(claims, &mut w).map_err(|e| format_err(path, e))?;
    w.flush().map_err(io_err(path))
}

pub fn write_edges_file(path: &Path, pcns: &BTreeMap<String, Pcn>) -> Result<(), PipelineError> {
    let mut w = create(path)?;
    write_edge_list(pcns.values(), &mut w).map_err(|e| format_err(path, e))?;
    w.flush().map_err(io_err(path))
}

pub fn read_edges_file(path: &Path) -> Result<BTreeMap<String, Pcn>, PipelineError> {
    let file = File::open(path).map_err(io_err(path))?;
    crate::network::read_edge_list(std::io::BufReader::new(file)).map_err(|e| format_err(path, e))
}

pub fn write_metrics(path: &Path, metrics: &[CentralizationReport]) -> Result<(), PipelineError> {
    let mut w = csv_writer(path)?;
    let wr = |e: csv::Error| format_err(path, e);
    w.write_record(METRICS_HEADER).map_err(wr)?;
    for m in metrics {
        w.write_record([
            m.hospital_id.clone(),
            m.n.to_string(),
            m.density.to_string(),
            m.degree_centralization.to_string(),
            m.betweenness_centralization.to_string(),
        ])
        .map_err(wr)?;
    }
    finish_csv(path, w)
}

pub fn read_metrics(path: &Path) -> Result<Vec<CentralizationReport>, PipelineError> {
    read_rows(path, &METRICS_HEADER)?
        .iter()
        .map(|r| {
            Ok(CentralizationReport {
                hospital_id: r.get(0).unwrap_or("").to_string(),
                n: parse_field(path, r, 1, "N")?,
                density: parse_field(path, r, 2, "density")?,
                degree_centralization: parse_field(path, r, 3, "degree_centralization")?,
                betweenness_centralization: parse_field(path, r, 4, "betweenness_centralization")?,
            })
        })
        .collect()
}

pub fn write_outcomes(path: &Path, outcomes: &BTreeMap<String, HospitalOutcomes>) -> Result<(), PipelineError> {
    let mut w = csv_writer(path)?;
    let wr = |e: csv::Error| format_err(path, e);
    w.write_record(OUTCOMES_HEADER).map_err(wr)?;
    for o in outcomes.values() {
        w.write_record([
            o.hospital_id.clone(),
            o.n_admissions.to_string(),
            o.mean_cost.to_string(),
            o.mean_los.to_string(),
            o.readmission_rate.to_string(),
            o.mean_patient_age.to_string(),
        ])
        .map_err(wr)?;
    }
    finish_csv(path, w)
}

pub fn read_outcomes(path: &Path) -> Result<BTreeMap<String, HospitalOutcomes>, PipelineError> {
    read_rows(path, &OUTCOMES_HEADER)?
        .iter()
        .map(|r| {
            let o = HospitalOutcomes {
                hospital_id: r.get(0).unwrap_or("").to_string(),
                n_admissions: parse_field(path, r, 1, "n_admissions")?,
                mean_cost: parse_field(path, r, 2, "mean_cost")?,
                mean_los: parse_field(path, r, 3, "mean_los")?,
                readmission_rate: parse_field(path, r, 4, "readmission_rate")?,
                mean_patient_age: parse_field(path, r, 5, "mean_patient_age")?,
            };
            Ok((o.hospital_id.clone(), o))
        })
        .collect()
}

/// Table-style rows: one per slope of each model; `constant` and
/// `r_squared` repeat the model-level values.
pub fn write_regressions(path: &Path, models: &[RegressionModel]) -> Result<(), PipelineError> {
    let mut w = csv_writer(path)?;
    let wr = |e: csv::Error| format_err(path, e);
    w.write_record(REGRESSION_HEADER).map_err(wr)?;
    for m in models {
        for t in m.fit.terms.iter().filter(|t| t.name != INTERCEPT) {
            w.write_record([
                m.name(),
                m.dependent.clone(),
                t.name.clone(),
                m.fit.r_squared.to_string(),
                t.coefficient.to_string(),
                m.fit.intercept().to_string(),
                t.p_value.to_string(),
            ])
            .map_err(wr)?;
        }
    }
    finish_csv(path, w)
}

pub fn write_features(path: &Path, features: &[Feature]) -> Result<(), PipelineError> {
    let mut w = csv_writer(path)?;
    let wr = |e: csv::Error| format_err(path, e);
    w.write_record(["measure", "outcome", "beta", "p_value", "label"]).map_err(wr)?;
    for f in features {
        w.write_record([
            f.measure.clone(),
            f.outcome.clone(),
            f.beta.to_string(),
            f.p_value.to_string(),
            f.label.as_str().to_string(),
        ])
        .map_err(wr)?;
    }
    finish_csv(path, w)
}

pub fn write_fit_set(path: &Path, fits: &[ErgFit]) -> Result<(), PipelineError> {
    let text = FitSet::new(fits.to_vec()).to_json();
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_fit_set(path: &Path) -> Result<FitSet, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    FitSet::from_json(&text).map_err(|e| format_err(path, e))
}

// ---------------------------------------------------------------------------
// Orchestration

struct Recorder<'a> {
    out_dir: Option<&'a Path>,
    stages: Vec<StageRecord>,
}

impl Recorder<'_> {
    fn path(&self, name: &str) -> Option<PathBuf> {
        self.out_dir.map(|d| d.join(name))
    }

    fn ok(&mut self, stage: &str, files: &[&str]) {
        self.push(stage, StageStatus::Ok, None, files);
    }

    fn push(&mut self, stage: &str, status: StageStatus, detail: Option<String>, files: &[&str]) {
        let files = if self.out_dir.is_some() {
            files.iter().map(|f| f.to_string()).collect()
        } else {
            Vec::new()
        };
        self.stages.push(StageRecord {
            stage: stage.to_string(),
            status,
            detail,
            files,
        });
    }

    fn write_manifest(&self, seed: u64, completed: bool) -> Result<(), PipelineError> {
        match self.path(files::MANIFEST) {
            Some(path) => write_json(
                &path,
                &Manifest {
                    schema: MANIFEST_SCHEMA.to_string(),
                    seed,
                    completed,
                    stages: self.stages.clone(),
                },
            ),
            None => Ok(()),
        }
    }
}

/// Runs every stage in order and, when `out_dir` is set, writes the
/// artifacts and a manifest. A failing stage stops the run; the files
/// written so far stay in place and the manifest names the failure.
pub fn run_pipeline(config: &PipelineConfig) -> Result<FrameworkReport, PipelineError> {
    config.validate()?;
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut rec = Recorder {
        out_dir: config.out_dir.as_deref(),
        stages: Vec::new(),
    };
    let result = run_stages(config, &mut rec);
    if let Err(e) = &result {
        let stage = e.stage_name().unwrap_or("io");
        rec.push(stage, StageStatus::Failed, Some(e.to_string()), &[]);
    }
    rec.write_manifest(config.seed, result.is_ok())?;
    result
}

fn run_stages(config: &PipelineConfig, rec: &mut Recorder<'_>) -> Result<FrameworkReport, PipelineError> {
    let mut notices = Vec::new();

    let claims = match &config.input {
        Some(path) => {
            let claims = load_claims(path).map_err(|e| PipelineError::stage("ingest", e))?;
            rec.ok("ingest", &[]);
            claims
        }
        None => {
            let claims =
                generate_synthetic_claims(&config.generator_config()).map_err(|e| PipelineError::stage("ingest", e))?;
            if let Some(path) = rec.path(files::CLAIMS) {
                write_claims_file(&path, &claims)?;
            }
            rec.ok("ingest", &[files::CLAIMS]);
            claims
        }
    };
    log::info!("ingested {} claims", claims.len());

    let outcomes = outcome_table(&claims, config.readmission_window)?;
    if let Some(path) = rec.path(files::OUTCOMES) {
        write_outcomes(&path, &outcomes)?;
    }
    rec.ok("admissions", &[files::OUTCOMES]);

    let pcns = partition_pcns(&claims);
    if pcns.is_empty() {
        return Err(PipelineError::stage("networks", "no medical claims, so no collaboration networks"));
    }
    if let Some(path) = rec.path(files::EDGES) {
        write_edges_file(&path, &pcns)?;
    }
    rec.ok("networks", &[files::EDGES]);
    log::info!("built {} collaboration networks", pcns.len());

    let metrics = metrics_table(&pcns);
    if let Some(path) = rec.path(files::METRICS) {
        write_metrics(&path, &metrics)?;
    }
    rec.ok("metrics", &[files::METRICS]);

    let (rows, join_notices) = join_rows(&metrics, &outcomes);
    notices.extend(join_notices);

    let (regressions, features) = if rows.len() < MIN_REGRESSION_ROWS {
        let msg = format!(
            "regressions skipped: {} hospitals, at least {MIN_REGRESSION_ROWS} needed",
            rows.len()
        );
        log::warn!("{msg}");
        notices.push(msg.clone());
        rec.push("regression", StageStatus::Skipped, Some(msg.clone()), &[]);
        rec.push("features", StageStatus::Skipped, Some(msg), &[]);
        (Vec::new(), Vec::new())
    } else {
        let regressions = fit_regressions(&rows, config.full_moderation)?;
        if let Some(path) = rec.path(files::REGRESSION) {
            write_regressions(&path, &regressions)?;
        }
        rec.ok("regression", &[files::REGRESSION]);

        let features = label_features(&regressions, config.alpha);
        if let Some(path) = rec.path(files::FEATURES) {
            write_features(&path, &features)?;
        }
        rec.ok("features", &[files::FEATURES]);
        (regressions, features)
    };

    let ranking = rank_by_readmission(&rows);
    let (mut top, mut bottom, mut comparison) = (None, None, None);
    match select_groups(&ranking, config.group_size) {
        None => {
            let msg = format!(
                "group comparison skipped: {} networks with admissions, {} needed for two groups of {}",
                ranking.len(),
                2 * config.group_size,
                config.group_size
            );
            log::warn!("{msg}");
            notices.push(msg.clone());
            rec.push("ergm", StageStatus::Skipped, Some(msg.clone()), &[]);
            rec.push("comparison", StageStatus::Skipped, Some(msg), &[]);
        }
        Some((top_ids, bottom_ids)) => {
            let fit = |ids: &[String]| {
                fit_networks(&pcns, ids, &config.ergm_terms, &config.mcmc, &config.estimation, config.seed)
            };
            let (t, b) = (fit(&top_ids), fit(&bottom_ids));
            for f in t.failures.iter().chain(&b.failures) {
                notices.push(format!("ERG fit for {} failed: {}", f.hospital_id, f.error));
            }
            for f in t.fits.iter().chain(&b.fits).filter(|f| !f.converged) {
                notices.push(format!(
                    "ERG fit for {} did not converge (max |ratio| {:.3}); left out of the comparison",
                    f.hospital_id,
                    f.max_abs_convergence_ratio()
                ));
            }
            if let (Some(pt), Some(pb)) = (rec.path(files::FITS_TOP), rec.path(files::FITS_BOTTOM)) {
                write_fit_set(&pt, &t.fits)?;
                write_fit_set(&pb, &b.fits)?;
            }
            rec.ok("ergm", &[files::FITS_TOP, files::FITS_BOTTOM]);

            match compare_groups(&t.fits, &b.fits, config.comparison_term, config.test_kind) {
                Ok(c) => {
                    if let Some(path) = rec.path(files::COMPARISON) {
                        write_json(&path, &c)?;
                    }
                    rec.ok("comparison", &[files::COMPARISON]);
                    comparison = Some(c);
                }
                Err(e) => {
                    let msg = format!("group comparison skipped: {e}");
                    log::warn!("{msg}");
                    notices.push(msg.clone());
                    rec.push("comparison", StageStatus::Skipped, Some(msg), &[]);
                }
            }
            top = Some(t);
            bottom = Some(b);
        }
    }

    let report = FrameworkReport {
        schema: REPORT_SCHEMA.to_string(),
        seed: config.seed,
        readmission_window: config.readmission_window,
        group_size: config.group_size,
        ergm_terms: config.ergm_terms.clone(),
        hospitals: rows,
        regressions,
        ranking,
        top,
        bottom,
        comparison,
        features,
        notices,
    };
    if let Some(path) = rec.path(files::REPORT) {
        write_json(&path, &report)?;
    }
    rec.ok("report", &[files::REPORT]);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PipelineConfig {
        PipelineConfig {
            generator: GeneratorConfig {
                n_hospitals: 12,
                n_patients: 400,
                triangle_readmission_coupling: 1.0,
                ..GeneratorConfig::default()
            },
            group_size: 2,
            mcmc: McmcConfig {
                burn_in: 2_000,
                thinning: 200,
                n_samples: 300,
                seed: 1,
                max_phase_iterations: 2,
            },
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn groups_need_twice_k_networks() {
        let ids: Vec<String> = (0..5).map(|i| format!("h{i}")).collect();
        assert!(select_groups(&ids, 3).is_none());
        let (top, bottom) = select_groups(&ids, 2).unwrap();
        assert_eq!(top, ["h0", "h1"]);
        assert_eq!(bottom, ["h3", "h4"]);
    }

    #[test]
    fn features_follow_slope_sign_and_significance() {
        let y = [1.0, 2.1, 2.9, 4.2, 5.0, 5.9];
        let mk = |name: &str, x: &[f64]| {
            let mut fit = ols_simple(&y, x).unwrap();
            rename_terms(&mut fit, name);
            RegressionModel {
                kind: ModelKind::Simple,
                dependent: OUTCOME.into(),
                measure: name.into(),
                fit,
            }
        };
        let models = [
            mk("up", &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            mk("down", &[6.0, 5.0, 4.0, 3.0, 2.0, 1.0]),
            mk("flat", &[1.0, -1.0, 1.0, -1.0, -1.0, 1.0]),
        ];
        let labels: Vec<_> = label_features(&models, 0.05).into_iter().map(|f| f.label).collect();
        assert_eq!(labels, [FeatureLabel::Positive, FeatureLabel::Negative, FeatureLabel::Inconclusive]);
    }

    #[test]
    fn small_run_has_every_section() {
        let report = run_pipeline(&small()).unwrap();
        assert_eq!(report.hospitals.len(), 12);
        assert_eq!(report.regressions.len(), 4);
        assert_eq!(report.ranking.len(), 12);
        let top = report.top.as_ref().unwrap();
        assert_eq!(top.hospitals, report.ranking[..2]);
        assert_eq!(top.fits.len() + top.failures.len(), 2);
    }

    #[test]
    fn single_hospital_skips_the_comparison() {
        let cfg = PipelineConfig {
            generator: GeneratorConfig {
                n_hospitals: 1,
                n_patients: 30,
                ..GeneratorConfig::default()
            },
            ..small()
        };
        let report = run_pipeline(&cfg).unwrap();
        assert!(report.comparison.is_none() && report.top.is_none());
        assert!(report.notices.iter().any(|n| n.contains("skipped")), "{:?}", report.notices);
    }

    #[test]
    fn config_reads_from_toml() {
        let cfg = PipelineConfig::from_toml(
            "seed = 3\ngroup_size = 4\nergm_terms = [\"edge\", \"triangle\"]\n[mcmc]\nburn_in = 10\nthinning = 5\nn_samples = 20\nseed = 0\nmax_phase_iterations = 1\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.group_size, 4);
        assert_eq!(cfg.ergm_terms, [ModelTerm::Edge, ModelTerm::Triangle]);
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
        let bad = PipelineConfig {
            group_size: 1,
            ..PipelineConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
