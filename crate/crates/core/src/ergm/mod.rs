//! Markov random graph models for undirected networks.
//!
//! The model family weights a graph `x` by
//!
//! ```text
//! Pr(X = x) = exp{ theta L(x) + sigma2 S2(x) + sigma3 S3(x) + tau T(x) } / k
//! ```
//!
//! with `L` the edge count, `S2`/`S3` the 2-star and 3-star counts and `T`
//! the triangle count. The normalizer `k` is never computed; sampling uses a
//! single-dyad Metropolis chain and estimation uses stochastic approximation
//! on simulated statistics.

mod estimate;
mod graph;
mod report;
mod sampler;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::network::Pcn;
use crate::stats::StatsError;

pub use estimate::{
    compare_parameter_groups, estimate_parameters, estimate_parameters_with, is_significant,
    parameter_significance, ErgFit, EstimationSettings, TermFit, CONVERGENCE_THRESHOLD,
    SIGNIFICANCE_T,
};
pub use graph::DenseGraph;
pub use report::{FitSet, FIT_SCHEMA};
pub use sampler::{is_degenerate, sample_graphs, SampleRun, Sampler};

#[derive(Debug, thiserror::Error)]
pub enum ErgmError {
    #[error("nodes must differ (got {0} twice)")]
    SelfLoop(usize),
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("need at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },
    #[error("observed {term} statistic is at its boundary ({value}); the estimate would diverge, drop the term or use a smaller model")]
    Boundary { term: ModelTerm, value: u64 },
    #[error("model needs at least one term")]
    EmptyModel,
    #[error("unknown model term `{0}`")]
    UnknownTerm(String),
    #[error("invalid MCMC settings: {0}")]
    InvalidConfig(String),
    #[error("parameters must be finite")]
    NonFiniteParams,
    #[error("fit for {0} did not converge")]
    NotConverged(String),
    #[error("term {0} is not in every fit")]
    MissingTerm(ModelTerm),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Edge, 2-star, 3-star and triangle counts of a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErgStatistics {
    pub edges: u64,
    pub two_stars: u64,
    pub three_stars: u64,
    pub triangles: u64,
}

impl ErgStatistics {
    pub fn as_array(&self) -> [u64; 4] {
        [self.edges, self.two_stars, self.three_stars, self.triangles]
    }

    pub fn get(&self, term: ModelTerm) -> u64 {
        self.as_array()[term.index()]
    }

    pub(crate) fn apply(&mut self, delta: [i64; 4]) {
        let apply = |v: &mut u64, d: i64| {
            *v = v.checked_add_signed(d).expect("statistic underflow");
        };
        apply(&mut self.edges, delta[0]);
        apply(&mut self.two_stars, delta[1]);
        apply(&mut self.three_stars, delta[2]);
        apply(&mut self.triangles, delta[3]);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErgParams {
    /// Edge (density) parameter.
    pub theta: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    /// Triangle parameter.
    pub tau: f64,
}

impl ErgParams {
    pub fn new(theta: f64, sigma2: f64, sigma3: f64, tau: f64) -> Self {
        ErgParams { theta, sigma2, sigma3, tau }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.theta, self.sigma2, self.sigma3, self.tau]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        ErgParams::new(a[0], a[1], a[2], a[3])
    }

    pub fn get(&self, term: ModelTerm) -> f64 {
        self.as_array()[term.index()]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Log of the unnormalized weight `exp(params · stats)`.
    pub fn log_weight(&self, stats: &ErgStatistics) -> f64 {
        self.as_array()
            .iter()
            .zip(stats.as_array())
            .map(|(p, s)| p * s as f64)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelTerm {
    #[serde(rename = "edge")]
    Edge,
    #[serde(rename = "2-star")]
    TwoStar,
    #[serde(rename = "3-star")]
    ThreeStar,
    #[serde(rename = "triangle")]
    Triangle,
}

impl ModelTerm {
    pub const ALL: [ModelTerm; 4] = [
        ModelTerm::Edge,
        ModelTerm::TwoStar,
        ModelTerm::ThreeStar,
        ModelTerm::Triangle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelTerm::Edge => "edge",
            ModelTerm::TwoStar => "2-star",
            ModelTerm::ThreeStar => "3-star",
            ModelTerm::Triangle => "triangle",
        }
    }
}

impl fmt::Display for ModelTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelTerm {
    type Err = ErgmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "edge" | "edges" | "density" => Ok(ModelTerm::Edge),
            "2-star" | "2star" | "twostar" | "two-star" => Ok(ModelTerm::TwoStar),
            "3-star" | "3star" | "threestar" | "three-star" => Ok(ModelTerm::ThreeStar),
            "triangle" | "triangles" => Ok(ModelTerm::Triangle),
            _ => Err(ErgmError::UnknownTerm(s.to_string())),
        }
    }
}

/// Parses a comma-separated term list such as `edge,2-star,triangle`.
/// Terms come back deduplicated in canonical order.
pub fn parse_model(spec: &str) -> Result<Vec<ModelTerm>, ErgmError> {
    let mut terms = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<ModelTerm>, _>>()?;
    terms.sort();
    terms.dedup();
    if terms.is_empty() {
        return Err(ErgmError::EmptyModel);
    }
    Ok(terms)
}

/// Chain settings. All step counts are in single-dyad proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub burn_in: u64,
    pub thinning: u64,
    pub n_samples: usize,
    pub seed: u64,
    /// Upper bound on final-phase refinement rounds during estimation.
    pub max_phase_iterations: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            burn_in: 20_000,
            thinning: 1_000,
            n_samples: 2_000,
            seed: 1,
            max_phase_iterations: 6,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<(), ErgmError> {
        if self.burn_in == 0 || self.thinning == 0 || self.n_samples == 0 || self.max_phase_iterations == 0 {
            return Err(ErgmError::InvalidConfig(
                "burn_in, thinning, n_samples and max_phase_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Chain seed for one network, derived from a base seed and a label such as
/// the hospital id (FNV-1a over the label, then a SplitMix64 finalizer).
/// Fitting a subset of networks therefore reproduces the full run's fits.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = base ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Exact `(L, S2, S3, T)` of a simple undirected graph.
pub fn count_statistics(pcn: &Pcn) -> ErgStatistics {
    graph::count_from_adjacency(pcn)
}

/// Change statistics for toggling dyad `(i, j)`: positive when the edge is
/// absent (addition), negated when present (deletion).
pub fn change_statistics(pcn: &Pcn, i: usize, j: usize) -> Result<[i64; 4], ErgmError> {
    if i == j {
        return Err(ErgmError::SelfLoop(i));
    }
    for v in [i, j] {
        if v >= pcn.node_count() {
            return Err(ErgmError::NodeOutOfRange(v));
        }
    }
    let present = pcn.has_edge(i, j);
    let excl = |v: usize| pcn.degree(v) as u64 - u64::from(present);
    let (ni, nj) = (pcn.neighbors(i), pcn.neighbors(j));
    let common = ni.iter().filter(|v| nj.binary_search(v).is_ok()).count() as u64;
    let delta = graph::add_delta(excl(i), excl(j), common);
    Ok(if present { delta.map(|v| -v) } else { delta })
}
