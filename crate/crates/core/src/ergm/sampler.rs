use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DenseGraph, ErgParams, ErgStatistics, ErgmError, McmcConfig};

/// Metropolis chain over graphs on a fixed node set. Each step proposes a
/// uniformly random dyad and toggles it with probability
/// `min(1, exp(params · delta))`. With probability `1 / (dyads + 1)` the
/// proposal is a null move instead, which keeps the chain aperiodic when
/// every toggle would be accepted (all parameters zero).
#[derive(Debug, Clone)]
pub struct Sampler {
    graph: DenseGraph,
    params: [f64; 4],
    rng: ChaCha8Rng,
    proposed: u64,
    accepted: u64,
    max_edges: Option<u64>,
}

impl Sampler {
    pub fn new(start: DenseGraph, params: &ErgParams, seed: u64) -> Self {
        Self::with_rng(start, params, ChaCha8Rng::seed_from_u64(seed))
    }

    pub(crate) fn with_rng(start: DenseGraph, params: &ErgParams, rng: ChaCha8Rng) -> Self {
        assert!(start.node_count() >= 2, "sampler needs at least two nodes");
        Sampler {
            graph: start,
            params: params.as_array(),
            rng,
            proposed: 0,
            accepted: 0,
            max_edges: None,
        }
    }

    /// Restricts the chain to graphs with at most `cap` edges; additions
    /// beyond it are rejected. The start graph must satisfy the cap.
    pub fn with_edge_cap(mut self, cap: u64) -> Self {
        assert!(self.graph.statistics().edges <= cap, "start graph exceeds the edge cap");
        self.max_edges = Some(cap);
        self
    }

    pub fn at_edge_cap(&self) -> bool {
        self.max_edges == Some(self.graph.statistics().edges)
    }

    pub fn set_params(&mut self, params: &ErgParams) {
        self.params = params.as_array();
    }

    /// Replaces the chain state, keeping parameters, RNG and counters.
    pub fn restart_from(&mut self, graph: DenseGraph) {
        if let Some(cap) = self.max_edges {
            assert!(graph.statistics().edges <= cap, "restart graph exceeds the edge cap");
        }
        self.graph = graph;
    }

    pub fn graph(&self) -> &DenseGraph {
        &self.graph
    }

    pub fn statistics(&self) -> ErgStatistics {
        self.graph.statistics()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 { 0.0 } else { self.accepted as f64 / self.proposed as f64 }
    }

    pub fn step(&mut self) {
        let n = self.graph.node_count();
        self.proposed += 1;
        let dyads = self.graph.dyad_count();
        if self.rng.random_range(0..=dyads) == dyads {
            return;
        }
        let a = self.rng.random_range(0..n);
        let mut b = self.rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let delta = self.graph.toggle_delta(a, b);
        if delta[0] > 0 && self.at_edge_cap() {
            return;
        }
        let log_ratio: f64 = self
            .params
            .iter()
            .zip(delta)
            .filter(|(p, _)| **p != 0.0)
            .map(|(p, d)| p * d as f64)
            .sum();
        if log_ratio >= 0.0 || self.rng.random::<f64>() < log_ratio.exp() {
            self.graph.toggle(a, b);
            self.accepted += 1;
        }
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    pub n_nodes: usize,
    pub samples: Vec<ErgStatistics>,
    pub acceptance_rate: f64,
    pub mean_density: f64,
    pub degenerate: bool,
}

/// Mean sampled density at an extreme the observed graph is not at.
pub fn is_degenerate(mean_density: f64, observed_density: Option<f64>) -> bool {
    let low = mean_density < 0.01 && observed_density.is_none_or(|d| d >= 0.01);
    let high = mean_density > 0.99 && observed_density.is_none_or(|d| d <= 0.99);
    low || high
}

/// Forward simulation from the empty graph: `burn_in` steps, then one
/// retained state every `thinning` steps.
pub fn sample_graphs(params: &ErgParams, n_nodes: usize, cfg: &McmcConfig) -> Result<SampleRun, ErgmError> {
    if n_nodes < 2 {
        return Err(ErgmError::TooFewNodes { needed: 2, got: n_nodes });
    }
    if !params.is_finite() {
        return Err(ErgmError::NonFiniteParams);
    }
    cfg.validate()?;
    let mut sampler = Sampler::new(DenseGraph::empty(n_nodes), params, cfg.seed);
    sampler.run(cfg.burn_in);
    let mut samples = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        sampler.run(cfg.thinning);
        samples.push(sampler.statistics());
    }
    let dyads = (n_nodes * (n_nodes - 1) / 2) as f64;
    let mean_density = samples.iter().map(|s| s.edges as f64).sum::<f64>() / (samples.len() as f64 * dyads);
    Ok(SampleRun {
        n_nodes,
        acceptance_rate: sampler.acceptance_rate(),
        mean_density,
        degenerate: is_degenerate(mean_density, None),
        samples,
    })
}
