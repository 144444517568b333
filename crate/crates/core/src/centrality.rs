//! Node centralities and Freeman network centralization.
//!
//! Degree centrality is the share of other actors adjacent to a node.
//! Betweenness counts, over all unordered pairs of other nodes, the fraction
//! of shortest paths that pass through the node. Centralization summarises
//! how far every node falls short of the most central one:
//!
//! ```text
//! degree:      sum_i (d* - d_i) / ((N - 1)(N - 2))          raw degrees
//! betweenness: sum_i (b'* - b'_i) / (N - 1)                 b' = b / ((N - 1)(N - 2) / 2)
//! ```
//!
//! Both indices are 1 for a star and 0 when every node is equally central.
//! Networks with fewer than three nodes have index 0.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::network::{density, Pcn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentralityKind {
    Degree,
    Betweenness,
}

/// Per-node centrality values aligned with [`Pcn::nodes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityVector {
    pub kind: CentralityKind,
    pub normalized: bool,
    pub nodes: Vec<String>,
    pub values: Vec<f64>,
}

impl CentralityVector {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.nodes
            .binary_search_by(|n| n.as_str().cmp(id))
            .ok()
            .map(|i| self.values[i])
    }

    /// Freeman-normalized betweenness: raw values divided by the number of
    /// pairs of other nodes, `(N - 1)(N - 2) / 2`. Already-normalized vectors
    /// and degree vectors are returned unchanged.
    pub fn normalized(&self) -> CentralityVector {
        if self.normalized || self.kind == CentralityKind::Degree {
            return self.clone();
        }
        let n = self.values.len() as f64;
        let pairs = (n - 1.0) * (n - 2.0) / 2.0;
        let values = if pairs > 0.0 {
            self.values.iter().map(|v| v / pairs).collect()
        } else {
            vec![0.0; self.values.len()]
        };
        CentralityVector {
            kind: self.kind,
            normalized: true,
            nodes: self.nodes.clone(),
            values,
        }
    }
}

/// `deg(i) / (N - 1)`; zero for a single node.
pub fn degree_centrality(pcn: &Pcn) -> CentralityVector {
    let n = pcn.node_count();
    let scale = if n >= 2 { 1.0 / (n as f64 - 1.0) } else { 0.0 };
    CentralityVector {
        kind: CentralityKind::Degree,
        normalized: true,
        nodes: pcn.nodes().to_vec(),
        values: (0..n).map(|i| pcn.degree(i) as f64 * scale).collect(),
    }
}

// Sources are processed in fixed-size chunks and the chunk sums added in
// order, so results do not depend on thread scheduling.
const SOURCE_CHUNK: usize = 32;

/// Raw (unnormalized) betweenness by shortest-path accumulation from every
/// source. Unreachable pairs contribute nothing.
pub fn betweenness_centrality(pcn: &Pcn) -> CentralityVector {
    let n = pcn.node_count();
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            let mut work = Workspace::new(n);
            for &s in chunk {
                work.accumulate_from(pcn, s, &mut acc);
            }
            acc
        })
        .collect();

    let mut values = vec![0.0; n];
    for part in partials {
        for (v, p) in values.iter_mut().zip(part) {
            *v += p;
        }
    }
    // every unordered pair was visited from both ends
    for v in &mut values {
        *v /= 2.0;
    }
    CentralityVector {
        kind: CentralityKind::Betweenness,
        normalized: false,
        nodes: pcn.nodes().to_vec(),
        values,
    }
}

struct Workspace {
    dist: Vec<i64>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    preds: Vec<Vec<usize>>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            dist: vec![-1; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            preds: vec![Vec::new(); n],
            order: Vec::with_capacity(n),
            queue: VecDeque::with_capacity(n),
        }
    }

    fn accumulate_from(&mut self, pcn: &Pcn, s: usize, acc: &mut [f64]) {
        self.dist.fill(-1);
        self.sigma.fill(0.0);
        self.delta.fill(0.0);
        for p in &mut self.preds {
            p.clear();
        }
        self.order.clear();

        self.dist[s] = 0;
        self.sigma[s] = 1.0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            for &w in pcn.neighbors(v) {
                if self.dist[w] < 0 {
                    self.dist[w] = self.dist[v] + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == self.dist[v] + 1 {
                    self.sigma[w] += self.sigma[v];
                    self.preds[w].push(v);
                }
            }
        }

        while let Some(w) = self.order.pop() {
            let coeff = (1.0 + self.delta[w]) / self.sigma[w];
            for &v in &self.preds[w] {
                self.delta[v] += self.sigma[v] * coeff;
            }
            if w != s {
                acc[w] += self.delta[w];
            }
        }
    }
}

/// Freeman degree centralization on raw degrees.
pub fn degree_centralization(pcn: &Pcn) -> f64 {
    let n = pcn.node_count();
    if n < 3 {
        return 0.0;
    }
    let degrees: Vec<usize> = (0..n).map(|i| pcn.degree(i)).collect();
    let max = degrees.iter().copied().max().unwrap_or(0);
    let spread: usize = degrees.iter().map(|&d| max - d).sum();
    spread as f64 / ((n - 1) * (n - 2)) as f64
}

/// Freeman betweenness centralization on normalized betweenness.
pub fn betweenness_centralization(pcn: &Pcn) -> f64 {
    if pcn.node_count() < 3 {
        return 0.0;
    }
    centralization_from_normalized(&betweenness_centrality(pcn).normalized())
}

fn centralization_from_normalized(normalized: &CentralityVector) -> f64 {
    let n = normalized.values.len();
    let max = normalized.values.iter().copied().fold(0.0, f64::max);
    let spread: f64 = normalized.values.iter().map(|v| max - v).sum();
    (spread / (n as f64 - 1.0)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralizationReport {
    pub hospital_id: String,
    pub n: usize,
    pub density: f64,
    pub degree_centralization: f64,
    pub betweenness_centralization: f64,
}

pub fn centralization_report(pcn: &Pcn) -> CentralizationReport {
    CentralizationReport {
        hospital_id: pcn.hospital_id.clone(),
        n: pcn.node_count(),
        density: density(pcn),
        degree_centralization: degree_centralization(pcn),
        betweenness_centralization: betweenness_centralization(pcn),
    }
}
