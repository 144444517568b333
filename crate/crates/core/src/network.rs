//! Patient–physician bipartite graphs and their one-mode projection onto
//! physician collaboration networks (PCNs).
//!
//! Two physicians are linked in a hospital's PCN when they treated at least
//! one common patient there. Only medical claims identify physicians, so only
//! they contribute. Edge weights count distinct shared patients; the network
//! measures downstream use the binary graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::Serialize;

use crate::claims::{ClaimKind, ClaimRecord};

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("edge list csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("edge list line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("hospital {hospital}: {message}")]
    Invalid { hospital: String, message: String },
}

pub const EDGE_LIST_HEADER: [&str; 4] = ["hospital_id", "physician_a", "physician_b", "weight"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BipartiteGraph {
    pub hospital_id: String,
    pub patients: BTreeSet<String>,
    pub physicians: BTreeSet<String>,
    /// Distinct `(patient, physician)` pairs.
    pub visits: BTreeSet<(String, String)>,
}

/// Collects the distinct patient–physician visits of one hospital's medical
/// claims.
pub fn build_bipartite(claims: &[ClaimRecord], hospital: &str) -> BipartiteGraph {
    let mut bg = BipartiteGraph {
        hospital_id: hospital.to_string(),
        ..BipartiteGraph::default()
    };
    for c in claims
        .iter()
        .filter(|c| c.claim_kind == ClaimKind::Medical && c.hospital_id == hospital)
    {
        bg.patients.insert(c.patient_id.clone());
        bg.physicians.insert(c.provider_id.clone());
        bg.visits.insert((c.patient_id.clone(), c.provider_id.clone()));
    }
    bg
}

/// Simple undirected physician graph of one hospital.
///
/// Nodes are kept sorted by id and addressed by their position; adjacency
/// lists are sorted and free of self-loops and duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Pcn {
    pub hospital_id: String,
    nodes: Vec<String>,
    adjacency: Vec<Vec<usize>>,
    weights: BTreeMap<(usize, usize), u32>,
}

impl Pcn {
    /// Builds a PCN from node ids and weighted edges between them. Edge
    /// endpoints missing from `nodes` are added.
    pub fn from_edges<N, E>(hospital_id: &str, nodes: N, edges: E) -> Result<Pcn, NetworkError>
    where
        N: IntoIterator<Item = String>,
        E: IntoIterator<Item = (String, String, u32)>,
    {
        let edges: Vec<(String, String, u32)> = edges.into_iter().collect();
        let mut ids: BTreeSet<String> = nodes.into_iter().collect();
        for (a, b, _) in &edges {
            ids.insert(a.clone());
            ids.insert(b.clone());
        }
        let nodes: Vec<String> = ids.into_iter().collect();
        let invalid = |message: String| NetworkError::Invalid {
            hospital: hospital_id.to_string(),
            message,
        };
        let mut weights = BTreeMap::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(invalid(format!("self-loop on {a}")));
            }
            if w == 0 {
                return Err(invalid(format!("edge {a}-{b} has zero weight")));
            }
            let ia = nodes.binary_search(&a).expect("inserted above");
            let ib = nodes.binary_search(&b).expect("inserted above");
            let key = (ia.min(ib), ia.max(ib));
            if weights.insert(key, w).is_some() {
                return Err(invalid(format!("duplicate edge {a}-{b}")));
            }
        }
        Ok(Self::assemble(hospital_id, nodes, weights))
    }

    /// Unit-weight graph on nodes `n0..n{count-1}`, mainly for tests and
    /// simulation output.
    pub fn from_index_edges(hospital_id: &str, count: usize, edges: &[(usize, usize)]) -> Pcn {
        let width = count.saturating_sub(1).to_string().len();
        let nodes: Vec<String> = (0..count).map(|i| format!("n{i:0width$}")).collect();
        let weights = edges
            .iter()
            .filter(|(a, b)| a != b)
            .map(|&(a, b)| {
                assert!(a < count && b < count, "edge ({a}, {b}) out of range");
                ((a.min(b), a.max(b)), 1)
            })
            .collect();
        Self::assemble(hospital_id, nodes, weights)
    }

    fn assemble(hospital_id: &str, nodes: Vec<String>, weights: BTreeMap<(usize, usize), u32>) -> Pcn {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for &(a, b) in weights.keys() {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Pcn {
            hospital_id: hospital_id.to_string(),
            nodes,
            adjacency,
            weights,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(id)).ok()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<u32> {
        self.weights.get(&(a.min(b), a.max(b))).copied()
    }

    /// Edges as `(a, b, weight)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.weights.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    /// Renders the graph in Graphviz DOT syntax.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graph \"{}\" {{", escape_dot(&self.hospital_id));
        for id in &self.nodes {
            let _ = writeln!(out, "  \"{}\";", escape_dot(id));
        }
        for (a, b, w) in self.edges() {
            let _ = writeln!(
                out,
                "  \"{}\" -- \"{}\" [weight={w}];",
                escape_dot(&self.nodes[a]),
                escape_dot(&self.nodes[b])
            );
        }
        out.push_str("}\n");
        out
    }
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// One-mode projection: physicians become nodes (isolates included), linked
/// with weight equal to the number of distinct shared patients.
pub fn project_pcn(bg: &BipartiteGraph) -> Pcn {
    let nodes: Vec<String> = bg.physicians.iter().cloned().collect();
    let mut by_patient: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (patient, physician) in &bg.visits {
        let idx = nodes
            .binary_search(physician)
            .expect("visit endpoint must be a listed physician");
        by_patient.entry(patient.as_str()).or_default().push(idx);
    }
    let mut weights: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for physicians in by_patient.values() {
        // visits are distinct pairs, so each list is duplicate-free
        for (k, &a) in physicians.iter().enumerate() {
            for &b in &physicians[k + 1..] {
                *weights.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
    }
    Pcn::assemble(&bg.hospital_id, nodes, weights)
}

/// One PCN per hospital that has at least one medical claim.
pub fn partition_pcns(claims: &[ClaimRecord]) -> BTreeMap<String, Pcn> {
    let mut per_hospital: BTreeMap<&str, BipartiteGraph> = BTreeMap::new();
    for c in claims.iter().filter(|c| c.claim_kind == ClaimKind::Medical) {
        let bg = per_hospital
            .entry(c.hospital_id.as_str())
            .or_insert_with(|| BipartiteGraph {
                hospital_id: c.hospital_id.clone(),
                ..BipartiteGraph::default()
            });
        bg.patients.insert(c.patient_id.clone());
        bg.physicians.insert(c.provider_id.clone());
        bg.visits.insert((c.patient_id.clone(), c.provider_id.clone()));
    }
    per_hospital
        .into_iter()
        .map(|(h, bg)| (h.to_string(), project_pcn(&bg)))
        .collect()
}

/// `2|E| / (N(N-1))`, zero for fewer than two nodes.
pub fn density(pcn: &Pcn) -> f64 {
    let n = pcn.node_count();
    if n < 2 {
        return 0.0;
    }
    2.0 * pcn.edge_count() as f64 / (n as f64 * (n as f64 - 1.0))
}

/// Writes PCNs as an edge list. Isolated physicians get a row with an empty
/// `physician_b` and weight 0 so node sets survive a round trip.
pub fn write_edge_list<'a, W, I>(pcns: I, sink: W) -> Result<(), NetworkError>
where
    W: Write,
    I: IntoIterator<Item = &'a Pcn>,
{
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(EDGE_LIST_HEADER)?;
    for pcn in pcns {
        for (a, b, w) in pcn.edges() {
            writer.write_record([
                pcn.hospital_id.as_str(),
                &pcn.nodes[a],
                &pcn.nodes[b],
                &w.to_string(),
            ])?;
        }
        for (i, id) in pcn.nodes.iter().enumerate() {
            if pcn.degree(i) == 0 {
                writer.write_record([pcn.hospital_id.as_str(), id, "", "0"])?;
            }
        }
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads an edge list written by [`write_edge_list`] or prepared by hand.
/// A missing `weight` column means unit weights.
pub fn read_edge_list<R: Read>(source: R) -> Result<BTreeMap<String, Pcn>, NetworkError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| NetworkError::Row {
        line: 1,
        message: format!("missing column `{name}`"),
    };
    let h_col = col("hospital_id").ok_or_else(|| missing("hospital_id"))?;
    let a_col = col("physician_a").ok_or_else(|| missing("physician_a"))?;
    let b_col = col("physician_b").ok_or_else(|| missing("physician_b"))?;
    let w_col = col("weight");

    type Parts = (BTreeSet<String>, Vec<(String, String, u32)>);
    let mut parts: BTreeMap<String, Parts> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        let hospital = field(h_col);
        let a = field(a_col);
        let b = field(b_col);
        if hospital.is_empty() || a.is_empty() {
            return Err(NetworkError::Row {
                line,
                message: "hospital_id and physician_a are required".into(),
            });
        }
        let weight: u32 = match w_col.map(field) {
            None => 1,
            Some(w) if w.is_empty() => 1,
            Some(w) => w.parse().map_err(|_| NetworkError::Row {
                line,
                message: format!("invalid weight `{w}`"),
            })?,
        };
        let entry = parts.entry(hospital).or_default();
        entry.0.insert(a.clone());
        if b.is_empty() {
            continue;
        }
        if weight == 0 {
            return Err(NetworkError::Row {
                line,
                message: "edge rows need a positive weight".into(),
            });
        }
        entry.1.push((a, b, weight));
    }
    parts
        .into_iter()
        .map(|(h, (nodes, edges))| Pcn::from_edges(&h, nodes, edges).map(|p| (h, p)))
        .collect()
}
