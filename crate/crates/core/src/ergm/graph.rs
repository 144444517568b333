use crate::network::Pcn;

use super::ErgStatistics;

/// Bit-matrix adjacency with degree bookkeeping, sized for repeated edge
/// toggles inside a Markov chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseGraph {
    n: usize,
    words: usize,
    bits: Vec<u64>,
    degree: Vec<u32>,
    stats: ErgStatistics,
}

fn choose2(d: u64) -> u64 {
    if d < 2 { 0 } else { d * (d - 1) / 2 }
}

fn choose3(d: u64) -> u64 {
    if d < 3 { 0 } else { d * (d - 1) * (d - 2) / 6 }
}

/// Change in `(L, S2, S3, T)` from adding an edge between nodes whose
/// degrees (not counting that edge) are `di` and `dj` and which share
/// `common` neighbours.
pub(crate) fn add_delta(di: u64, dj: u64, common: u64) -> [i64; 4] {
    [
        1,
        (di + dj) as i64,
        (choose2(di) + choose2(dj)) as i64,
        common as i64,
    ]
}

impl DenseGraph {
    pub fn empty(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        DenseGraph {
            n,
            words,
            bits: vec![0; n * words],
            degree: vec![0; n],
            stats: ErgStatistics::default(),
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Self::empty(n);
        for (a, b) in edges {
            if a != b && !g.has_edge(a, b) {
                g.toggle(a, b);
            }
        }
        g
    }

    pub fn from_pcn(pcn: &Pcn) -> Self {
        Self::from_edges(pcn.node_count(), pcn.edges().map(|(a, b, _)| (a, b)))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn dyad_count(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    pub fn degree(&self, i: usize) -> u32 {
        self.degree[i]
    }

    pub fn statistics(&self) -> ErgStatistics {
        self.stats
    }

    pub fn density(&self) -> f64 {
        let dyads = self.dyad_count();
        if dyads == 0 { 0.0 } else { self.stats.edges as f64 / dyads as f64 }
    }

    pub fn common_neighbors(&self, a: usize, b: usize) -> u64 {
        let ra = &self.bits[a * self.words..(a + 1) * self.words];
        let rb = &self.bits[b * self.words..(b + 1) * self.words];
        ra.iter().zip(rb).map(|(x, y)| u64::from((x & y).count_ones())).sum()
    }

    /// Signed change in the four statistics if `(a, b)` were toggled now.
    pub fn toggle_delta(&self, a: usize, b: usize) -> [i64; 4] {
        let present = self.has_edge(a, b);
        let (mut da, mut db) = (u64::from(self.degree[a]), u64::from(self.degree[b]));
        if present {
            da -= 1;
            db -= 1;
        }
        let d = add_delta(da, db, self.common_neighbors(a, b));
        if present { d.map(|v| -v) } else { d }
    }

    /// Flips dyad `(a, b)` and updates the running statistics.
    pub fn toggle(&mut self, a: usize, b: usize) {
        debug_assert!(a != b && a < self.n && b < self.n);
        let delta = self.toggle_delta(a, b);
        self.bits[a * self.words + b / 64] ^= 1 << (b % 64);
        self.bits[b * self.words + a / 64] ^= 1 << (a % 64);
        if delta[0] > 0 {
            self.degree[a] += 1;
            self.degree[b] += 1;
        } else {
            self.degree[a] -= 1;
            self.degree[b] -= 1;
        }
        self.stats.apply(delta);
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.stats.edges as usize);
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.has_edge(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn to_pcn(&self, hospital_id: &str) -> Pcn {
        Pcn::from_index_edges(hospital_id, self.n, &self.edges())
    }
}

/// Exact statistics from the degree sequence and a triangle scan.
pub(crate) fn count_from_adjacency(pcn: &Pcn) -> ErgStatistics {
    let mut stats = ErgStatistics {
        edges: pcn.edge_count() as u64,
        ..ErgStatistics::default()
    };
    for i in 0..pcn.node_count() {
        let d = pcn.degree(i) as u64;
        stats.two_stars += choose2(d);
        stats.three_stars += choose3(d);
    }
    // each triangle i < j < k is found once, from its lowest-ranked edge
    for (i, j, _) in pcn.edges() {
        let (ni, nj) = (pcn.neighbors(i), pcn.neighbors(j));
        let (mut p, mut q) = (0, 0);
        while p < ni.len() && q < nj.len() {
            match ni[p].cmp(&nj[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    if ni[p] > j {
                        stats.triangles += 1;
                    }
                    p += 1;
                    q += 1;
                }
            }
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_statistics_follow_toggles() {
        let mut g = DenseGraph::empty(4);
        g.toggle(0, 1);
        g.toggle(1, 2);
        g.toggle(0, 2);
        let s = g.statistics();
        assert_eq!((s.edges, s.two_stars, s.three_stars, s.triangles), (3, 3, 0, 1));
        g.toggle(0, 1);
        let s = g.statistics();
        assert_eq!((s.edges, s.two_stars, s.three_stars, s.triangles), (2, 1, 0, 0));
        assert!(!g.has_edge(1, 0));
        assert_eq!(g.degree(2), 2);
    }

    #[test]
    fn wide_graphs_use_several_words() {
        let mut g = DenseGraph::empty(130);
        g.toggle(0, 129);
        g.toggle(129, 70);
        g.toggle(0, 70);
        assert!(g.has_edge(129, 0));
        assert_eq!(g.common_neighbors(0, 129), 1);
        assert_eq!(g.statistics().triangles, 1);
        assert_eq!(g.edges(), vec![(0, 70), (0, 129), (70, 129)]);
    }
}
