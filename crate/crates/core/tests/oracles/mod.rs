//! Slow, obviously-correct reference implementations shared by the
//! integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pcnlab::network::Pcn;

pub type Edges = Vec<(usize, usize)>;

pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    adj
}

pub fn pcn(n: usize, edges: &[(usize, usize)]) -> Pcn {
    Pcn::from_index_edges("g", n, edges)
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Edges {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b));
            }
        }
    }
    edges
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dyads(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
}

pub fn edges_from_mask(n: usize, mask: u64) -> Edges {
    dyads(n)
        .into_iter()
        .enumerate()
        .filter(|(k, _)| mask >> k & 1 == 1)
        .map(|(_, d)| d)
        .collect()
}

pub fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let adj = adjacency(n, edges);
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for w in 0..n {
            if adj[v][w] && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Connected graphs on `n` nodes whose labels are sorted by non-increasing
/// degree. Every isomorphism class has such a labeling, so this covers all
/// connected graphs up to isomorphism with far fewer than `2^(n choose 2)`.
pub fn connected_graphs(n: usize) -> Vec<Edges> {
    let all = dyads(n);
    let mut out = Vec::new();
    for mask in 0u64..1 << all.len() {
        let mut deg = vec![0u32; n];
        for (k, &(a, b)) in all.iter().enumerate() {
            if mask >> k & 1 == 1 {
                deg[a] += 1;
                deg[b] += 1;
            }
        }
        if deg.windows(2).any(|w| w[0] < w[1]) || deg.contains(&0) && n > 1 {
            continue;
        }
        let edges = edges_from_mask(n, mask);
        if is_connected(n, &edges) {
            out.push(edges);
        }
    }
    out
}

fn all_shortest_paths(adj: &[Vec<bool>], s: usize, t: usize) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    dist[s] = 0;
    let mut frontier = vec![s];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &v in &frontier {
            for w in 0..n {
                if adj[v][w] && dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    if dist[t] == usize::MAX {
        return Vec::new();
    }
    let mut paths = Vec::new();
    let mut path = vec![s];
    extend_paths(adj, &dist, t, &mut path, &mut paths);
    paths
}

fn extend_paths(adj: &[Vec<bool>], dist: &[usize], t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let v = *path.last().unwrap();
    if v == t {
        out.push(path.clone());
        return;
    }
    for w in 0..adj.len() {
        if adj[v][w] && dist[w] == dist[v] + 1 && dist[w] <= dist[t] {
            path.push(w);
            extend_paths(adj, dist, t, path, out);
            path.pop();
        }
    }
}

/// Raw betweenness by listing every shortest path of every unordered pair.
pub fn brute_force_betweenness(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let adj = adjacency(n, edges);
    let mut b = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let paths = all_shortest_paths(&adj, s, t);
            if paths.is_empty() {
                continue;
            }
            let total = paths.len() as f64;
            for p in &paths {
                for &v in &p[1..p.len() - 1] {
                    b[v] += 1.0 / total;
                }
            }
        }
    }
    b
}

/// (edges, 2-stars, 3-stars, triangles) by enumerating pairs and triples.
pub fn brute_force_statistics(n: usize, edges: &[(usize, usize)]) -> [u64; 4] {
    let adj = adjacency(n, edges);
    let mut l = 0;
    for a in 0..n {
        for b in a + 1..n {
            l += adj[a][b] as u64;
        }
    }
    let (mut s2, mut s3) = (0, 0);
    for c in 0..n {
        let nb: Vec<usize> = (0..n).filter(|&v| adj[c][v]).collect();
        for i in 0..nb.len() {
            for j in i + 1..nb.len() {
                s2 += 1;
                s3 += (j + 1..nb.len()).count() as u64;
            }
        }
    }
    let mut t = 0;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                t += (adj[a][b] && adj[b][c] && adj[a][c]) as u64;
            }
        }
    }
    [l, s2, s3, t]
}

/// Solves the normal equations `X'X b = X'y` by Gauss-Jordan elimination
/// with partial pivoting. Returns coefficients, standard errors and R².
pub fn normal_equations(columns: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let n = y.len();
    let k = columns.len() + 1;
    let x = |i: usize, j: usize| if j == 0 { 1.0 } else { columns[j - 1][i] };
    // augmented [X'X | I | X'y]
    let mut m = vec![vec![0.0; 2 * k + 1]; k];
    for r in 0..k {
        for c in 0..k {
            m[r][c] = (0..n).map(|i| x(i, r) * x(i, c)).sum();
        }
        m[r][k + r] = 1.0;
        m[r][2 * k] = (0..n).map(|i| x(i, r) * y[i]).sum();
    }
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..k {
            if r != col {
                let f = m[r][col];
                let row = m[col].clone();
                for (v, rv) in m[r].iter_mut().zip(row) {
                    *v -= f * rv;
                }
            }
        }
    }
    let beta: Vec<f64> = (0..k).map(|r| m[r][2 * k]).collect();
    let fitted: Vec<f64> = (0..n).map(|i| (0..k).map(|j| x(i, j) * beta[j]).sum()).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_res: f64 = y.iter().zip(&fitted).map(|(a, f)| (a - f).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
    let sigma2 = ss_res / (n - k) as f64;
    let se = (0..k).map(|j| (sigma2 * m[j][k + j]).sqrt()).collect();
    (beta, se, 1.0 - ss_res / ss_tot)
}
