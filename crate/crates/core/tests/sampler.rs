mod oracles;

use pcnlab::ergm::{sample_graphs, DenseGraph, ErgParams, McmcConfig, Sampler};

const N3_DYADS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Probabilities of the eight labeled graphs on three nodes, by mask over
/// `N3_DYADS`, from the model weights normalized by enumeration.
fn exact_n3(params: [f64; 4]) -> [f64; 8] {
    let mut w = [0.0; 8];
    for (mask, wm) in w.iter_mut().enumerate() {
        let s = oracles::brute_force_statistics(3, &oracles::edges_from_mask(3, mask as u64));
        *wm = (0..4).map(|k| params[k] * s[k] as f64).sum::<f64>().exp();
    }
    let z: f64 = w.iter().sum();
    w.map(|v| v / z)
}

fn sampled_n3(params: [f64; 4], samples: usize, seed: u64) -> [f64; 8] {
    let mut s = Sampler::new(DenseGraph::empty(3), &ErgParams::from_array(params), seed);
    s.run(1_000);
    let mut counts = [0usize; 8];
    for _ in 0..samples {
        s.run(10);
        let g = s.graph();
        let mask: usize = N3_DYADS
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| usize::from(g.has_edge(a, b)) << k)
            .sum();
        counts[mask] += 1;
    }
    counts.map(|c| c as f64 / samples as f64)
}

#[test]
fn three_node_chain_matches_the_exact_distribution() {
    for params in [[0.0; 4], [-1.0, 0.5, 0.0, 1.0], [0.7, -0.4, 0.3, -1.5]] {
        let exact = exact_n3(params);
        let emp = sampled_n3(params, 100_000, 21);
        let tv: f64 = exact.iter().zip(&emp).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.02, "{params:?}: tv {tv}");
    }
}

#[test]
fn edge_parameter_sets_the_density() {
    let theta = (0.2f64 / 0.8).ln();
    let cfg = McmcConfig {
        burn_in: 20_000,
        thinning: 500,
        n_samples: 2_000,
        seed: 3,
        ..McmcConfig::default()
    };
    let run = sample_graphs(&ErgParams::new(theta, 0.0, 0.0, 0.0), 30, &cfg).unwrap();
    assert!((run.mean_density - 0.2).abs() < 0.01, "{}", run.mean_density);
    assert!(!run.degenerate);
}

#[test]
fn chains_are_reproducible() {
    let cfg = McmcConfig {
        burn_in: 1_000,
        thinning: 50,
        n_samples: 200,
        seed: 8,
        ..McmcConfig::default()
    };
    let p = ErgParams::new(-1.0, 0.1, -0.05, 0.4);
    assert_eq!(sample_graphs(&p, 15, &cfg).unwrap(), sample_graphs(&p, 15, &cfg).unwrap());
    let other = McmcConfig { seed: 9, ..cfg };
    assert_ne!(sample_graphs(&p, 15, &cfg).unwrap(), sample_graphs(&p, 15, &other).unwrap());
}

#[test]
fn running_statistics_track_the_graph() {
    let mut s = Sampler::new(DenseGraph::empty(9), &ErgParams::new(0.0, -0.1, 0.0, 0.5), 4);
    for _ in 0..50 {
        s.run(37);
        let edges = s.graph().edges();
        assert_eq!(
            s.statistics().as_array(),
            oracles::brute_force_statistics(9, &edges)
        );
    }
}
