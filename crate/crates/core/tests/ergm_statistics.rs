mod oracles;

use pcnlab::ergm::{change_statistics, count_statistics, DenseGraph};

#[test]
fn small_configurations() {
    let k3 = oracles::pcn(3, &[(0, 1), (1, 2), (0, 2)]);
    assert_eq!(count_statistics(&k3).as_array(), [3, 3, 0, 1]);
    let s4 = oracles::pcn(4, &[(0, 1), (0, 2), (0, 3)]);
    assert_eq!(count_statistics(&s4).as_array(), [3, 3, 1, 0]);
    let empty = oracles::pcn(4, &[]);
    assert_eq!(count_statistics(&empty).as_array(), [0; 4]);
}

#[test]
fn counts_match_enumeration_on_random_graphs() {
    let mut rng = oracles::rng(5);
    for i in 0..100 {
        let n = 1 + i % 10;
        let p = [0.2, 0.5, 0.8, 1.0][i % 4];
        let edges = oracles::random_graph(&mut rng, n, p);
        let expected = oracles::brute_force_statistics(n, &edges);
        assert_eq!(count_statistics(&oracles::pcn(n, &edges)).as_array(), expected, "{edges:?}");
        assert_eq!(DenseGraph::from_edges(n, edges.iter().copied()).statistics().as_array(), expected);
    }
}

#[test]
fn change_statistics_are_count_differences() {
    let mut rng = oracles::rng(9);
    for i in 0..60 {
        let n = 3 + i % 8;
        let edges = oracles::random_graph(&mut rng, n, 0.4);
        let base = oracles::brute_force_statistics(n, &edges);
        let g = oracles::pcn(n, &edges);
        let mut dense = DenseGraph::from_edges(n, edges.iter().copied());
        for a in 0..n {
            for b in a + 1..n {
                let toggled: Vec<_> = if edges.contains(&(a, b)) {
                    edges.iter().copied().filter(|&e| e != (a, b)).collect()
                } else {
                    edges.iter().copied().chain([(a, b)]).collect()
                };
                let after = oracles::brute_force_statistics(n, &toggled);
                let diff: Vec<i64> = (0..4).map(|k| after[k] as i64 - base[k] as i64).collect();
                assert_eq!(dense.toggle_delta(a, b).to_vec(), diff);
                assert_eq!(change_statistics(&g, a, b).unwrap().to_vec(), diff);
                dense.toggle(a, b);
                assert_eq!(dense.statistics().as_array(), after);
                dense.toggle(a, b);
            }
        }
    }
}
