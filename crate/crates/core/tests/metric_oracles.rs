// Matrix oracles index by node on purpose.
#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use resilience_core::graph::{Mode, MultilayerGraph, Station};
use resilience_core::metrics::{betweenness_values, geospatial_efficiency, gini, global_efficiency, path_stats};
use resilience_core::motifs::enumerate_ffl;
use resilience_core::synth::erdos_renyi;
use resilience_core::haversine;

fn graph_from(n: usize, adj: &[Vec<bool>]) -> MultilayerGraph {
    let st = (0..n)
        .map(|i| Station::new(format!("v{i:02}"), Mode::Bus, 30.0 + 0.002 * (i % 5) as f64, 114.0 + 0.003 * (i / 5) as f64))
        .collect();
    let mut links = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && adj[u][v] {
                links.push((format!("v{u:02}"), format!("v{v:02}")));
            }
        }
    }
    MultilayerGraph::from_links(st, links).unwrap()
}

fn adjacency(max_n: usize) -> impl Strategy<Value = (usize, Vec<Vec<bool>>)> {
    (3..max_n, 0.05..0.4f64).prop_flat_map(|(n, p)| {
        (
            Just(n),
            prop::collection::vec(prop::collection::vec(prop::bool::weighted(p), n), n),
        )
    })
}

/// Shortest-path counts by enumerating all simple paths.
fn betweenness_oracle(n: usize, adj: &[Vec<bool>]) -> Vec<f64> {
    // Floyd–Warshall distances, then count shortest paths by DFS bounded by distance.
    let inf = usize::MAX / 2;
    let mut d = vec![vec![inf; n]; n];
    for u in 0..n {
        d[u][u] = 0;
        for v in 0..n {
            if u != v && adj[u][v] {
                d[u][v] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    fn walk(u: usize, t: usize, left: usize, adj: &[Vec<bool>], path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if u == t {
            out.push(path.clone());
            return;
        }
        if left == 0 {
            return;
        }
        for v in 0..adj.len() {
            if adj[u][v] && !path.contains(&v) {
                path.push(v);
                walk(v, t, left - 1, adj, path, out);
                path.pop();
            }
        }
    }
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in 0..n {
            if s == t || d[s][t] >= inf {
                continue;
            }
            let mut paths = Vec::new();
            walk(s, t, d[s][t], adj, &mut vec![s], &mut paths);
            let total = paths.len() as f64;
            for p in &paths {
                for &v in &p[1..p.len() - 1] {
                    bc[v] += 1.0 / total;
                }
            }
        }
    }
    let norm = ((n - 1) * (n - 2)) as f64;
    bc.iter().map(|b| b / norm).collect()
}

fn ffl_oracle(n: usize, adj: &[Vec<bool>]) -> (u64, Vec<u64>) {
    let mut count = 0;
    let mut node = vec![0; n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if a != b && b != c && a != c && adj[a][b] && adj[b][c] && adj[a][c] {
                    count += 1;
                    node[a] += 1;
                    node[b] += 1;
                    node[c] += 1;
                }
            }
        }
    }
    (count, node)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gini_is_scale_and_permutation_invariant(
        v in prop::collection::vec(0.0..1000.0f64, 2..40),
        c in 0.01..100.0f64,
        rot in 0usize..40,
    ) {
        prop_assume!(v.iter().any(|&x| x > 0.0));
        let g = gini(&v).unwrap();
        prop_assert!((0.0..1.0).contains(&g));
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        prop_assert!((gini(&scaled).unwrap() - g).abs() < 1e-9);
        let mut p = v.clone();
        p.rotate_left(rot % v.len());
        p.reverse();
        prop_assert!((gini(&p).unwrap() - g).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn betweenness_matches_path_enumeration((n, adj) in adjacency(12)) {
        let g = graph_from(n, &adj);
        let got = betweenness_values(&g);
        let want = betweenness_oracle(n, &adj);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-9, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn ffl_matches_triple_loop((n, adj) in adjacency(30)) {
        let g = graph_from(n, &adj);
        let c = enumerate_ffl(&g);
        let (count, node) = ffl_oracle(n, &adj);
        prop_assert_eq!(c.ffl_count, count);
        let got: Vec<u64> = c.per_node_score.values().copied().collect();
        prop_assert_eq!(got, node);
        prop_assert_eq!(c.per_edge_score.values().sum::<u64>(), 3 * count);
    }

    #[test]
    fn hop_metrics_match_floyd_warshall((n, adj) in adjacency(15)) {
        let g = graph_from(n, &adj);
        let inf = f64::INFINITY;
        let mut d = vec![vec![inf; n]; n];
        let mut m = vec![vec![inf; n]; n];
        for u in 0..n {
            d[u][u] = 0.0;
            m[u][u] = 0.0;
            for v in 0..n {
                if u != v && adj[u][v] {
                    d[u][v] = 1.0;
                    m[u][v] = g.edges()[g.edge_between(u, v).unwrap()].length_m;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                    m[i][j] = m[i][j].min(m[i][k] + m[k][j]);
                }
            }
        }
        let mut eff = 0.0;
        let (mut geo, mut geo_n) = (0.0, 0usize);
        let mut lmax = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j && d[i][j].is_finite() {
                    eff += 1.0 / d[i][j];
                    lmax = lmax.max(d[i][j]);
                    let straight = haversine(g.position(i), g.position(j));
                    if straight > 0.0 {
                        geo += straight / m[i][j];
                        geo_n += 1;
                    }
                }
            }
        }
        let pairs = (n * (n - 1)) as f64;
        prop_assert!((global_efficiency(&g) - eff / pairs).abs() < 1e-12);
        let want_geo = if geo_n == 0 { 0.0 } else { geo / geo_n as f64 };
        prop_assert!((geospatial_efficiency(&g) - want_geo).abs() < 1e-9);
        if lmax > 0.0 {
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        total += if d[i][j].is_finite() { d[i][j] } else { lmax };
                    }
                }
            }
            let (l, avg) = path_stats(&g).unwrap();
            prop_assert_eq!(l as f64, lmax);
            prop_assert!((avg - total / pairs).abs() < 1e-9);
        }
    }
}

#[test]
fn gini_hand_values() {
    assert_eq!(gini(&[5.0; 4]).unwrap(), 0.0);
    assert!((gini(&[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-9);
    assert!((gini(&[1.0, 2.0, 3.0]).unwrap() - 2.0 / 9.0).abs() < 1e-9);
}

#[test]
fn betweenness_on_er_graphs_is_bounded() {
    for seed in 0..5 {
        let g = erdos_renyi(40, 0.08, seed).unwrap();
        assert!(betweenness_values(&g).iter().all(|&b| (0.0..=1.0).contains(&b)));
    }
}
