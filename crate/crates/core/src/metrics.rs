//! Node- and network-level structural metrics.
//!
//! Path-based metrics count hops on the directed graph; only the geospatial
//! efficiency uses edge lengths. All-pairs computations fan out over sources
//! with rayon and reduce in source order, so results do not depend on the
//! thread count.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::haversine;
use crate::graph::MultilayerGraph;

const UNREACHED: usize = usize::MAX;

/// A node-level metric keyed by station id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetricVector {
    pub metric_name: String,
    pub values: BTreeMap<String, f64>,
}

impl NodeMetricVector {
    /// Pairs `values[i]` with station `i` of `g`.
    pub fn from_indexed(g: &MultilayerGraph, name: &str, values: &[f64]) -> Self {
        assert_eq!(values.len(), g.node_count());
        Self {
            metric_name: name.to_owned(),
            values: g
                .stations()
                .iter()
                .zip(values)
                .map(|(s, &v)| (s.id.clone(), v))
                .collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.values.get(id).copied()
    }

    /// Values in id order.
    pub fn to_vec(&self) -> Vec<f64> {
        self.values.values().copied().collect()
    }
}

/// Gini coefficient of a non-negative vector (sorted internally).
pub fn gini(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::undefined("gini of an empty vector"));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::input("gini requires finite non-negative values"));
    }
    let mut m = values.to_vec();
    m.sort_by(f64::total_cmp);
    let n = m.len() as f64;
    let total: f64 = m.iter().sum();
    if total <= 0.0 {
        return Err(Error::undefined("gini of an all-zero vector (mean is zero)"));
    }
    let mean = total / n;
    let weighted: f64 = m
        .iter()
        .enumerate()
        .map(|(i, v)| (2.0 * (i as f64 + 1.0) - n - 1.0) * v)
        .sum();
    Ok(weighted / (n * n * mean))
}

pub fn degree(g: &MultilayerGraph) -> Vec<f64> {
    (0..g.node_count()).map(|i| g.degree(i) as f64).collect()
}

pub fn out_degree(g: &MultilayerGraph) -> Vec<f64> {
    (0..g.node_count()).map(|i| g.out_degree(i) as f64).collect()
}

/// Hop distances from `source` following edge direction, skipping dead nodes.
pub(crate) fn bfs_hops(g: &MultilayerGraph, source: usize, alive: Option<&[bool]>, dist: &mut [usize]) {
    dist.fill(UNREACHED);
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        for &(w, _) in g.out_edges(v) {
            if dist[w] == UNREACHED && alive.is_none_or(|a| a[w]) {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
}

/// Unnormalized shortest-path betweenness (Brandes) over live nodes.
pub(crate) fn brandes(g: &MultilayerGraph, alive: Option<&[bool]>) -> Vec<f64> {
    let n = g.node_count();
    let sources: Vec<usize> = (0..n).filter(|&s| alive.is_none_or(|a| a[s])).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(32)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            let mut dist = vec![UNREACHED; n];
            let mut sigma = vec![0.0f64; n];
            let mut delta = vec![0.0f64; n];
            let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut stack: Vec<usize> = Vec::with_capacity(n);
            let mut queue = VecDeque::new();
            for &s in chunk {
                for &v in &stack {
                    dist[v] = UNREACHED;
                    sigma[v] = 0.0;
                    delta[v] = 0.0;
                    preds[v].clear();
                }
                stack.clear();
                dist[s] = 0;
                sigma[s] = 1.0;
                queue.push_back(s);
                while let Some(v) = queue.pop_front() {
                    stack.push(v);
                    for &(w, _) in g.out_edges(v) {
                        if alive.is_some_and(|a| !a[w]) {
                            continue;
                        }
                        if dist[w] == UNREACHED {
                            dist[w] = dist[v] + 1;
                            queue.push_back(w);
                        }
                        if dist[w] == dist[v] + 1 {
                            sigma[w] += sigma[v];
                            preds[w].push(v);
                        }
                    }
                }
                for &w in stack.iter().rev() {
                    for &v in &preds[w] {
                        delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                    }
                    if w != s {
                        acc[w] += delta[w];
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

/// Betweenness normalized by `(N-1)(N-2)`, indexed by node.
pub fn betweenness_values(g: &MultilayerGraph) -> Vec<f64> {
    let n = g.node_count();
    let raw = brandes(g, None);
    if n < 3 {
        return vec![0.0; n];
    }
    let scale = ((n - 1) * (n - 2)) as f64;
    raw.into_iter().map(|b| b / scale).collect()
}

pub fn betweenness(g: &MultilayerGraph) -> NodeMetricVector {
    NodeMetricVector::from_indexed(g, "betweenness", &betweenness_values(g))
}

/// Weakly connected component sizes over live nodes, via union-find.
pub(crate) fn largest_weak_component(g: &MultilayerGraph, alive: Option<&[bool]>) -> usize {
    let n = g.node_count();
    let mut uf = UnionFind::new(n);
    for e in 0..g.edge_count() {
        let (u, v) = g.endpoints(e);
        if alive.is_none_or(|a| a[u] && a[v]) {
            uf.union(u, v);
        }
    }
    (0..n)
        .filter(|&i| alive.is_none_or(|a| a[i]))
        .map(|i| uf.size_of(i))
        .max()
        .unwrap_or(0)
}

/// Fraction of nodes in the largest weakly connected component.
pub fn s0(g: &MultilayerGraph) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    largest_weak_component(g, None) as f64 / g.node_count() as f64
}

#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns the size of the merged set.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return self.size[ra];
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.size[ra]
    }

    pub(crate) fn size_of(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// Per-source hop statistics: (sum of 1/l, connected count, max l, sum of l).
fn hop_profile(g: &MultilayerGraph) -> Vec<(f64, usize, usize, usize)> {
    let n = g.node_count();
    (0..n)
        .into_par_iter()
        .map_init(
            || vec![UNREACHED; n],
            |dist, s| {
                bfs_hops(g, s, None, dist);
                let mut inv = 0.0;
                let (mut count, mut max, mut sum) = (0, 0, 0);
                for (t, &d) in dist.iter().enumerate() {
                    if t != s && d != UNREACHED {
                        inv += 1.0 / d as f64;
                        count += 1;
                        max = max.max(d);
                        sum += d;
                    }
                }
                (inv, count, max, sum)
            },
        )
        .collect()
}

/// Mean of `1/l(i,j)` over all ordered pairs; unreachable pairs add 0.
pub fn global_efficiency(g: &MultilayerGraph) -> f64 {
    let n = g.node_count();
    if n < 2 {
        return 0.0;
    }
    let total: f64 = hop_profile(g).iter().map(|p| p.0).sum();
    total / (n * (n - 1)) as f64
}

/// `(l_max, mean path length)` with disconnected pairs counted at `l_max`.
pub fn path_stats(g: &MultilayerGraph) -> Result<(usize, f64)> {
    let n = g.node_count();
    let profile = hop_profile(g);
    let connected: usize = profile.iter().map(|p| p.1).sum();
    if connected == 0 {
        return Err(Error::undefined("diameter of a graph with no connected pairs"));
    }
    let l_max = profile.iter().map(|p| p.2).max().unwrap_or(0);
    let sum: usize = profile.iter().map(|p| p.3).sum();
    let pairs = n * (n - 1);
    let total = sum as f64 + ((pairs - connected) * l_max) as f64;
    Ok((l_max, total / pairs as f64))
}

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Length-weighted shortest distances from `source` (Dijkstra), skipping dead nodes.
pub(crate) fn dijkstra_m(g: &MultilayerGraph, source: usize, alive: Option<&[bool]>, dist: &mut [f64]) {
    dist.fill(f64::INFINITY);
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([Reverse((Dist(0.0), source))]);
    while let Some(Reverse((Dist(d), v))) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, e) in g.out_edges(v) {
            if alive.is_some_and(|a| !a[w]) {
                continue;
            }
            let nd = d + g.edges()[e].length_m;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Reverse((Dist(nd), w)));
            }
        }
    }
}

/// Mean detour ratio `haversine(i,j) / network_distance(i,j)` over connected
/// ordered pairs with a positive straight-line distance.
pub fn geospatial_efficiency(g: &MultilayerGraph) -> f64 {
    let n = g.node_count();
    let per_source: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![f64::INFINITY; n],
            |dist, s| {
                dijkstra_m(g, s, None, dist);
                let ps = g.position(s);
                let mut sum = 0.0;
                let mut count = 0;
                for (t, &d) in dist.iter().enumerate() {
                    if t == s || !d.is_finite() {
                        continue;
                    }
                    let crow = haversine(ps, g.position(t));
                    if crow > 0.0 && d > 0.0 {
                        sum += crow / d;
                        count += 1;
                    }
                }
                (sum, count)
            },
        )
        .collect();
    let (sum, count) = per_source
        .iter()
        .fold((0.0, 0), |(s, c), &(ps, pc)| (s + ps, c + pc));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Network-level observables of one graph configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_imt_edges: usize,
    pub avg_out_degree: f64,
    pub s0: f64,
    pub diameter_l_max: Option<usize>,
    pub avg_path_len: Option<f64>,
    pub efficiency_e: f64,
    pub efficiency_geo: f64,
    pub avg_edge_len_m: f64,
    pub std_edge_len_m: f64,
    pub gini_nd: Option<f64>,
    pub gini_bc: Option<f64>,
}

pub fn summarize(g: &MultilayerGraph) -> Result<NetworkSummary> {
    if g.is_empty() {
        return Err(Error::input("cannot summarize an empty graph"));
    }
    let n = g.node_count();
    let m = g.edge_count();
    let lens: Vec<f64> = g.edges().iter().map(|e| e.length_m).collect();
    let (avg_len, std_len) = if lens.is_empty() {
        (0.0, 0.0)
    } else {
        let mean = lens.iter().sum::<f64>() / m as f64;
        let var = lens.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / m as f64;
        (mean, var.sqrt())
    };
    let paths = path_stats(g).ok();
    Ok(NetworkSummary {
        n_nodes: n,
        n_edges: m,
        n_imt_edges: g.transfer_edge_count(),
        avg_out_degree: m as f64 / n as f64,
        s0: s0(g),
        diameter_l_max: paths.map(|p| p.0),
        avg_path_len: paths.map(|p| p.1),
        efficiency_e: global_efficiency(g),
        efficiency_geo: geospatial_efficiency(g),
        avg_edge_len_m: avg_len,
        std_edge_len_m: std_len,
        gini_nd: gini(&degree(g)).ok(),
        gini_bc: gini(&betweenness_values(g)).ok(),
    })
}
