//! Load-capacity cascading failures.
//!
//! Unit flows for a fixed set of origin-destination pairs are routed along
//! hop-shortest paths (ties go to the lexicographically smallest node
//! sequence). Edge capacities are frozen from the intact graph as
//! `(1 + beta) * load`. After an initial node failure, flows are re-routed
//! over the surviving graph each round and every edge whose new load strictly
//! exceeds its capacity fails, until a round fails nothing.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MultilayerGraph;
use crate::metrics::bfs_hops;

pub const DEFAULT_OD_SAMPLES: usize = 10_000;
pub const DEFAULT_OD_SEED: u64 = 42;

/// Intact-graph edge loads and the OD sample that produced them.
///
/// Edge and node positions refer to the graph the model was estimated on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadModel {
    pub edge_load: Vec<f64>,
    pub od_pairs: Vec<(usize, usize)>,
    pub od_samples: usize,
    pub seed: u64,
    pub exhaustive: bool,
}

impl LoadModel {
    pub fn load_of(&self, g: &MultilayerGraph, src: &str, dst: &str) -> Option<f64> {
        let e = g.edge_between(g.index_of(src)?, g.index_of(dst)?)?;
        Some(self.edge_load[e])
    }

    /// Sum of incident (in + out) edge loads per node.
    pub fn throughput(&self, g: &MultilayerGraph) -> Vec<f64> {
        (0..g.node_count())
            .map(|i| {
                g.out_edges(i)
                    .iter()
                    .chain(g.in_edges(i))
                    .map(|&(_, e)| self.edge_load[e])
                    .sum()
            })
            .collect()
    }

    /// Node with the highest throughput (lowest id on ties).
    pub fn max_load_node(&self, g: &MultilayerGraph) -> Option<usize> {
        let t = self.throughput(g);
        (0..g.node_count()).min_by(|&x, &y| t[y].total_cmp(&t[x]).then(x.cmp(&y)))
    }
}

struct Network<'a> {
    g: &'a MultilayerGraph,
    node_alive: Vec<bool>,
    edge_alive: Vec<bool>,
}

impl Network<'_> {
    /// Routes every pair; `None` for pairs with no surviving path. Pairs are
    /// grouped by destination so each group shares one reverse BFS.
    fn route(&self, pairs: &[(usize, usize)]) -> Vec<Option<Vec<usize>>> {
        let mut by_dest: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, &(_, d)) in pairs.iter().enumerate() {
            by_dest.entry(d).or_default().push(k);
        }
        let groups: Vec<(usize, Vec<usize>)> = by_dest.into_iter().collect();
        let n = self.g.node_count();
        let routed: Vec<Vec<(usize, Option<Vec<usize>>)>> = groups
            .par_iter()
            .map_init(
                || vec![usize::MAX; n],
                |to_dest, (dest, members)| {
                    self.reverse_bfs(*dest, to_dest);
                    members
                        .iter()
                        .map(|&k| (k, self.walk(pairs[k].0, to_dest)))
                        .collect()
                },
            )
            .collect();
        let mut out = vec![None; pairs.len()];
        for (k, path) in routed.into_iter().flatten() {
            out[k] = path;
        }
        out
    }

    fn reverse_bfs(&self, dest: usize, dist: &mut [usize]) {
        dist.fill(usize::MAX);
        if !self.node_alive[dest] {
            return;
        }
        dist[dest] = 0;
        let mut queue = VecDeque::from([dest]);
        while let Some(v) = queue.pop_front() {
            for &(u, e) in self.g.in_edges(v) {
                if self.edge_alive[e] && dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
    }

    /// Greedy walk taking the smallest-index successor one hop closer.
    fn walk(&self, origin: usize, to_dest: &[usize]) -> Option<Vec<usize>> {
        if !self.node_alive[origin] || to_dest[origin] == usize::MAX {
            return None;
        }
        let mut path = Vec::with_capacity(to_dest[origin]);
        let mut cur = origin;
        while to_dest[cur] > 0 {
            let &(next, e) = self
                .g
                .out_edges(cur)
                .iter()
                .find(|&&(w, e)| self.edge_alive[e] && to_dest[w] == to_dest[cur] - 1)
                .expect("BFS layer has a successor");
            path.push(e);
            cur = next;
        }
        Some(path)
    }
}

fn accumulate(edge_count: usize, paths: &[Option<Vec<usize>>]) -> Vec<u64> {
    let mut loads = vec![0u64; edge_count];
    for path in paths.iter().flatten() {
        for &e in path {
            loads[e] += 1;
        }
    }
    loads
}

/// Estimates edge loads from unit flows between OD pairs.
///
/// With `exhaustive`, every connected ordered pair contributes once.
/// Otherwise `od_samples` pairs are drawn with replacement, uniformly over
/// connected ordered pairs, from a stream seeded by `seed`.
pub fn estimate_loads(g: &MultilayerGraph, od_samples: usize, seed: u64, exhaustive: bool) -> Result<LoadModel> {
    let n = g.node_count();
    if g.edge_count() == 0 {
        return Err(Error::input("load estimation needs at least one connected pair"));
    }
    if !exhaustive && od_samples == 0 {
        return Err(Error::input("od_samples must be at least 1"));
    }
    let od_pairs: Vec<(usize, usize)> = if exhaustive {
        let per_origin: Vec<Vec<(usize, usize)>> = (0..n)
            .into_par_iter()
            .map_init(
                || vec![usize::MAX; n],
                |dist, o| {
                    bfs_hops(g, o, None, dist);
                    (0..n)
                        .filter(|&d| d != o && dist[d] != usize::MAX)
                        .map(|d| (o, d))
                        .collect()
                },
            )
            .collect();
        per_origin.into_iter().flatten().collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reach: HashMap<usize, Vec<bool>> = HashMap::new();
        let mut dist = vec![usize::MAX; n];
        let mut pairs = Vec::with_capacity(od_samples);
        while pairs.len() < od_samples {
            let o = rng.gen_range(0..n);
            let d = rng.gen_range(0..n);
            if o == d {
                continue;
            }
            let r = reach.entry(o).or_insert_with(|| {
                bfs_hops(g, o, None, &mut dist);
                dist.iter().map(|&x| x != usize::MAX).collect()
            });
            if r[d] {
                pairs.push((o, d));
            }
        }
        pairs
    };
    let net = Network {
        g,
        node_alive: vec![true; n],
        edge_alive: vec![true; g.edge_count()],
    };
    let loads = accumulate(g.edge_count(), &net.route(&od_pairs));
    Ok(LoadModel {
        edge_load: loads.into_iter().map(|l| l as f64).collect(),
        od_samples: od_pairs.len(),
        od_pairs,
        seed,
        exhaustive,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeOptions {
    /// Keep the flow of disconnected OD pairs on the surviving edges of their
    /// last path instead of dropping it.
    pub latent_demand: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeState {
    pub beta: f64,
    /// `C_e` per edge position.
    pub capacities: Vec<f64>,
    /// Edges removed with the initially failed nodes.
    pub initial_edges: Vec<usize>,
    /// Edge positions failing by overload, one list per round.
    pub rounds: Vec<Vec<usize>>,
    /// Initially failed stations, in id order.
    pub failed_nodes: Vec<String>,
    pub e_failed: usize,
    pub e_initial: usize,
    pub r_recover: f64,
    /// Share of overload failures that happened in the first round.
    pub first_wave_fraction: f64,
    /// Failed nodes plus failed edges.
    pub total_damage: usize,
}

impl CascadeState {
    pub fn overload_failures(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    /// Edge positions that survived.
    pub fn surviving_edges(&self) -> Vec<usize> {
        let mut dead = vec![false; self.capacities.len()];
        for &e in self.initial_edges.iter().chain(self.rounds.iter().flatten()) {
            dead[e] = true;
        }
        (0..dead.len()).filter(|&e| !dead[e]).collect()
    }
}

pub fn run_cascade(g: &MultilayerGraph, loads: &LoadModel, beta: f64, initial_failures: &[String]) -> Result<CascadeState> {
    let idx = initial_failures
        .iter()
        .map(|id| {
            g.index_of(id)
                .ok_or_else(|| Error::input(format!("unknown station `{id}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    run_cascade_indices(g, loads, beta, &idx, CascadeOptions::default())
}

pub fn run_cascade_indices(
    g: &MultilayerGraph,
    loads: &LoadModel,
    beta: f64,
    initial: &[usize],
    opts: CascadeOptions,
) -> Result<CascadeState> {
    if !(beta >= 0.0) {
        return Err(Error::input(format!("beta must be non-negative, got {beta}")));
    }
    if loads.edge_load.len() != g.edge_count() {
        return Err(Error::input("load model was estimated on a different graph"));
    }
    let n = g.node_count();
    let m = g.edge_count();
    let capacities: Vec<f64> = loads.edge_load.iter().map(|l| (1.0 + beta) * l).collect();

    let mut net = Network {
        g,
        node_alive: vec![true; n],
        edge_alive: vec![true; m],
    };
    let mut failed_nodes: Vec<usize> = initial.to_vec();
    failed_nodes.sort_unstable();
    failed_nodes.dedup();
    for &v in &failed_nodes {
        if v >= n {
            return Err(Error::input(format!("node index {v} out of range")));
        }
        net.node_alive[v] = false;
    }
    let mut initial_edges = Vec::new();
    for e in 0..m {
        let (u, v) = g.endpoints(e);
        if !net.node_alive[u] || !net.node_alive[v] {
            net.edge_alive[e] = false;
            initial_edges.push(e);
        }
    }

    let pairs: Vec<(usize, usize)> = loads
        .od_pairs
        .iter()
        .copied()
        .filter(|&(o, d)| net.node_alive[o] && net.node_alive[d])
        .collect();
    let mut last_paths: Vec<Option<Vec<usize>>> = vec![None; pairs.len()];
    let mut rounds = Vec::new();

    if !failed_nodes.is_empty() {
        loop {
            let mut paths = net.route(&pairs);
            if opts.latent_demand {
                for (p, last) in paths.iter_mut().zip(&mut last_paths) {
                    match p {
                        Some(path) => *last = Some(path.clone()),
                        None => {
                            *p = last
                                .as_ref()
                                .map(|l| l.iter().copied().filter(|&e| net.edge_alive[e]).collect());
                        }
                    }
                }
            }
            let load = accumulate(m, &paths);
            let failed: Vec<usize> = (0..m)
                .filter(|&e| net.edge_alive[e] && load[e] as f64 > capacities[e])
                .collect();
            if failed.is_empty() {
                break;
            }
            for &e in &failed {
                net.edge_alive[e] = false;
            }
            rounds.push(failed);
        }
    }

    let overload: usize = rounds.iter().map(Vec::len).sum();
    let e_failed = initial_edges.len() + overload;
    let r_recover = if m == 0 {
        1.0
    } else {
        1.0 - e_failed as f64 / m as f64
    };
    let first_wave_fraction = if overload == 0 {
        0.0
    } else {
        rounds[0].len() as f64 / overload as f64
    };
    Ok(CascadeState {
        beta,
        capacities,
        initial_edges,
        rounds,
        total_damage: failed_nodes.len() + e_failed,
        failed_nodes: failed_nodes.iter().map(|&v| g.id(v).to_owned()).collect(),
        e_failed,
        e_initial: m,
        r_recover,
        first_wave_fraction,
    })
}

/// `R_recover` for a cascade seeded at each node in turn.
pub fn recoverability_profile(g: &MultilayerGraph, loads: &LoadModel, beta: f64) -> Result<BTreeMap<String, f64>> {
    let values: Vec<Result<f64>> = (0..g.node_count())
        .into_par_iter()
        .map(|v| run_cascade_indices(g, loads, beta, &[v], CascadeOptions::default()).map(|s| s.r_recover))
        .collect();
    g.stations()
        .iter()
        .zip(values)
        .map(|(s, r)| r.map(|r| (s.id.clone(), r)))
        .collect()
}

/// Cascade size (`total_damage`) per tolerance for one seed node.
pub fn beta_sweep(g: &MultilayerGraph, loads: &LoadModel, betas: &[f64], target: &str) -> Result<Vec<(f64, usize)>> {
    if betas.is_empty() {
        return Err(Error::input("beta sweep needs at least one beta"));
    }
    if betas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::input("betas must be sorted ascending"));
    }
    let t = g
        .index_of(target)
        .ok_or_else(|| Error::input(format!("unknown station `{target}`")))?;
    betas
        .par_iter()
        .map(|&b| run_cascade_indices(g, loads, b, &[t], CascadeOptions::default()).map(|s| (b, s.total_damage)))
        .collect()
}

/// Stations ranked by intact-graph throughput, highest first, ties by id.
pub fn throughput_ranking(g: &MultilayerGraph, loads: &LoadModel) -> Vec<usize> {
    let t = loads.throughput(g);
    let mut order: Vec<usize> = (0..g.node_count()).collect();
    order.sort_by(|&x, &y| t[y].total_cmp(&t[x]).then(x.cmp(&y)));
    order
}

/// Total damage when the top-`k` throughput nodes fail together, per `k`.
pub fn shock_sweep(g: &MultilayerGraph, loads: &LoadModel, beta: f64, ks: &[usize]) -> Result<Vec<(usize, usize)>> {
    if ks.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::input("shock sizes must be sorted ascending"));
    }
    if let Some(&k) = ks.iter().find(|&&k| k > g.node_count()) {
        return Err(Error::input(format!("shock size {k} exceeds node count {}", g.node_count())));
    }
    let ranking = throughput_ranking(g, loads);
    ks.par_iter()
        .map(|&k| {
            run_cascade_indices(g, loads, beta, &ranking[..k], CascadeOptions::default())
                .map(|s| (k, s.total_damage))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Mode, Station};

    fn graph(ids: &[&str], links: &[(&str, &str)]) -> MultilayerGraph {
        let st = ids
            .iter()
            .enumerate()
            .map(|(i, id)| Station::new(*id, Mode::Bus, 30.0 + 0.003 * i as f64, 114.0))
            .collect();
        MultilayerGraph::from_links(st, links.iter().copied()).unwrap()
    }

    fn diamond() -> MultilayerGraph {
        graph(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "d"), ("a", "c"), ("c", "d")],
        )
    }

    #[test]
    fn single_edge_load() {
        let g = graph(&["a", "b"], &[("a", "b")]);
        let l = estimate_loads(&g, 0, 0, true).unwrap();
        assert_eq!(l.load_of(&g, "a", "b"), Some(1.0));
    }

    #[test]
    fn path_loads() {
        let g = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        let l = estimate_loads(&g, 0, 0, true).unwrap();
        assert_eq!(l.load_of(&g, "a", "b"), Some(2.0));
        assert_eq!(l.load_of(&g, "b", "c"), Some(2.0));
    }

    #[test]
    fn sampled_loads_are_seeded() {
        let g = diamond();
        let a = estimate_loads(&g, 500, 9, false).unwrap();
        assert_eq!(a, estimate_loads(&g, 500, 9, false).unwrap());
        assert_eq!(a.od_pairs.len(), 500);
        assert_eq!(a.edge_load.iter().sum::<f64>() as usize, a.od_pairs.iter().map(|&(o, d)| if o == 0 && d == 3 { 2 } else { 1 }).sum::<usize>());
    }

    #[test]
    fn edgeless_graph_has_no_loads() {
        assert!(estimate_loads(&graph(&["a", "b"], &[]), 10, 1, false).is_err());
    }

    #[test]
    fn diamond_hand_simulation() {
        let g = diamond();
        let l = estimate_loads(&g, 0, 0, true).unwrap();
        // (a,d) takes a-b-d, the lexicographically smaller tie.
        assert_eq!(l.load_of(&g, "a", "b"), Some(2.0));
        assert_eq!(l.load_of(&g, "a", "c"), Some(1.0));
        let s = run_cascade(&g, &l, 0.0, &["b".into()]).unwrap();
        assert_eq!(s.initial_edges.len(), 2);
        assert_eq!(s.rounds.len(), 1);
        let ac = g.edge_between(0, 2).unwrap();
        let cd = g.edge_between(2, 3).unwrap();
        let mut r1 = s.rounds[0].clone();
        r1.sort_unstable();
        let mut want = vec![ac, cd];
        want.sort_unstable();
        assert_eq!(r1, want);
        assert_eq!(s.e_failed, 4);
        assert_eq!(s.r_recover, 0.0);
        assert_eq!(s.total_damage, 5);
        assert_eq!(s.first_wave_fraction, 1.0);
    }

    #[test]
    fn no_initial_failure_is_a_fixed_point() {
        let g = diamond();
        let l = estimate_loads(&g, 0, 0, true).unwrap();
        let s = run_cascade(&g, &l, 0.0, &[]).unwrap();
        assert_eq!(s.r_recover, 1.0);
        assert!(s.rounds.is_empty());
        assert_eq!(s.total_damage, 0);
    }

    #[test]
    fn huge_beta_only_loses_incident_edges() {
        let g = diamond();
        let l = estimate_loads(&g, 0, 0, true).unwrap();
        let s = run_cascade(&g, &l, 1e6, &["b".into()]).unwrap();
        assert!(s.rounds.is_empty());
        assert_eq!(s.e_failed, 2);
        assert_eq!(s.capacities[0], (1.0 + 1e6) * l.edge_load[0]);
    }

    #[test]
    fn latent_demand_keeps_stranded_flow() {
        let g = diamond();
        let l = estimate_loads(&g, 0, 0, true).unwrap();
        let opts = CascadeOptions { latent_demand: true };
        let s = run_cascade_indices(&g, &l, 0.0, &[1], opts).unwrap();
        assert!(s.r_recover >= 0.0 && s.r_recover <= 1.0);
    }

    #[test]
    fn star_hub_is_least_recoverable() {
        let links: Vec<(&str, &str)> = ["l1", "l2", "l3", "l4"]
            .iter()
            .flat_map(|l| [("h", *l), (*l, "h")])
            .collect();
        let g = graph(&["h", "l1", "l2", "l3", "l4"], &links);
        let l = estimate_loads(&g, 0, 0, true).unwrap();
        let prof = recoverability_profile(&g, &l, 0.0).unwrap();
        assert_eq!(prof["h"], 0.0);
        assert!(prof.iter().all(|(id, &r)| id == "h" || r > prof["h"]));
        assert!(prof.values().all(|&r| (0.0..=1.0).contains(&r)));
    }

    #[test]
    fn shock_sweep_endpoints() {
        let g = diamond();
        let l = estimate_loads(&g, 0, 0, true).unwrap();
        let s = shock_sweep(&g, &l, 0.5, &[0, 4]).unwrap();
        assert_eq!(s, [(0, 0), (4, 4 + 4)]);
        assert!(shock_sweep(&g, &l, 0.5, &[5]).is_err());
    }

    #[test]
    fn beta_sweep_endpoints() {
        let g = diamond();
        let l = estimate_loads(&g, 0, 0, true).unwrap();
        let s = beta_sweep(&g, &l, &[0.0, 1e6], "b").unwrap();
        assert!(s[0].1 >= s[1].1);
        assert!(beta_sweep(&g, &l, &[1.0, 0.0], "b").is_err());
        assert!(beta_sweep(&g, &l, &[], "b").is_err());
    }
}
