//! Node-removal attack campaigns, LCC degradation curves and relocation rates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::haversine;
use crate::graph::MultilayerGraph;
use crate::metrics::{bfs_hops, brandes, UnionFind};
use crate::motifs::count_ffl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AttackKind {
    Random { seed: u64 },
    DegreeTargeted,
    BetweennessTargeted,
    MotifImportance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttackStrategy {
    pub kind: AttackKind,
    /// Recompute the targeting metric after every removal. Ignored for random failure.
    pub adaptive: bool,
}

impl AttackStrategy {
    pub fn random(seed: u64) -> Self {
        Self {
            kind: AttackKind::Random { seed },
            adaptive: false,
        }
    }

    pub fn targeted(kind: AttackKind) -> Self {
        Self {
            kind,
            adaptive: false,
        }
    }

    pub fn adaptive(kind: AttackKind) -> Self {
        Self {
            kind,
            adaptive: !matches!(kind, AttackKind::Random { .. }),
        }
    }

    /// Short label used in file names and reports.
    pub fn label(&self) -> String {
        let base = match self.kind {
            AttackKind::Random { .. } => "random",
            AttackKind::DegreeTargeted => "degree",
            AttackKind::BetweennessTargeted => "betweenness",
            AttackKind::MotifImportance => "motif",
        };
        if self.adaptive {
            format!("{base}-adaptive")
        } else {
            base.to_owned()
        }
    }
}

impl fmt::Display for AttackStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn targeting_metric(g: &MultilayerGraph, kind: AttackKind, alive: Option<&[bool]>) -> Vec<f64> {
    match kind {
        AttackKind::DegreeTargeted => (0..g.node_count())
            .map(|i| {
                let live = |w: &(usize, usize)| alive.is_none_or(|a| a[w.0]);
                (g.out_edges(i).iter().filter(|w| live(w)).count()
                    + g.in_edges(i).iter().filter(|w| live(w)).count()) as f64
            })
            .collect(),
        AttackKind::BetweennessTargeted => brandes(g, alive),
        AttackKind::MotifImportance => count_ffl(g, alive).node.into_iter().map(|c| c as f64).collect(),
        AttackKind::Random { .. } => unreachable!("random failure has no targeting metric"),
    }
}

/// Removal order as node indices.
pub fn attack_order_indices(g: &MultilayerGraph, strategy: &AttackStrategy) -> Vec<usize> {
    let n = g.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    match strategy.kind {
        AttackKind::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
            order
        }
        kind if !strategy.adaptive => {
            let metric = targeting_metric(g, kind, None);
            order.sort_by(|&x, &y| metric[y].total_cmp(&metric[x]).then(x.cmp(&y)));
            order
        }
        kind => {
            let mut alive = vec![true; n];
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let metric = targeting_metric(g, kind, Some(&alive));
                let next = (0..n)
                    .filter(|&i| alive[i])
                    .min_by(|&x, &y| metric[y].total_cmp(&metric[x]).then(x.cmp(&y)))
                    .expect("a live node remains");
                alive[next] = false;
                out.push(next);
            }
            out
        }
    }
}

/// Full removal order as station ids. Targeted strategies sort by descending
/// metric with ties in id order.
pub fn attack_order(g: &MultilayerGraph, strategy: &AttackStrategy) -> Vec<String> {
    attack_order_indices(g, strategy)
        .into_iter()
        .map(|i| g.id(i).to_owned())
        .collect()
}

/// How the area under the degradation curve is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaRule {
    /// `(1/N) Σ_{i=1..N} S(i/N)`: right Riemann sum over the removal steps.
    #[default]
    Riemann,
    /// Trapezoid rule over all `N + 1` points including `S(0)`.
    Trapezoid,
}

impl FromStr for AreaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riemann" => Ok(AreaRule::Riemann),
            "trapezoid" => Ok(AreaRule::Trapezoid),
            other => Err(Error::input(format!("unknown area rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationCurve {
    /// `(q, S(q))` for `q = 0, 1/N, …, 1`.
    pub points: Vec<(f64, f64)>,
    pub r_b: f64,
}

/// Relative LCC sizes `S[k]` after the first `k` nodes of `order` are removed,
/// normalized by the original node count. Built by re-inserting nodes in
/// reverse order into a union-find.
pub(crate) fn lcc_profile(g: &MultilayerGraph, order: &[usize]) -> Vec<f64> {
    let n = g.node_count();
    let mut uf = UnionFind::new(n);
    let mut alive = vec![false; n];
    let mut sizes = vec![0usize; n + 1];
    let mut largest = 0;
    for k in (0..n).rev() {
        let v = order[k];
        alive[v] = true;
        largest = largest.max(1);
        for &(w, _) in g.out_edges(v).iter().chain(g.in_edges(v)) {
            if alive[w] {
                largest = largest.max(uf.union(v, w));
            }
        }
        sizes[k] = largest;
    }
    sizes.into_iter().map(|s| s as f64 / n as f64).collect()
}

fn area(profile: &[f64], rule: AreaRule) -> f64 {
    let n = (profile.len() - 1) as f64;
    match rule {
        AreaRule::Riemann => profile[1..].iter().sum::<f64>() / n,
        AreaRule::Trapezoid => profile.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() / n,
    }
}

pub fn degradation_curve(g: &MultilayerGraph, strategy: &AttackStrategy, repeats: usize) -> Result<DegradationCurve> {
    degradation_curve_with(g, strategy, repeats, AreaRule::Riemann)
}

/// Degradation curve of one strategy. Random failure averages `repeats`
/// independent permutations drawn from one seeded stream; targeted
/// strategies are deterministic and ignore `repeats`.
pub fn degradation_curve_with(
    g: &MultilayerGraph,
    strategy: &AttackStrategy,
    repeats: usize,
    rule: AreaRule,
) -> Result<DegradationCurve> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::input("degradation curve of an empty graph"));
    }
    if repeats == 0 {
        return Err(Error::input("repeats must be at least 1"));
    }
    let profile = match strategy.kind {
        AttackKind::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let orders: Vec<Vec<usize>> = (0..repeats)
                .map(|_| {
                    let mut o: Vec<usize> = (0..n).collect();
                    o.shuffle(&mut rng);
                    o
                })
                .collect();
            let profiles: Vec<Vec<f64>> = orders.par_iter().map(|o| lcc_profile(g, o)).collect();
            let mut mean = vec![0.0; n + 1];
            for p in &profiles {
                for (m, s) in mean.iter_mut().zip(p) {
                    *m += s;
                }
            }
            mean.iter_mut().for_each(|m| *m /= repeats as f64);
            mean
        }
        _ => lcc_profile(g, &attack_order_indices(g, strategy)),
    };
    let r_b = area(&profile, rule);
    let points = profile
        .into_iter()
        .enumerate()
        .map(|(k, s)| (k as f64 / n as f64, s))
        .collect();
    Ok(DegradationCurve { points, r_b })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelocationModel {
    /// Any graph neighbor within `d_max` may absorb a failed node's passengers.
    Symmetric,
    /// Only neighbors of a different transport mode qualify.
    Asymmetric,
}

impl FromStr for RelocationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "symmetric" => Ok(RelocationModel::Symmetric),
            "asymmetric" => Ok(RelocationModel::Asymmetric),
            other => Err(Error::input(format!("unknown relocation model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelocationResult {
    /// `R_l(v)` for every evaluated node with at least one descendant.
    pub per_node: BTreeMap<String, f64>,
    pub network_rl: f64,
    pub d_max: f64,
    pub model: RelocationModel,
}

/// Node relocation rate `R_l(v)`, or `None` when `v` reaches nothing.
///
/// For each descendant `n` of `v` (reachable in the intact graph), the
/// relocation neighbor `u*` is the closest admissible neighbor of `v` from
/// which `n` is still reachable once `v` is removed; `n` contributes
/// `1 - d(v, u*) / d_max`, or 0 when no admissible neighbor reaches it.
fn node_relocation(g: &MultilayerGraph, v: usize, d_max: f64, model: RelocationModel) -> Option<f64> {
    let n = g.node_count();
    let mut dist = vec![0usize; n];
    bfs_hops(g, v, None, &mut dist);
    let desc: Vec<usize> = (0..n).filter(|&t| t != v && dist[t] != usize::MAX).collect();
    if desc.is_empty() {
        return None;
    }

    let pv = g.position(v);
    let mode = g.station(v).mode;
    let mut candidates: Vec<(f64, usize)> = g
        .neighbors(v)
        .into_iter()
        .filter(|&u| model == RelocationModel::Symmetric || g.station(u).mode != mode)
        .map(|u| (haversine(pv, g.position(u)), u))
        .filter(|&(d, _)| d <= d_max)
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut alive = vec![true; n];
    alive[v] = false;
    let mut covered = vec![false; n];
    let mut remaining = desc.len();
    let mut total = 0.0;
    for (d, u) in candidates {
        if remaining == 0 {
            break;
        }
        bfs_hops(g, u, Some(&alive), &mut dist);
        let weight = 1.0 - d / d_max;
        for &t in &desc {
            if !covered[t] && dist[t] != usize::MAX {
                covered[t] = true;
                remaining -= 1;
                total += weight;
            }
        }
    }
    Some(total / desc.len() as f64)
}

/// Relocation rate per node and its network average over nodes that have
/// descendants. `sample` restricts evaluation to the given station ids.
pub fn relocation_rate(
    g: &MultilayerGraph,
    d_max: f64,
    model: RelocationModel,
    sample: Option<&[String]>,
) -> Result<RelocationResult> {
    if !(d_max.is_finite() && d_max > 0.0) {
        return Err(Error::input(format!("d_max must be positive, got {d_max}")));
    }
    if model == RelocationModel::Asymmetric && g.modes().len() < 2 {
        return Err(Error::NotApplicable(
            "asymmetric relocation is not applicable to a single-mode network".into(),
        ));
    }
    let nodes: Vec<usize> = match sample {
        Some(ids) => {
            let mut idx = ids
                .iter()
                .map(|id| {
                    g.index_of(id)
                        .ok_or_else(|| Error::input(format!("unknown station `{id}` in sample")))
                })
                .collect::<Result<Vec<_>>>()?;
            idx.sort_unstable();
            idx.dedup();
            idx
        }
        None => (0..g.node_count()).collect(),
    };
    let values: Vec<Option<f64>> = nodes
        .par_iter()
        .map(|&v| node_relocation(g, v, d_max, model))
        .collect();
    let per_node: BTreeMap<String, f64> = nodes
        .iter()
        .zip(values)
        .filter_map(|(&v, r)| r.map(|r| (g.id(v).to_owned(), r)))
        .collect();
    let network_rl = if per_node.is_empty() {
        0.0
    } else {
        per_node.values().sum::<f64>() / per_node.len() as f64
    };
    Ok(RelocationResult {
        per_node,
        network_rl,
        d_max,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Mode, Station};

    fn star() -> MultilayerGraph {
        let st = ["h", "l1", "l2", "l3", "l4"]
            .iter()
            .enumerate()
            .map(|(i, id)| Station::new(*id, Mode::Bus, 30.0 + 0.01 * i as f64, 114.0))
            .collect();
        let links: Vec<(String, String)> = (1..=4)
            .flat_map(|i| {
                [
                    ("h".to_string(), format!("l{i}")),
                    (format!("l{i}"), "h".to_string()),
                ]
            })
            .collect();
        MultilayerGraph::from_links(st, links).unwrap()
    }

    #[test]
    fn hub_goes_first() {
        let order = attack_order(&star(), &AttackStrategy::targeted(AttackKind::DegreeTargeted));
        assert_eq!(order, ["h", "l1", "l2", "l3", "l4"]);
        let adaptive = attack_order(&star(), &AttackStrategy::adaptive(AttackKind::DegreeTargeted));
        assert_eq!(adaptive[0], "h");
    }

    #[test]
    fn random_order_is_reproducible() {
        let g = star();
        let a = attack_order(&g, &AttackStrategy::random(7));
        assert_eq!(a, attack_order(&g, &AttackStrategy::random(7)));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, ["h", "l1", "l2", "l3", "l4"]);
    }

    #[test]
    fn star_degree_attack_rb() {
        let c = degradation_curve(&star(), &AttackStrategy::targeted(AttackKind::DegreeTargeted), 1).unwrap();
        let s: Vec<f64> = c.points.iter().map(|p| p.1).collect();
        assert_eq!(s, [1.0, 0.2, 0.2, 0.2, 0.2, 0.0]);
        assert!((c.r_b - 0.16).abs() < 1e-15);
    }

    #[test]
    fn single_node_rb_is_zero() {
        let g = MultilayerGraph::new(vec![Station::new("x", Mode::Bus, 0.0, 0.0)], vec![], 0.0).unwrap();
        let c = degradation_curve(&g, &AttackStrategy::random(1), 3).unwrap();
        assert_eq!(c.r_b, 0.0);
        assert_eq!(c.points, [(0.0, 1.0), (1.0, 0.0)]);
    }

    #[test]
    fn trapezoid_matches_three_stop_line() {
        // Three stops served both ways: hub removal leaves two singletons.
        let st = ["a", "b", "c"]
            .iter()
            .enumerate()
            .map(|(i, id)| Station::new(*id, Mode::Ferry, 30.0 + 0.02 * i as f64, 114.0))
            .collect();
        let g = MultilayerGraph::from_links(st, [("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")]).unwrap();
        let c = degradation_curve_with(&g, &AttackStrategy::targeted(AttackKind::DegreeTargeted), 1, AreaRule::Trapezoid)
            .unwrap();
        assert!((c.r_b - 7.0 / 18.0).abs() < 1e-12);
        // Expected random-failure area is 25/54.
        let r = degradation_curve_with(&g, &AttackStrategy::random(3), 20_000, AreaRule::Trapezoid).unwrap();
        assert!((r.r_b - 25.0 / 54.0).abs() < 5e-3, "{}", r.r_b);
    }

    fn pair_with_neighbor(offset_m: f64, neighbor_mode: Mode) -> MultilayerGraph {
        let m = 1.0 / 111_194.93;
        let st = vec![
            Station::new("v", Mode::Metro, 30.0, 114.0),
            Station::new("u", neighbor_mode, 30.0 + offset_m * m, 114.0),
            Station::new("n", neighbor_mode, 30.01, 114.0),
        ];
        let mut links = vec![("v", "n"), ("u", "n")];
        if neighbor_mode == Mode::Metro {
            links.push(("v", "u"));
        } else {
            links.extend([("v", "u"), ("u", "v")]);
        }
        MultilayerGraph::from_links(st, links).unwrap()
    }

    #[test]
    fn colocated_neighbor_gives_full_relocation() {
        let g = pair_with_neighbor(0.0, Mode::Bus);
        let r = relocation_rate(&g, 750.0, RelocationModel::Symmetric, Some(&["v".into()])).unwrap();
        assert_eq!(r.per_node["v"], 1.0);
    }

    #[test]
    fn neighbor_at_dmax_gives_zero() {
        let far = pair_with_neighbor(500.0, Mode::Bus);
        let d_far = haversine(far.position(far.index_of("v").unwrap()), far.position(far.index_of("u").unwrap()));
        let r = relocation_rate(&far, d_far, RelocationModel::Symmetric, Some(&["v".into()])).unwrap();
        assert_eq!(r.per_node["v"], 0.0);
    }

    #[test]
    fn asymmetric_needs_two_modes() {
        let g = pair_with_neighbor(0.0, Mode::Metro);
        assert!(matches!(
            relocation_rate(&g, 750.0, RelocationModel::Asymmetric, None),
            Err(Error::NotApplicable(_))
        ));
        let sym = relocation_rate(&g, 750.0, RelocationModel::Symmetric, None).unwrap();
        assert!(sym.per_node.contains_key("v"));
        // `n` reaches nothing, so it is not evaluated.
        assert!(!sym.per_node.contains_key("n"));
    }

    #[test]
    fn bad_dmax_rejected() {
        assert!(relocation_rate(&star(), 0.0, RelocationModel::Symmetric, None).is_err());
    }
}
