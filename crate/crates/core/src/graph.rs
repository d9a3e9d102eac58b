//! Multilayer station graph: data model, route aggregation and inter-modal
//! transfer edges.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine, LatLon, SphereKdTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Metro,
    Bus,
    Ferry,
    Railway,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Metro, Mode::Bus, Mode::Ferry, Mode::Railway];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Metro => "metro",
            Mode::Bus => "bus",
            Mode::Ferry => "ferry",
            Mode::Railway => "railway",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "metro" | "subway" => Ok(Mode::Metro),
            "bus" => Ok(Mode::Bus),
            "ferry" => Ok(Mode::Ferry),
            "railway" | "rail" => Ok(Mode::Railway),
            other => Err(Error::input(format!("unknown transport mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub mode: Mode,
    pub lat: f64,
    pub lon: f64,
    pub in_core: bool,
}

impl Station {
    pub fn new(id: impl Into<String>, mode: Mode, lat: f64, lon: f64) -> Self {
        Self {
            id: id.into(),
            mode,
            lat,
            lon,
            in_core: true,
        }
    }

    pub fn position(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    IntraModal,
    InterModal,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::IntraModal => "intra",
            EdgeKind::InterModal => "inter",
        }
    }
}

impl FromStr for EdgeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intra" => Ok(EdgeKind::IntraModal),
            "inter" => Ok(EdgeKind::InterModal),
            other => Err(Error::input(format!("unknown edge kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub kind: EdgeKind,
    pub length_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub route_id: String,
    pub mode: Mode,
    pub stations: Vec<String>,
}

/// Directed, mode-attributed station graph.
///
/// Stations are kept sorted by id and edges by `(src, dst)` position, so
/// node index order coincides with lexicographic id order. Every analysis
/// that breaks ties "by id" relies on this.
#[derive(Debug, Clone)]
pub struct MultilayerGraph {
    stations: Vec<Station>,
    edges: Vec<Edge>,
    d_imt: f64,
    index: HashMap<String, usize>,
    endpoints: Vec<(usize, usize)>,
    out_adj: Vec<Vec<(usize, usize)>>,
    in_adj: Vec<Vec<(usize, usize)>>,
}

impl PartialEq for MultilayerGraph {
    fn eq(&self, other: &Self) -> bool {
        self.stations == other.stations
            && self.edges == other.edges
            && self.d_imt.to_bits() == other.d_imt.to_bits()
    }
}

impl MultilayerGraph {
    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new(), 0.0).expect("empty graph is valid")
    }

    /// Validates and indexes a graph. Stations and edges may come in any order.
    pub fn new(mut stations: Vec<Station>, edges: Vec<Edge>, d_imt: f64) -> Result<Self> {
        if !(d_imt.is_finite() && d_imt >= 0.0) {
            return Err(Error::input(format!("invalid transfer threshold {d_imt}")));
        }
        stations.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(stations.len());
        for (i, s) in stations.iter().enumerate() {
            if !s.position().is_valid() {
                return Err(Error::input(format!(
                    "station `{}` has invalid coordinates ({}, {})",
                    s.id, s.lat, s.lon
                )));
            }
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::input(format!("duplicate station id `{}`", s.id)));
            }
        }

        let mut keyed = Vec::with_capacity(edges.len());
        for e in edges {
            let (Some(&u), Some(&v)) = (index.get(&e.src), index.get(&e.dst)) else {
                return Err(Error::input(format!(
                    "edge {} -> {} references an unknown station",
                    e.src, e.dst
                )));
            };
            if u == v {
                return Err(Error::input(format!("self-loop at `{}`", e.src)));
            }
            if !(e.length_m.is_finite() && e.length_m >= 0.0) {
                return Err(Error::input(format!(
                    "edge {} -> {} has invalid length {}",
                    e.src, e.dst, e.length_m
                )));
            }
            let same_mode = stations[u].mode == stations[v].mode;
            if same_mode != (e.kind == EdgeKind::IntraModal) {
                return Err(Error::input(format!(
                    "edge {} -> {} is {:?} but joins {} and {}",
                    e.src, e.dst, e.kind, stations[u].mode, stations[v].mode
                )));
            }
            keyed.push(((u, v), e));
        }
        keyed.sort_by_key(|(k, _)| *k);
        if let Some(w) = keyed.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::input(format!(
                "duplicate edge {} -> {}",
                w[0].1.src, w[0].1.dst
            )));
        }

        let n = stations.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        let mut endpoints = Vec::with_capacity(keyed.len());
        let mut sorted_edges = Vec::with_capacity(keyed.len());
        for (eid, ((u, v), e)) in keyed.into_iter().enumerate() {
            out_adj[u].push((v, eid));
            in_adj[v].push((u, eid));
            endpoints.push((u, v));
            sorted_edges.push(e);
        }
        // out lists are already sorted by neighbor; in lists by source.

        Ok(Self {
            stations,
            edges: sorted_edges,
            d_imt,
            index,
            endpoints,
            out_adj,
            in_adj,
        })
    }

    /// Builds a graph from station-id pairs, deriving each edge's kind from the
    /// endpoint modes and its length from the Haversine distance. Duplicate
    /// pairs collapse.
    pub fn from_links<I, S>(stations: Vec<Station>, links: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let modes: HashMap<String, (Mode, LatLon)> = stations
            .iter()
            .map(|s| (s.id.clone(), (s.mode, s.position())))
            .collect();
        let mut seen = BTreeMap::new();
        for (a, b) in links {
            let (a, b) = (a.into(), b.into());
            let (Some(&(ma, pa)), Some(&(mb, pb))) = (modes.get(&a), modes.get(&b)) else {
                return Err(Error::input(format!("link {a} -> {b} references an unknown station")));
            };
            let kind = if ma == mb {
                EdgeKind::IntraModal
            } else {
                EdgeKind::InterModal
            };
            let length_m = haversine(pa, pb);
            seen.entry((a.clone(), b.clone())).or_insert(Edge {
                src: a,
                dst: b,
                kind,
                length_m,
            });
        }
        Self::new(stations, seen.into_values().collect(), 0.0)
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn d_imt(&self) -> f64 {
        self.d_imt
    }

    pub fn node_count(&self) -> usize {
        self.stations.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn station(&self, i: usize) -> &Station {
        &self.stations[i]
    }

    pub fn id(&self, i: usize) -> &str {
        &self.stations[i].id
    }

    pub fn position(&self, i: usize) -> LatLon {
        self.stations[i].position()
    }

    /// Outgoing `(neighbor, edge index)` pairs sorted by neighbor.
    pub fn out_edges(&self, i: usize) -> &[(usize, usize)] {
        &self.out_adj[i]
    }

    /// Incoming `(neighbor, edge index)` pairs sorted by neighbor.
    pub fn in_edges(&self, i: usize) -> &[(usize, usize)] {
        &self.in_adj[i]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out_adj[i].len()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_adj[i].len()
    }

    /// Total (in + out) degree.
    pub fn degree(&self, i: usize) -> usize {
        self.out_adj[i].len() + self.in_adj[i].len()
    }

    pub fn endpoints(&self, edge: usize) -> (usize, usize) {
        self.endpoints[edge]
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        let adj = &self.out_adj[u];
        adj.binary_search_by_key(&v, |&(w, _)| w).ok().map(|k| adj[k].1)
    }

    /// Union of in- and out-neighbors, sorted and deduplicated.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut n: Vec<usize> = self.out_adj[i]
            .iter()
            .chain(&self.in_adj[i])
            .map(|&(w, _)| w)
            .collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    /// Number of directed inter-modal edges.
    pub fn transfer_edge_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| e.kind == EdgeKind::InterModal)
            .count()
    }

    pub fn modes(&self) -> BTreeSet<Mode> {
        self.stations.iter().map(|s| s.mode).collect()
    }

    /// Copy with every inter-modal edge dropped and the threshold reset to 0.
    pub fn without_transfer_edges(&self) -> Self {
        let edges = self
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::IntraModal)
            .cloned()
            .collect();
        Self::new(self.stations.clone(), edges, 0.0).expect("subgraph of a valid graph")
    }

    /// Subgraph induced by the stations of the given modes.
    pub fn restrict_modes(&self, modes: &[Mode]) -> Self {
        let keep: Vec<bool> = self
            .stations
            .iter()
            .map(|s| modes.contains(&s.mode))
            .collect();
        self.induced(&keep)
    }

    /// Subgraph induced by the nodes flagged `true`.
    pub fn induced(&self, keep: &[bool]) -> Self {
        let stations = self
            .stations
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(s, _)| s.clone())
            .collect();
        let edges = self
            .edges
            .iter()
            .zip(&self.endpoints)
            .filter(|(_, &(u, v))| keep[u] && keep[v])
            .map(|(e, _)| e.clone())
            .collect();
        Self::new(stations, edges, self.d_imt).expect("subgraph of a valid graph")
    }
}

/// Aggregates routes into a graph of directed intra-modal edges.
///
/// With `core_only`, each route is cut into maximal runs of consecutive
/// in-core stations and only those runs contribute; a run of one station
/// contributes its node but no edge. The node set is every station that
/// appears in a contributing run.
pub fn build_graph(routes: &[Route], stations: &[Station], core_only: bool) -> Result<MultilayerGraph> {
    let by_id: HashMap<&str, &Station> = stations.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut nodes: BTreeMap<String, Station> = BTreeMap::new();
    let mut links: BTreeMap<(String, String), Edge> = BTreeMap::new();

    for route in routes {
        if route.stations.len() < 2 {
            return Err(Error::input(format!(
                "route `{}` has fewer than two stations",
                route.route_id
            )));
        }
        let mut resolved = Vec::with_capacity(route.stations.len());
        for sid in &route.stations {
            let st = by_id.get(sid.as_str()).ok_or_else(|| {
                Error::input(format!(
                    "route `{}` references unknown station `{}`",
                    route.route_id, sid
                ))
            })?;
            if st.mode != route.mode {
                return Err(Error::input(format!(
                    "route `{}` ({}) stops at `{}` which is a {} station",
                    route.route_id, route.mode, sid, st.mode
                )));
            }
            resolved.push(*st);
        }

        let runs: Vec<&[&Station]> = if core_only {
            resolved
                .split(|s| !s.in_core)
                .filter(|run| !run.is_empty())
                .collect()
        } else {
            vec![&resolved[..]]
        };
        for run in runs {
            for s in run {
                nodes.entry(s.id.clone()).or_insert_with(|| (*s).clone());
            }
            for pair in run.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                if a.id == b.id {
                    continue;
                }
                links
                    .entry((a.id.clone(), b.id.clone()))
                    .or_insert_with(|| Edge {
                        src: a.id.clone(),
                        dst: b.id.clone(),
                        kind: EdgeKind::IntraModal,
                        length_m: haversine(a.position(), b.position()),
                    });
            }
        }
    }

    MultilayerGraph::new(
        nodes.into_values().collect(),
        links.into_values().collect(),
        0.0,
    )
}

/// Result of [`add_transfer_edges`].
#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub graph: MultilayerGraph,
    /// Number of unordered station pairs linked (each yields two directed edges).
    pub pairs_added: usize,
}

/// Replaces the graph's inter-modal edges with walking transfers between every
/// pair of different-mode stations at most `d_imt` meters apart.
pub fn add_transfer_edges(g: &MultilayerGraph, d_imt: f64) -> Result<TransferOutcome> {
    if !(d_imt.is_finite() && d_imt >= 0.0) {
        return Err(Error::input(format!("invalid transfer threshold {d_imt}")));
    }
    let positions: Vec<LatLon> = g.stations().iter().map(Station::position).collect();
    let tree = SphereKdTree::build(&positions);
    let pairs: Vec<(usize, usize, f64)> = (0..g.node_count())
        .flat_map(|i| {
            let tree = &tree;
            let positions = &positions;
            tree.within(positions[i], d_imt)
                .into_iter()
                .filter(move |&j| j > i && g.station(i).mode != g.station(j).mode)
                .filter_map(move |j| {
                    let d = haversine(positions[i], positions[j]);
                    (d <= d_imt).then_some((i, j, d))
                })
        })
        .collect();
    Ok(with_transfer_pairs(g, &pairs, d_imt))
}

pub(crate) fn with_transfer_pairs(
    g: &MultilayerGraph,
    pairs: &[(usize, usize, f64)],
    d_imt: f64,
) -> TransferOutcome {
    let mut edges: Vec<Edge> = g
        .edges()
        .iter()
        .filter(|e| e.kind == EdgeKind::IntraModal)
        .cloned()
        .collect();
    for &(i, j, d) in pairs {
        for (a, b) in [(i, j), (j, i)] {
            edges.push(Edge {
                src: g.id(a).to_owned(),
                dst: g.id(b).to_owned(),
                kind: EdgeKind::InterModal,
                length_m: d,
            });
        }
    }
    let graph = MultilayerGraph::new(g.stations().to_vec(), edges, d_imt)
        .expect("transfer edges join distinct existing stations");
    TransferOutcome {
        graph,
        pairs_added: pairs.len(),
    }
}
