//! Seeded synthetic networks: a multilayer city and plain random graphs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::haversine;
use crate::graph::{Mode, MultilayerGraph, Route, Station};

const CENTER: (f64, f64) = (30.59, 114.30);
const M_PER_DEG: f64 = 111_195.0;
const METRO_SPACING_M: f64 = 1200.0;
const FERRY_SPACING_M: f64 = 1500.0;
const RAIL_SPACING_M: f64 = 3000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCitySpec {
    pub n_metro: usize,
    pub n_bus: usize,
    pub n_ferry: usize,
    pub n_rail: usize,
    pub seed: u64,
    /// Side of the square service area in kilometres.
    pub area_km: f64,
}

impl Default for SyntheticCitySpec {
    fn default() -> Self {
        SyntheticCitySpec {
            n_metro: 20,
            n_bus: 200,
            n_ferry: 3,
            n_rail: 3,
            seed: 1,
            area_km: 20.0,
        }
    }
}

/// Planar offset in metres from the city centre to a coordinate.
fn at(x: f64, y: f64) -> (f64, f64) {
    let lat = CENTER.0 + y / M_PER_DEG;
    let lon = CENTER.1 + x / (M_PER_DEG * CENTER.0.to_radians().cos());
    (lat, lon)
}

fn offset_of(s: &Station) -> (f64, f64) {
    let y = (s.lat - CENTER.0) * M_PER_DEG;
    let x = (s.lon - CENTER.1) * M_PER_DEG * CENTER.0.to_radians().cos();
    (x, y)
}

/// Moves `s` to a random bearing 30–90 m away from `anchor`.
fn place_near(s: &mut Station, anchor: &Station, rng: &mut ChaCha8Rng) {
    let (ax, ay) = offset_of(anchor);
    let r = rng.gen_range(30.0..90.0);
    let t = rng.gen_range(0.0..std::f64::consts::TAU);
    let (lat, lon) = at(ax + r * t.cos(), ay + r * t.sin());
    s.lat = lat;
    s.lon = lon;
}

fn both_ways(id: String, mode: Mode, stations: Vec<String>, out: &mut Vec<Route>) {
    if stations.len() < 2 {
        return;
    }
    let mut back = stations.clone();
    back.reverse();
    out.push(Route {
        route_id: format!("{id}-a"),
        mode,
        stations,
    });
    out.push(Route {
        route_id: format!("{id}-b"),
        mode,
        stations: back,
    });
}

fn nearest(pool: &[Station], target: &Station, taken: &[bool]) -> Option<usize> {
    (0..pool.len())
        .filter(|&i| !taken[i])
        .min_by(|&a, &b| {
            haversine(pool[a].position(), target.position())
                .total_cmp(&haversine(pool[b].position(), target.position()))
                .then(a.cmp(&b))
        })
}

/// Deterministic synthetic city: radial metro lines through a shared hub, a
/// perturbed bus grid with row, column and diagonal routes, and short linear
/// ferry and rail lines. Every route runs in both directions and every
/// station is in the core area. Roughly half the metro stations and the
/// first ferry and rail stations sit 30–90 m from a station of another mode.
pub fn generate_city(spec: &SyntheticCitySpec) -> Result<(Vec<Station>, Vec<Route>)> {
    if !(spec.area_km.is_finite() && spec.area_km > 0.0) {
        return Err(Error::input(format!("area_km must be positive, got {}", spec.area_km)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut routes = Vec::new();

    // Metro: station 0 is the hub, the rest alternate outward on each line.
    let mut metro: Vec<Station> = Vec::with_capacity(spec.n_metro);
    let lines = (spec.n_metro / 5).clamp(1, 4);
    let mut line_members: Vec<(Vec<usize>, Vec<usize>)> = vec![(Vec::new(), Vec::new()); lines];
    if spec.n_metro > 0 {
        let (lat, lon) = at(0.0, 0.0);
        metro.push(Station::new("M001", Mode::Metro, lat, lon));
    }
    let angles: Vec<f64> = (0..lines)
        .map(|l| std::f64::consts::PI * l as f64 / lines as f64 + rng.gen_range(-0.15..0.15))
        .collect();
    for i in 1..spec.n_metro {
        let j = i - 1;
        let line = j % lines;
        let side = (j / lines) % 2;
        let (fwd, back) = &mut line_members[line];
        let arm = if side == 0 { fwd } else { back };
        let r = METRO_SPACING_M * (arm.len() + 1) as f64 + rng.gen_range(-100.0..100.0);
        let t = angles[line] + if side == 0 { 0.0 } else { std::f64::consts::PI };
        let (lat, lon) = at(r * t.cos(), r * t.sin());
        arm.push(i);
        metro.push(Station::new(format!("M{:03}", i + 1), Mode::Metro, lat, lon));
    }
    for (l, (fwd, back)) in line_members.iter().enumerate() {
        let mut seq: Vec<String> = back.iter().rev().map(|&i| metro[i].id.clone()).collect();
        if !metro.is_empty() {
            seq.push(metro[0].id.clone());
        }
        seq.extend(fwd.iter().map(|&i| metro[i].id.clone()));
        both_ways(format!("metro{}", l + 1), Mode::Metro, seq, &mut routes);
    }

    // Bus: row-major perturbed grid.
    let mut bus: Vec<Station> = Vec::with_capacity(spec.n_bus);
    let cols = (spec.n_bus as f64).sqrt().ceil().max(1.0) as usize;
    let rows = spec.n_bus.div_ceil(cols);
    let side_m = spec.area_km * 1000.0;
    let spacing = side_m / cols as f64;
    let cell = |r: usize, c: usize| r * cols + c;
    for i in 0..spec.n_bus {
        let (r, c) = (i / cols, i % cols);
        let x = -side_m / 2.0 + spacing * (c as f64 + 0.5) + rng.gen_range(-0.2..0.2) * spacing;
        let y = -side_m / 2.0 + spacing * (r as f64 + 0.5) + rng.gen_range(-0.2..0.2) * spacing;
        let (lat, lon) = at(x, y);
        bus.push(Station::new(format!("B{:04}", i + 1), Mode::Bus, lat, lon));
    }
    // Pull a bus stop next to every other metro station.
    let mut taken = vec![false; bus.len()];
    for m in metro.iter().step_by(2) {
        if let Some(b) = nearest(&bus, m, &taken) {
            taken[b] = true;
            place_near(&mut bus[b], m, &mut rng);
        }
    }
    let bus_id = |r: usize, c: usize| -> Option<String> {
        let i = cell(r, c);
        (c < cols && i < spec.n_bus).then(|| format!("B{:04}", i + 1))
    };
    for r in 0..rows {
        let seq: Vec<String> = (0..cols).filter_map(|c| bus_id(r, c)).collect();
        both_ways(format!("bus-r{r}"), Mode::Bus, seq, &mut routes);
    }
    for c in 0..cols {
        let seq: Vec<String> = (0..rows).filter_map(|r| bus_id(r, c)).collect();
        both_ways(format!("bus-c{c}"), Mode::Bus, seq, &mut routes);
    }
    for start in (0..rows).step_by(3) {
        let seq: Vec<String> = (0..cols.min(rows - start))
            .map_while(|s| bus_id(start + s, s))
            .collect();
        both_ways(format!("bus-d{start}"), Mode::Bus, seq, &mut routes);
    }

    let mut placed: Vec<Station> = metro.iter().chain(&bus).cloned().collect();
    let mut arteries = |n: usize, prefix: &str, mode: Mode, spacing: f64, origin: (f64, f64), heading: f64, rng: &mut ChaCha8Rng| {
        let mut line: Vec<Station> = (0..n)
            .map(|i| {
                let d = spacing * i as f64;
                let (lat, lon) = at(origin.0 + d * heading.cos(), origin.1 + d * heading.sin());
                Station::new(format!("{prefix}{:02}", i + 1), mode, lat, lon)
            })
            .collect();
        if let Some(first) = line.first_mut() {
            let none = vec![false; placed.len()];
            if let Some(a) = nearest(&placed, first, &none) {
                let anchor = placed[a].clone();
                place_near(first, &anchor, rng);
            }
        }
        placed.extend(line.iter().cloned());
        line
    };
    let ferry = arteries(spec.n_ferry, "F", Mode::Ferry, FERRY_SPACING_M, (side_m * 0.3, -side_m * 0.1), 0.4, &mut rng);
    let rail = arteries(spec.n_rail, "R", Mode::Railway, RAIL_SPACING_M, (-side_m * 0.3, side_m * 0.1), 2.6, &mut rng);
    both_ways("ferry1".into(), Mode::Ferry, ferry.iter().map(|s| s.id.clone()).collect(), &mut routes);
    both_ways("rail1".into(), Mode::Railway, rail.iter().map(|s| s.id.clone()).collect(), &mut routes);

    let stations = metro.into_iter().chain(bus).chain(ferry).chain(rail).collect();
    Ok((stations, routes))
}

fn scatter(n: usize, side_m: f64, rng: &mut ChaCha8Rng, mode_of: impl Fn(usize, &mut ChaCha8Rng) -> Mode) -> Vec<Station> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n)
        .map(|i| {
            let x = rng.gen_range(-side_m / 2.0..side_m / 2.0);
            let y = rng.gen_range(-side_m / 2.0..side_m / 2.0);
            let mode = mode_of(i, rng);
            let (lat, lon) = at(x, y);
            Station::new(format!("n{i:0width$}"), mode, lat, lon)
        })
        .collect()
}

/// Directed Erdős–Rényi graph: each ordered pair is an edge with probability
/// `p`. Stations are scattered over a 3 km square and split at random
/// between metro and bus.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<MultilayerGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::input(format!("p must lie in [0, 1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stations = scatter(n, 3000.0, &mut rng, |_, rng| if rng.gen_bool(0.5) { Mode::Metro } else { Mode::Bus });
    let ids: Vec<String> = stations.iter().map(|s| s.id.clone()).collect();
    let mut links = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(p) {
                links.push((ids[u].clone(), ids[v].clone()));
            }
        }
    }
    MultilayerGraph::from_links(stations, links)
}

/// Barabási–Albert preferential attachment with `m` links per new node,
/// grown from a clique of `m + 1` nodes. Every link is added in both
/// directions. All stations are bus stops over a 10 km square.
pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<MultilayerGraph> {
    if m == 0 || n <= m {
        return Err(Error::input(format!("need 0 < m < n, got m = {m}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stations = scatter(n, 10_000.0, &mut rng, |_, _| Mode::Bus);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut ends: Vec<usize> = Vec::new();
    for u in 0..=m {
        for v in u + 1..=m {
            pairs.push((u, v));
            ends.extend([u, v]);
        }
    }
    for u in m + 1..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let &t = ends.choose(&mut rng).expect("seed clique is non-empty");
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for t in targets {
            pairs.push((t, u));
            ends.extend([t, u]);
        }
    }
    let ids: Vec<String> = stations.iter().map(|s| s.id.clone()).collect();
    let links = pairs
        .into_iter()
        .flat_map(|(a, b)| [(ids[a].clone(), ids[b].clone()), (ids[b].clone(), ids[a].clone())]);
    MultilayerGraph::from_links(stations, links)
}
