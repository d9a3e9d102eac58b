//! Analyses shared by the subcommands and `run-all`. Every function returns
//! serialized CSV or JSON so outputs are byte-stable across runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use resilience_core::cascade::{
    beta_sweep, estimate_loads, recoverability_profile, run_cascade_indices, shock_sweep, CascadeOptions,
    CascadeState, LoadModel,
};
use resilience_core::graph::{add_transfer_edges, build_graph, Mode, MultilayerGraph};
use resilience_core::io::{from_graphml, read_routes, read_stations, to_graphml};
use resilience_core::metrics::{
    betweenness_values, degree, geospatial_efficiency, global_efficiency, out_degree, summarize, NetworkSummary,
    NodeMetricVector,
};
use resilience_core::motifs::{enumerate_ffl, motif_attack_order, motif_scores, structural_hierarchy};
use resilience_core::resilience::{
    degradation_curve_with, relocation_rate, AreaRule, AttackKind, AttackStrategy, DegradationCurve, RelocationModel,
};
use resilience_core::stats::{ensemble, static_vs_dynamic_report, z_score, CorrelationMatrix};
use resilience_core::synth::generate_city;
use resilience_core::theory::{pareto_sweep, ParetoOptions, ParetoPoint};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::InputError;

pub fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).context("serializing JSON")?;
    s.push('\n');
    Ok(s)
}

/// CSV with Unix newlines.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("flushing CSV: {e}"))?;
    Ok(String::from_utf8(bytes)?)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory `{}`", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing `{}`", path.display()))
}

fn open_input(path: &Path, what: &str) -> Result<fs::File> {
    fs::File::open(path)
        .map_err(|e| InputError(format!("cannot open {what} file `{}`: {e}", path.display())).into())
}

/// Graph without transfer edges, from the configured CSVs or the synthetic city.
pub fn load_base_graph(cfg: &RunConfig) -> Result<MultilayerGraph> {
    let (stations, routes) = match (&cfg.stations, &cfg.routes) {
        (Some(s), Some(r)) => {
            let stations = read_stations(open_input(s, "stations")?)
                .with_context(|| format!("reading `{}`", s.display()))?;
            let routes = read_routes(open_input(r, "routes")?)
                .with_context(|| format!("reading `{}`", r.display()))?;
            (stations, routes)
        }
        _ => generate_city(&cfg.city)?,
    };
    Ok(build_graph(&routes, &stations, cfg.core_only)?)
}

fn graph_key(cfg: &RunConfig) -> Result<String> {
    let mut h = Sha256::new();
    match (&cfg.stations, &cfg.routes) {
        (Some(s), Some(r)) => {
            for p in [s, r] {
                let bytes = fs::read(p)
                    .map_err(|e| InputError(format!("cannot read `{}`: {e}", p.display())))?;
                h.update((bytes.len() as u64).to_le_bytes());
                h.update(bytes);
            }
        }
        _ => h.update(serde_json::to_vec(&cfg.city)?),
    }
    h.update([cfg.core_only as u8]);
    h.update(cfg.d_imt.to_le_bytes());
    Ok(hex::encode(h.finalize()))
}

/// Integrated graph at `cfg.d_imt`. With a cache directory the graph is read
/// from, or written to, a GraphML file keyed by a hash of the inputs.
pub fn load_graph(cfg: &RunConfig, cache: Option<&Path>) -> Result<MultilayerGraph> {
    let cached: Option<PathBuf> = match cache {
        Some(dir) => Some(dir.join(format!("graph-{}.graphml", &graph_key(cfg)?[..16]))),
        None => None,
    };
    if let Some(path) = &cached {
        if path.exists() {
            let text = fs::read_to_string(path).with_context(|| format!("reading cache `{}`", path.display()))?;
            return from_graphml(&text).with_context(|| format!("parsing cache `{}`", path.display()));
        }
    }
    let g = add_transfer_edges(&load_base_graph(cfg)?, cfg.d_imt)?.graph;
    if let Some(path) = &cached {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, to_graphml(&g)).with_context(|| format!("writing cache `{}`", path.display()))?;
    }
    Ok(g)
}

pub fn node_metrics_csv(g: &MultilayerGraph) -> Result<String> {
    let (deg, out, bc) = (degree(g), out_degree(g), betweenness_values(g));
    csv_table(
        &["id", "degree", "out_degree", "betweenness"],
        (0..g.node_count()).map(|i| vec![g.id(i).to_owned(), num(deg[i]), num(out[i]), num(bc[i])]),
    )
}

pub fn strategy_by_name(name: &str, seed: u64, adaptive: bool) -> Result<AttackStrategy> {
    let kind = match name {
        "random" => return Ok(AttackStrategy::random(seed)),
        "degree" => AttackKind::DegreeTargeted,
        "betweenness" => AttackKind::BetweennessTargeted,
        "motif" => AttackKind::MotifImportance,
        other => return Err(InputError(format!("unknown strategy `{other}`")).into()),
    };
    Ok(if adaptive {
        AttackStrategy::adaptive(kind)
    } else {
        AttackStrategy::targeted(kind)
    })
}

pub const STRATEGIES: [&str; 4] = ["random", "degree", "betweenness", "motif"];

/// `(curves CSV, r_b summary JSON)` for the given strategies.
pub fn attack_outputs(g: &MultilayerGraph, strategies: &[AttackStrategy], repeats: usize, rule: AreaRule) -> Result<(String, String)> {
    let curves: Vec<(String, DegradationCurve)> = strategies
        .iter()
        .map(|s| Ok((s.label(), degradation_curve_with(g, s, repeats, rule)?)))
        .collect::<Result<_>>()?;
    let csv = csv_table(
        &["strategy", "q", "s"],
        curves
            .iter()
            .flat_map(|(l, c)| c.points.iter().map(move |&(q, s)| vec![l.clone(), num(q), num(s)])),
    )?;
    let summary: BTreeMap<&str, f64> = curves.iter().map(|(l, c)| (l.as_str(), c.r_b)).collect();
    Ok((csv, to_json(&summary)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct RelocationAggregate {
    pub d_max: f64,
    pub model: RelocationModel,
    /// `None` when the model does not apply to the network.
    pub network_rl: Option<f64>,
    pub evaluated_nodes: usize,
}

/// Per-node CSV `id,d_max,model,rl` and the aggregates.
pub fn relocation_outputs(g: &MultilayerGraph, d_maxes: &[f64], models: &[RelocationModel]) -> Result<(String, Vec<RelocationAggregate>)> {
    let mut rows = Vec::new();
    let mut agg = Vec::new();
    for &d in d_maxes {
        for &m in models {
            match relocation_rate(g, d, m, None) {
                Ok(r) => {
                    for (id, v) in &r.per_node {
                        rows.push(vec![id.clone(), num(d), model_name(m).into(), num(*v)]);
                    }
                    agg.push(RelocationAggregate {
                        d_max: d,
                        model: m,
                        network_rl: Some(r.network_rl),
                        evaluated_nodes: r.per_node.len(),
                    });
                }
                Err(resilience_core::Error::NotApplicable(_)) => agg.push(RelocationAggregate {
                    d_max: d,
                    model: m,
                    network_rl: None,
                    evaluated_nodes: 0,
                }),
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok((csv_table(&["id", "d_max", "model", "rl"], rows)?, agg))
}

pub fn model_name(m: RelocationModel) -> &'static str {
    match m {
        RelocationModel::Symmetric => "symmetric",
        RelocationModel::Asymmetric => "asymmetric",
    }
}

pub struct MotifOutputs {
    pub ffl_count: u64,
    pub nodes_csv: String,
    pub edges_csv: String,
    pub attack_order: String,
}

pub fn motif_outputs(g: &MultilayerGraph, top_k: usize) -> Result<MotifOutputs> {
    let census = enumerate_ffl(g);
    let nodes_csv = csv_table(
        &["id", "score"],
        census.per_node_score.iter().map(|(id, s)| vec![id.clone(), s.to_string()]),
    )?;
    let edges_csv = csv_table(
        &["src", "dst", "score"],
        structural_hierarchy(g, top_k)
            .into_iter()
            .map(|e| vec![e.src, e.dst, e.ffl_participation.to_string()]),
    )?;
    let mut attack_order = motif_attack_order(g).join("\n");
    attack_order.push('\n');
    Ok(MotifOutputs {
        ffl_count: census.ffl_count,
        nodes_csv,
        edges_csv,
        attack_order,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CascadeSummary {
    pub target: Vec<String>,
    pub beta: f64,
    pub r_recover: f64,
    pub total_damage: usize,
    pub first_wave_fraction: f64,
    pub e_failed: usize,
    pub e_initial: usize,
    pub overload_rounds: usize,
    pub od_pairs: usize,
    pub exhaustive_od: bool,
    pub od_seed: u64,
}

pub fn cascade_summary(state: &CascadeState, loads: &LoadModel) -> CascadeSummary {
    CascadeSummary {
        target: state.failed_nodes.clone(),
        beta: state.beta,
        r_recover: state.r_recover,
        total_damage: state.total_damage,
        first_wave_fraction: state.first_wave_fraction,
        e_failed: state.e_failed,
        e_initial: state.e_initial,
        overload_rounds: state.rounds.len(),
        od_pairs: loads.od_pairs.len(),
        exhaustive_od: loads.exhaustive,
        od_seed: loads.seed,
    }
}

pub fn rounds_csv(state: &CascadeState) -> Result<String> {
    csv_table(
        &["round", "edges_failed"],
        std::iter::once(vec!["0".into(), state.initial_edges.len().to_string()]).chain(
            state
                .rounds
                .iter()
                .enumerate()
                .map(|(i, r)| vec![(i + 1).to_string(), r.len().to_string()]),
        ),
    )
}

pub fn loads_for(g: &MultilayerGraph, cfg: &RunConfig) -> Result<LoadModel> {
    Ok(estimate_loads(g, cfg.od_samples, cfg.seed, cfg.exhaustive_od)?)
}

pub fn beta_sweep_csv(g: &MultilayerGraph, loads: &LoadModel, betas: &[f64], target: &str) -> Result<String> {
    let sweep = beta_sweep(g, loads, betas, target)?;
    csv_table(
        &["beta", "total_damage"],
        sweep.into_iter().map(|(b, d)| vec![num(b), d.to_string()]),
    )
}

pub fn shock_sweep_csv(g: &MultilayerGraph, loads: &LoadModel, beta: f64, ks: &[usize]) -> Result<String> {
    let ks: Vec<usize> = ks.iter().copied().filter(|&k| k <= g.node_count()).collect();
    let sweep = shock_sweep(g, loads, beta, &ks)?;
    csv_table(
        &["k", "total_damage"],
        sweep.into_iter().map(|(k, d)| vec![k.to_string(), d.to_string()]),
    )
}

pub fn recoverability_csv(profile: &BTreeMap<String, f64>) -> Result<String> {
    csv_table(
        &["id", "r_recover"],
        profile.iter().map(|(id, r)| vec![id.clone(), num(*r)]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullMetric {
    Efficiency,
    GeoEfficiency,
    RbRandom,
    RbDegree,
}

impl NullMetric {
    pub const ALL: [NullMetric; 4] = [
        NullMetric::Efficiency,
        NullMetric::GeoEfficiency,
        NullMetric::RbRandom,
        NullMetric::RbDegree,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "efficiency" => NullMetric::Efficiency,
            "geo-efficiency" => NullMetric::GeoEfficiency,
            "rb-random" => NullMetric::RbRandom,
            "rb-degree" => NullMetric::RbDegree,
            other => return Err(InputError(format!("unknown null-model metric `{other}`")).into()),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            NullMetric::Efficiency => "efficiency",
            NullMetric::GeoEfficiency => "geo-efficiency",
            NullMetric::RbRandom => "rb-random",
            NullMetric::RbDegree => "rb-degree",
        }
    }

    fn eval(self, g: &MultilayerGraph, seed: u64, repeats: usize) -> resilience_core::Result<f64> {
        match self {
            NullMetric::Efficiency => Ok(global_efficiency(g)),
            NullMetric::GeoEfficiency => Ok(geospatial_efficiency(g)),
            NullMetric::RbRandom => {
                degradation_curve_with(g, &AttackStrategy::random(seed), repeats, AreaRule::Riemann).map(|c| c.r_b)
            }
            NullMetric::RbDegree => degradation_curve_with(
                g,
                &AttackStrategy::targeted(AttackKind::DegreeTargeted),
                1,
                AreaRule::Riemann,
            )
            .map(|c| c.r_b),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NullModelReport {
    pub metric: String,
    pub x_real: f64,
    pub mu: f64,
    pub sigma: f64,
    /// `None` when the ensemble has zero spread.
    pub z: Option<f64>,
    pub replicas: usize,
    pub seed: u64,
}

pub fn null_model(g: &MultilayerGraph, metric: NullMetric, replicas: usize, seed: u64, repeats: usize) -> Result<NullModelReport> {
    let x_real = metric.eval(g, seed, repeats)?;
    let e = ensemble(g, metric.name(), |h| metric.eval(h, seed, repeats), replicas, seed)?;
    let z = match z_score(x_real, &e) {
        Ok(z) => Some(z),
        Err(err) if err.is_numerical() => None,
        Err(err) => return Err(err.into()),
    };
    Ok(NullModelReport {
        metric: metric.name().into(),
        x_real,
        mu: e.mu_rand,
        sigma: e.sigma_rand,
        z,
        replicas,
        seed,
    })
}

/// Correlations among degree, betweenness, motif score and `R_recover`.
pub fn correlation(g: &MultilayerGraph, recoverability: &BTreeMap<String, f64>) -> Result<CorrelationMatrix> {
    let metrics = [
        NodeMetricVector::from_indexed(g, "degree", &degree(g)),
        NodeMetricVector::from_indexed(g, "betweenness", &betweenness_values(g)),
        NodeMetricVector::from_indexed(g, "motif_score", &motif_scores(g)),
    ];
    Ok(static_vs_dynamic_report(recoverability, &metrics)?)
}

pub fn pareto_csv(points: &[ParetoPoint]) -> Result<String> {
    csv_table(
        &["d_imt", "imt_edges", "rb_random", "rb_targeted", "rl_750"],
        points.iter().map(|p| {
            vec![
                num(p.d_imt),
                p.imt_edges.to_string(),
                num(p.rb_random),
                num(p.rb_targeted),
                num(p.rl_750),
            ]
        }),
    )
}

pub fn pareto(base: &MultilayerGraph, d_imts: &[f64], cfg: &RunConfig) -> Result<Vec<ParetoPoint>> {
    let opts = ParetoOptions {
        repeats: cfg.repeats,
        seed: cfg.seed,
        ..ParetoOptions::default()
    };
    Ok(pareto_sweep(base, d_imts, opts)?)
}

/// One row of the cumulative integration table.
#[derive(Debug, Clone, Serialize)]
pub struct StepRow {
    pub d_imt: f64,
    pub step: usize,
    pub modes: String,
    pub summary: NetworkSummary,
    pub z_efficiency: Option<f64>,
    pub z_efficiency_geo: Option<f64>,
    /// `(d_max, symmetric R_l)`.
    pub relocation: Vec<(f64, f64)>,
}

/// Builds the network cumulatively (metro, then bus, ferry, railway) at each
/// configured transfer threshold and summarizes every step. Steps whose
/// modes have no stations are skipped.
pub fn stepwise_integration(cfg: &RunConfig, base: &MultilayerGraph) -> Result<Vec<StepRow>> {
    let order = [Mode::Metro, Mode::Bus, Mode::Ferry, Mode::Railway];
    let mut rows = Vec::new();
    for &d in &cfg.stepwise_d_imt {
        for step in 1..=order.len() {
            let modes = &order[..step];
            let sub = base.restrict_modes(modes);
            if sub.is_empty() {
                continue;
            }
            let g = add_transfer_edges(&sub, d)?.graph;
            let summary = summarize(&g)?;
            let z_efficiency = null_model(&g, NullMetric::Efficiency, cfg.replicas, cfg.seed, cfg.repeats)?.z;
            let z_efficiency_geo = null_model(&g, NullMetric::GeoEfficiency, cfg.replicas, cfg.seed, cfg.repeats)?.z;
            let relocation = cfg
                .d_max
                .iter()
                .map(|&dm| Ok((dm, relocation_rate(&g, dm, RelocationModel::Symmetric, None)?.network_rl)))
                .collect::<Result<Vec<_>>>()?;
            rows.push(StepRow {
                d_imt: d,
                step,
                modes: modes.iter().map(|m| m.as_str()).collect::<Vec<_>>().join("+"),
                summary,
                z_efficiency,
                z_efficiency_geo,
                relocation,
            });
        }
    }
    Ok(rows)
}

pub fn stepwise_csv(rows: &[StepRow], d_max: &[f64]) -> Result<String> {
    let mut header: Vec<String> = [
        "d_imt", "step", "modes", "n_nodes", "n_edges", "imt_edges", "avg_out_degree", "s0", "l_max",
        "avg_path_len", "efficiency", "z_efficiency", "efficiency_geo", "z_efficiency_geo", "avg_edge_len_m",
        "std_edge_len_m", "gini_nd", "gini_bc",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(d_max.iter().map(|d| format!("rl_{d}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_table(
        &header_refs,
        rows.iter().map(|r| {
            let s = &r.summary;
            let mut row = vec![
                num(r.d_imt),
                r.step.to_string(),
                r.modes.clone(),
                s.n_nodes.to_string(),
                s.n_edges.to_string(),
                s.n_imt_edges.to_string(),
                num(s.avg_out_degree),
                num(s.s0),
                s.diameter_l_max.map(|l| l.to_string()).unwrap_or_default(),
                opt(s.avg_path_len),
                num(s.efficiency_e),
                opt(r.z_efficiency),
                num(s.efficiency_geo),
                opt(r.z_efficiency_geo),
                num(s.avg_edge_len_m),
                num(s.std_edge_len_m),
                opt(s.gini_nd),
                opt(s.gini_bc),
            ];
            row.extend(r.relocation.iter().map(|&(_, v)| num(v)));
            row
        }),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub stage: String,
    pub seed: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<ArtifactEntry>,
}

struct Bundle<'a> {
    dir: &'a Path,
    seed: u64,
    entries: Vec<ArtifactEntry>,
}

impl Bundle<'_> {
    fn put(&mut self, stage: &str, name: &str, contents: &str) -> Result<()> {
        write_file(self.dir, name, contents)?;
        self.entries.push(ArtifactEntry {
            name: name.into(),
            stage: stage.into(),
            seed: self.seed,
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().with_context(|| format!("stage `{name}` failed"))
}

/// Runs every analysis on the configured network and writes the artifacts
/// plus `manifest.json` to the output directory. Artifacts from completed
/// stages are kept when a later stage fails.
pub fn run_all(cfg: &RunConfig, cache: Option<&Path>) -> Result<Manifest> {
    cfg.validate()?;
    let config_hash = cfg.hash()?;
    let mut out = Bundle {
        dir: &cfg.output_dir,
        seed: cfg.seed,
        entries: Vec::new(),
    };

    let g = stage("build", || {
        let g = load_graph(cfg, cache)?;
        let mut c = cfg.clone();
        c.output_dir = PathBuf::new();
        out.put("build", "config.json", &to_json(&c)?)?;
        out.put("build", "graph.graphml", &to_graphml(&g))?;
        Ok(g)
    })?;
    let base = g.without_transfer_edges();

    stage("metrics", || {
        out.put("metrics", "summary.json", &to_json(&summarize(&g)?)?)?;
        out.put("metrics", "node_metrics.csv", &node_metrics_csv(&g)?)
    })?;

    stage("attack", || {
        let strategies = STRATEGIES
            .iter()
            .map(|s| strategy_by_name(s, cfg.seed, false))
            .collect::<Result<Vec<_>>>()?;
        let (curves, summary) = attack_outputs(&g, &strategies, cfg.repeats, AreaRule::Riemann)?;
        out.put("attack", "attack_curves.csv", &curves)?;
        out.put("attack", "attack_summary.json", &summary)
    })?;

    stage("relocate", || {
        let (nodes, agg) = relocation_outputs(&g, &cfg.d_max, &[RelocationModel::Symmetric, RelocationModel::Asymmetric])?;
        out.put("relocate", "relocation_nodes.csv", &nodes)?;
        out.put("relocate", "relocation_summary.json", &to_json(&agg)?)
    })?;

    stage("motifs", || {
        let m = motif_outputs(&g, g.edge_count())?;
        out.put("motifs", "motif_nodes.csv", &m.nodes_csv)?;
        out.put("motifs", "motif_edges.csv", &m.edges_csv)?;
        out.put("motifs", "motif_attack_order.txt", &m.attack_order)
    })?;

    let recoverability = stage("cascade", || {
        let loads = loads_for(&g, cfg)?;
        let hub = loads
            .max_load_node(&g)
            .ok_or_else(|| InputError("cascade needs a non-empty network".into()))?;
        let state = run_cascade_indices(&g, &loads, cfg.cascade_beta, &[hub], CascadeOptions::default())?;
        out.put("cascade", "cascade_summary.json", &to_json(&cascade_summary(&state, &loads))?)?;
        out.put("cascade", "cascade_rounds.csv", &rounds_csv(&state)?)?;
        out.put("cascade", "cascade_beta_sweep.csv", &beta_sweep_csv(&g, &loads, &cfg.betas, g.id(hub))?)?;
        out.put(
            "cascade",
            "cascade_shock_sweep.csv",
            &shock_sweep_csv(&g, &loads, cfg.cascade_beta, &cfg.shock_sizes)?,
        )?;
        let profile = recoverability_profile(&g, &loads, cfg.cascade_beta)?;
        out.put("cascade", "recoverability.csv", &recoverability_csv(&profile)?)?;
        Ok(profile)
    })?;

    stage("nullmodel", || {
        let reports = NullMetric::ALL
            .iter()
            .map(|&m| null_model(&g, m, cfg.replicas, cfg.seed, cfg.repeats))
            .collect::<Result<Vec<_>>>()?;
        out.put("nullmodel", "nullmodel.json", &to_json(&reports)?)
    })?;

    stage("correlate", || {
        out.put("correlate", "correlation.csv", &correlation(&g, &recoverability)?.to_csv())
    })?;

    stage("pareto", || {
        out.put("pareto", "pareto.csv", &pareto_csv(&pareto(&base, &cfg.pareto_d_imt, cfg)?)?)
    })?;

    stage("stepwise", || {
        let rows = stepwise_integration(cfg, &base)?;
        out.put("stepwise", "stepwise.csv", &stepwise_csv(&rows, &cfg.d_max)?)
    })?;

    let manifest = Manifest {
        config_hash,
        seed: cfg.seed,
        artifacts: out.entries,
    };
    write_file(&cfg.output_dir, "manifest.json", &to_json(&manifest)?)?;
    Ok(manifest)
}
