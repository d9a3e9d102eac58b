use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use resilience_core::cascade::{recoverability_profile, run_cascade_indices, CascadeOptions};
use resilience_core::io::{to_graphml, write_routes, write_stations};
use resilience_core::metrics::summarize;
use resilience_core::resilience::{AreaRule, RelocationModel};
use resilience_core::synth::generate_city;
use resilience_core::theory::{fit, sensitivity, solve_optimal_d, Parameter, UtilityParams};
use resilience_cli::config::RunConfig;
use resilience_cli::pipeline::{self, csv_table, to_json, write_file, NullMetric};
use resilience_cli::{exit_code, InputError};
use serde_json::json;

#[derive(Parser)]
#[command(name = "mptn", version, about = "Resilience analysis of multimodal public transport networks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for cached GraphML builds.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    #[arg(long, global = true)]
    stations: Option<PathBuf>,
    #[arg(long, global = true)]
    routes: Option<PathBuf>,
    /// Transfer distance threshold in metres.
    #[arg(long = "d-imt", global = true)]
    d_imt: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic city as stations.csv and routes.csv.
    Generate {
        #[arg(long, default_value_t = 20)]
        n_metro: usize,
        #[arg(long, default_value_t = 200)]
        n_bus: usize,
        #[arg(long, default_value_t = 3)]
        n_ferry: usize,
        #[arg(long, default_value_t = 3)]
        n_rail: usize,
        #[arg(long, default_value_t = 20.0)]
        area_km: f64,
    },
    /// Build the integrated graph and write it as GraphML.
    Build,
    /// Network summary (JSON on stdout) and per-node metrics CSV.
    Metrics,
    /// Degradation curves under node removal.
    Attack {
        /// random, degree, betweenness, motif or all.
        #[arg(long, default_value = "all")]
        strategy: String,
        #[arg(long)]
        adaptive: bool,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long, default_value = "riemann")]
        area_rule: String,
    },
    /// Relocation rates per node and network-wide.
    Relocate {
        #[arg(long = "dmax", value_delimiter = ',')]
        d_max: Vec<f64>,
        #[arg(long, default_value = "symmetric")]
        model: String,
    },
    /// Feed-forward loop census.
    Motifs {
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Load-capacity cascade simulation.
    Cascade {
        #[arg(long)]
        beta: Option<f64>,
        /// Seed station id (default: highest-throughput station).
        #[arg(long, conflicts_with = "all_nodes")]
        target: Option<String>,
        /// Recoverability of every station.
        #[arg(long)]
        all_nodes: bool,
        #[arg(long)]
        od_samples: Option<usize>,
        #[arg(long)]
        exhaustive: bool,
        #[arg(long)]
        latent_demand: bool,
        /// `start:stop:step`
        #[arg(long)]
        beta_sweep: Option<String>,
        #[arg(long, value_delimiter = ',')]
        shock_sweep: Vec<usize>,
    },
    /// Z-score of a network metric against an Erdős–Rényi ensemble.
    Nullmodel {
        /// efficiency, geo-efficiency, rb-random or rb-degree.
        #[arg(long, default_value = "efficiency")]
        metric: String,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Correlation of static node metrics with cascade recoverability.
    Correlate {
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Optimal integration distance of the utility model.
    Optimize {
        #[arg(long)]
        bmax: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        k: f64,
        /// Also report the direction of d* when this parameter grows.
        #[arg(long)]
        perturb: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
    /// Heuristic fit of utility parameters to a pareto.csv sweep.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Distance scale: d = d_imt / scale.
        #[arg(long, default_value_t = 100.0)]
        scale: f64,
    },
    /// Robustness and relocation across transfer thresholds.
    Pareto {
        #[arg(long = "dimt", value_delimiter = ',')]
        d_imt: Vec<f64>,
    },
    /// Cumulative integration table (metro, +bus, +ferry, +railway).
    Stepwise,
    /// Every analysis plus a manifest.
    RunAll,
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_toml_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(p) = &c.stations {
        cfg.stations = Some(p.clone());
    }
    if let Some(p) = &c.routes {
        cfg.routes = Some(p.clone());
    }
    if let Some(d) = c.d_imt {
        cfg.d_imt = d;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || InputError(format!("expected start:stop:step, got `{s}`"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let [a, b, step] = parts[..] else {
        return Err(bad().into());
    };
    if !(step > 0.0 && b >= a) {
        return Err(bad().into());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + step * i as f64).collect())
}

fn print(s: &str) {
    print!("{s}");
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.common)?;
    if let Some(t) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cache = cli.common.cache.as_deref();
    let dir: &Path = &cfg.output_dir.clone();

    match cli.command {
        Command::Generate {
            n_metro,
            n_bus,
            n_ferry,
            n_rail,
            area_km,
        } => {
            cfg.city.n_metro = n_metro;
            cfg.city.n_bus = n_bus;
            cfg.city.n_ferry = n_ferry;
            cfg.city.n_rail = n_rail;
            cfg.city.area_km = area_km;
            if let Some(s) = cli.common.seed {
                cfg.city.seed = s;
            }
            let (stations, routes) = generate_city(&cfg.city)?;
            fs::create_dir_all(dir)?;
            let sp = dir.join("stations.csv");
            let rp = dir.join("routes.csv");
            write_stations(fs::File::create(&sp)?, &stations)?;
            write_routes(fs::File::create(&rp)?, &routes)?;
            print(&to_json(&json!({
                "stations": sp, "routes": rp,
                "n_stations": stations.len(), "n_routes": routes.len(),
            }))?);
        }
        Command::Build => {
            cfg.validate()?;
            let g = pipeline::load_graph(&cfg, cache)?;
            write_file(dir, "graph.graphml", &to_graphml(&g))?;
            print(&to_json(&json!({
                "n_nodes": g.node_count(),
                "n_edges": g.edge_count(),
                "transfer_edges": g.transfer_edge_count(),
                "d_imt": cfg.d_imt,
            }))?);
        }
        Command::Metrics => {
            let g = pipeline::load_graph(&cfg, cache)?;
            write_file(dir, "node_metrics.csv", &pipeline::node_metrics_csv(&g)?)?;
            print(&to_json(&summarize(&g)?)?);
        }
        Command::Attack {
            strategy,
            adaptive,
            repeats,
            area_rule,
        } => {
            let g = pipeline::load_graph(&cfg, cache)?;
            let names: Vec<&str> = if strategy == "all" {
                pipeline::STRATEGIES.to_vec()
            } else {
                vec![strategy.as_str()]
            };
            let strategies = names
                .iter()
                .map(|n| pipeline::strategy_by_name(n, cfg.seed, adaptive))
                .collect::<Result<Vec<_>>>()?;
            let rule: AreaRule = area_rule.parse()?;
            let (curves, summary) = pipeline::attack_outputs(&g, &strategies, repeats.unwrap_or(cfg.repeats), rule)?;
            write_file(dir, "attack_curves.csv", &curves)?;
            write_file(dir, "attack_summary.json", &summary)?;
            print(&summary);
        }
        Command::Relocate { d_max, model } => {
            let g = pipeline::load_graph(&cfg, cache)?;
            let d_max = if d_max.is_empty() { cfg.d_max.clone() } else { d_max };
            let models = match model.as_str() {
                "both" => vec![RelocationModel::Symmetric, RelocationModel::Asymmetric],
                m => vec![m.parse::<RelocationModel>()?],
            };
            let (nodes, agg) = pipeline::relocation_outputs(&g, &d_max, &models)?;
            write_file(dir, "relocation_nodes.csv", &nodes)?;
            print(&to_json(&agg)?);
        }
        Command::Motifs { top_k } => {
            let g = pipeline::load_graph(&cfg, cache)?;
            let m = pipeline::motif_outputs(&g, top_k.unwrap_or(g.edge_count()))?;
            write_file(dir, "motif_nodes.csv", &m.nodes_csv)?;
            write_file(dir, "motif_edges.csv", &m.edges_csv)?;
            write_file(dir, "motif_attack_order.txt", &m.attack_order)?;
            print(&to_json(&json!({ "ffl_count": m.ffl_count }))?);
        }
        Command::Cascade {
            beta,
            target,
            all_nodes,
            od_samples,
            exhaustive,
            latent_demand,
            beta_sweep,
            shock_sweep,
        } => {
            if let Some(n) = od_samples {
                cfg.od_samples = n;
            }
            cfg.exhaustive_od |= exhaustive;
            let beta = beta.unwrap_or(cfg.cascade_beta);
            cfg.validate()?;
            let g = pipeline::load_graph(&cfg, cache)?;
            let loads = pipeline::loads_for(&g, &cfg)?;
            if all_nodes {
                let profile = recoverability_profile(&g, &loads, beta)?;
                write_file(dir, "recoverability.csv", &pipeline::recoverability_csv(&profile)?)?;
            }
            let seed_node = match &target {
                Some(id) => g
                    .index_of(id)
                    .ok_or_else(|| InputError(format!("unknown station `{id}`")))?,
                None => loads
                    .max_load_node(&g)
                    .ok_or_else(|| InputError("empty network".into()))?,
            };
            let state = run_cascade_indices(&g, &loads, beta, &[seed_node], CascadeOptions { latent_demand })?;
            write_file(dir, "cascade_rounds.csv", &pipeline::rounds_csv(&state)?)?;
            if let Some(r) = beta_sweep {
                let betas = parse_range(&r)?;
                write_file(dir, "cascade_beta_sweep.csv", &pipeline::beta_sweep_csv(&g, &loads, &betas, g.id(seed_node))?)?;
            }
            if !shock_sweep.is_empty() {
                write_file(dir, "cascade_shock_sweep.csv", &pipeline::shock_sweep_csv(&g, &loads, beta, &shock_sweep)?)?;
            }
            let summary = to_json(&pipeline::cascade_summary(&state, &loads))?;
            write_file(dir, "cascade_summary.json", &summary)?;
            print(&summary);
        }
        Command::Nullmodel { metric, replicas } => {
            let g = pipeline::load_graph(&cfg, cache)?;
            let m = NullMetric::parse(&metric)?;
            let r = pipeline::null_model(&g, m, replicas.unwrap_or(cfg.replicas), cfg.seed, cfg.repeats)?;
            print(&to_json(&r)?);
        }
        Command::Correlate { beta } => {
            let g = pipeline::load_graph(&cfg, cache)?;
            let loads = pipeline::loads_for(&g, &cfg)?;
            let profile = recoverability_profile(&g, &loads, beta.unwrap_or(cfg.cascade_beta))?;
            let csv = pipeline::correlation(&g, &profile)?.to_csv();
            write_file(dir, "correlation.csv", &csv)?;
            print(&csv);
        }
        Command::Optimize {
            bmax,
            alpha,
            beta,
            k,
            perturb,
            delta,
        } => {
            let p = UtilityParams::new(bmax, alpha, beta, k)?;
            let o = solve_optimal_d(&p)?;
            let mut report = json!({
                "d_star": o.d_star,
                "residual": o.residual,
                "concave": o.concave,
                "boundary": o.boundary,
                "second_derivative": o.second_derivative,
            });
            if let Some(name) = perturb {
                let param: Parameter = name.parse()?;
                report["sensitivity"] = serde_json::to_value(sensitivity(&p, param, delta)?)?;
            }
            print(&to_json(&report)?);
        }
        Command::Fit { input, scale } => {
            let mut rdr = csv::Reader::from_path(&input)
                .map_err(|e| InputError(format!("cannot read `{}`: {e}", input.display())))?;
            let mut benefit = Vec::new();
            let mut risk = Vec::new();
            let headers = rdr.headers()?.clone();
            let col = |name: &str| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| InputError(format!("`{}` has no `{name}` column", input.display())))
            };
            let (cd, cr, ct) = (col("d_imt")?, col("rb_random")?, col("rb_targeted")?);
            let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
            let value = |r: &csv::StringRecord, i: usize| -> Result<f64> {
                r[i].parse::<f64>()
                    .map_err(|_| InputError(format!("bad number `{}`", &r[i])).into())
            };
            let first = rows.first().ok_or_else(|| InputError("empty sweep".into()))?;
            let (rb0, rt0) = (value(first, cr)?, value(first, ct)?);
            for r in &rows {
                let d = value(r, cd)? / scale;
                // Benefit: random-failure robustness gained; risk: targeted robustness lost.
                benefit.push((d, value(r, cr)? - rb0));
                risk.push((d, (1.0 - value(r, ct)?) - (1.0 - rt0)));
            }
            let p = fit(&benefit, &risk)?;
            let o = solve_optimal_d(&p)?;
            print(&to_json(&json!({
                "heuristic": true,
                "params": p,
                "d_star": o.d_star,
                "d_star_m": o.d_star * scale,
            }))?);
        }
        Command::Pareto { d_imt } => {
            cfg.validate()?;
            let base = pipeline::load_base_graph(&cfg)?;
            let d_imt = if d_imt.is_empty() { cfg.pareto_d_imt.clone() } else { d_imt };
            let csv = pipeline::pareto_csv(&pipeline::pareto(&base, &d_imt, &cfg)?)?;
            write_file(dir, "pareto.csv", &csv)?;
            print(&csv);
        }
        Command::Stepwise => {
            cfg.validate()?;
            let base = pipeline::load_base_graph(&cfg)?;
            let rows = pipeline::stepwise_integration(&cfg, &base)?;
            let csv = pipeline::stepwise_csv(&rows, &cfg.d_max)?;
            write_file(dir, "stepwise.csv", &csv)?;
            print(&csv);
        }
        Command::RunAll => {
            let m = resilience_cli::run_all(&cfg, cache)?;
            let bytes = to_json(&m)?;
            print(&csv_table(
                &["artifacts", "manifest_sha256"],
                [vec![
                    m.artifacts.len().to_string(),
                    hex_digest(bytes.as_bytes()),
                ]],
            )?);
        }
    }
    Ok(())
}

fn hex_digest(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
