//! Erdős–Rényi null models, Z-scores and Pearson correlation.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::haversine;
use crate::graph::{Edge, EdgeKind, MultilayerGraph};
use crate::metrics::NodeMetricVector;

pub const DEFAULT_REPLICAS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModelEnsemble {
    pub metric_name: String,
    pub mu_rand: f64,
    /// Sample standard deviation over replicas.
    pub sigma_rand: f64,
    pub replicas: usize,
    pub seed: u64,
}

impl NullModelEnsemble {
    pub fn from_values(metric_name: &str, values: &[f64], seed: u64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::input("an ensemble needs at least two replicas"));
        }
        let (mu, sigma) = mean_std(values);
        Ok(NullModelEnsemble {
            metric_name: metric_name.to_owned(),
            mu_rand: mu,
            sigma_rand: sigma,
            replicas: values.len(),
            seed,
        })
    }
}

/// Two-pass mean and sample standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (ss, comp) = values.iter().fold((0.0, 0.0), |(ss, c), &x| {
        let d = x - mean;
        (ss + d * d, c + d)
    });
    let var = (ss - comp * comp / n) / (n - 1.0);
    (mean, var.max(0.0).sqrt())
}

/// Random graph on the same stations with the same number of directed
/// edges, drawn uniformly without replacement from all ordered pairs.
pub fn random_replica(g: &MultilayerGraph, seed: u64) -> Result<MultilayerGraph> {
    let n = g.node_count();
    let pairs = n * n.saturating_sub(1);
    let m = g.edge_count();
    if m > pairs {
        return Err(Error::input("more edges than ordered node pairs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, pairs, m).into_vec();
    picks.sort_unstable();
    let stations = g.stations();
    let edges = picks
        .into_iter()
        .map(|p| {
            let u = p / (n - 1);
            let mut v = p % (n - 1);
            if v >= u {
                v += 1;
            }
            let (a, b) = (&stations[u], &stations[v]);
            Edge {
                src: a.id.clone(),
                dst: b.id.clone(),
                kind: if a.mode == b.mode {
                    EdgeKind::IntraModal
                } else {
                    EdgeKind::InterModal
                },
                length_m: haversine(a.position(), b.position()),
            }
        })
        .collect();
    MultilayerGraph::new(stations.to_vec(), edges, g.d_imt())
}

/// Evaluates `metric` on `replicas` null-model graphs. Replica `i` uses a
/// seed derived from `seed` and `i`, so results do not depend on scheduling.
pub fn ensemble<F>(g: &MultilayerGraph, metric_name: &str, metric: F, replicas: usize, seed: u64) -> Result<NullModelEnsemble>
where
    F: Fn(&MultilayerGraph) -> Result<f64> + Sync,
{
    let values = ensemble_values(g, metric, replicas, seed)?;
    NullModelEnsemble::from_values(metric_name, &values, seed)
}

pub fn ensemble_values<F>(g: &MultilayerGraph, metric: F, replicas: usize, seed: u64) -> Result<Vec<f64>>
where
    F: Fn(&MultilayerGraph) -> Result<f64> + Sync,
{
    if replicas < 2 {
        return Err(Error::input("an ensemble needs at least two replicas"));
    }
    (0..replicas)
        .into_par_iter()
        .map(|i| random_replica(g, replica_seed(seed, i)).and_then(|r| metric(&r)))
        .collect()
}

fn replica_seed(seed: u64, i: usize) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn z_score(x_real: f64, ensemble: &NullModelEnsemble) -> Result<f64> {
    if !(ensemble.sigma_rand > 0.0) {
        return Err(Error::Numerical(format!(
            "degenerate ensemble for `{}`: sigma is zero",
            ensemble.metric_name
        )));
    }
    Ok((x_real - ensemble.mu_rand) / ensemble.sigma_rand)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::input("pearson needs equal-length inputs"));
    }
    if xs.len() < 3 {
        return Err(Error::input("pearson needs at least three points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::undefined("correlation with a constant vector"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[i][j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.values) {
            out.push_str(l);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise Pearson correlations among the given static metrics and
/// `R_recover`, over the nodes present in every input.
pub fn static_vs_dynamic_report(
    recoverability: &BTreeMap<String, f64>,
    metrics: &[NodeMetricVector],
) -> Result<CorrelationMatrix> {
    for m in metrics {
        if let Some(id) = m.values.keys().find(|id| !recoverability.contains_key(*id)) {
            return Err(Error::input(format!(
                "recoverability has no value for `{id}` from metric `{}`",
                m.metric_name
            )));
        }
    }
    let ids: Vec<&String> = recoverability
        .keys()
        .filter(|id| metrics.iter().all(|m| m.values.contains_key(*id)))
        .collect();
    let mut labels: Vec<String> = metrics.iter().map(|m| m.metric_name.clone()).collect();
    labels.push("r_recover".into());
    let mut columns: Vec<Vec<f64>> = metrics
        .iter()
        .map(|m| ids.iter().map(|id| m.values[*id]).collect())
        .collect();
    columns.push(ids.iter().map(|id| recoverability[*id]).collect());

    let k = columns.len();
    let mut values = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let r = pearson(&columns[i], &columns[j])?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { labels, values })
}
