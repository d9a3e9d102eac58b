//! Feed-forward loop census and the rankings derived from it.
//!
//! A feed-forward loop is an ordered triple of distinct nodes `(a, b, c)`
//! with edges `a→b`, `b→c` and `a→c`. Every triple is found exactly once by
//! walking the closing edge `a→c` and intersecting `out(a)` with `in(c)`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::MultilayerGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifCensus {
    pub ffl_count: u64,
    /// Participation count per station id.
    pub per_node_score: BTreeMap<String, u64>,
    /// Participation count per `(src, dst)` edge; edges in no loop are omitted.
    pub per_edge_score: BTreeMap<(String, String), u64>,
}

/// Raw census over live nodes, indexed by node and edge position.
pub(crate) struct RawCensus {
    pub count: u64,
    pub node: Vec<u64>,
    pub edge: Vec<u64>,
}

/// Nodes `(a, b, c)` and edges `(a→b, b→c, a→c)` of one loop.
type Loop = (usize, usize, usize, usize, usize, usize);

pub(crate) fn count_ffl(g: &MultilayerGraph, alive: Option<&[bool]>) -> RawCensus {
    let live = |i: usize| alive.is_none_or(|a| a[i]);
    let chunks: Vec<Vec<Loop>> = (0..g.edge_count())
        .collect::<Vec<_>>()
        .par_chunks(256)
        .map(|chunk| {
            let mut found = Vec::new();
            for &ac in chunk {
                let (a, c) = g.endpoints(ac);
                if !live(a) || !live(c) {
                    continue;
                }
                // Merge-intersect out(a) and in(c), both sorted by neighbor.
                let (outs, ins) = (g.out_edges(a), g.in_edges(c));
                let (mut i, mut j) = (0, 0);
                while i < outs.len() && j < ins.len() {
                    let (b1, ab) = outs[i];
                    let (b2, bc) = ins[j];
                    match b1.cmp(&b2) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            if b1 != a && b1 != c && live(b1) {
                                found.push((a, b1, c, ab, bc, ac));
                            }
                            i += 1;
                            j += 1;
                        }
                    }
                }
            }
            found
        })
        .collect();

    let mut raw = RawCensus {
        count: 0,
        node: vec![0; g.node_count()],
        edge: vec![0; g.edge_count()],
    };
    for (a, b, c, ab, bc, ac) in chunks.into_iter().flatten() {
        raw.count += 1;
        for v in [a, b, c] {
            raw.node[v] += 1;
        }
        for e in [ab, bc, ac] {
            raw.edge[e] += 1;
        }
    }
    raw
}

pub fn enumerate_ffl(g: &MultilayerGraph) -> MotifCensus {
    let raw = count_ffl(g, None);
    MotifCensus {
        ffl_count: raw.count,
        per_node_score: g
            .stations()
            .iter()
            .zip(&raw.node)
            .map(|(s, &c)| (s.id.clone(), c))
            .collect(),
        per_edge_score: g
            .edges()
            .iter()
            .zip(&raw.edge)
            .filter(|(_, &c)| c > 0)
            .map(|(e, &c)| ((e.src.clone(), e.dst.clone()), c))
            .collect(),
    }
}

/// Motif importance score per node index.
pub fn motif_scores(g: &MultilayerGraph) -> Vec<f64> {
    count_ffl(g, None).node.into_iter().map(|c| c as f64).collect()
}

/// All stations by descending motif score, ties in id order.
pub fn motif_attack_order(g: &MultilayerGraph) -> Vec<String> {
    let scores = count_ffl(g, None).node;
    let mut order: Vec<usize> = (0..g.node_count()).collect();
    order.sort_by(|&x, &y| scores[y].cmp(&scores[x]).then(x.cmp(&y)));
    order.into_iter().map(|i| g.id(i).to_owned()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEdge {
    pub src: String,
    pub dst: String,
    pub ffl_participation: u64,
}

/// Edges ranked by loop participation (descending, then by `(src, dst)`),
/// truncated to `top_k`. Edges in no loop are not ranked.
pub fn structural_hierarchy(g: &MultilayerGraph, top_k: usize) -> Vec<RankedEdge> {
    let raw = count_ffl(g, None);
    let mut ranked: Vec<RankedEdge> = g
        .edges()
        .iter()
        .zip(raw.edge)
        .filter(|(_, c)| *c > 0)
        .map(|(e, c)| RankedEdge {
            src: e.src.clone(),
            dst: e.dst.clone(),
            ffl_participation: c,
        })
        .collect();
    ranked.sort_by(|x, y| {
        y.ffl_participation
            .cmp(&x.ffl_participation)
            .then_with(|| (&x.src, &x.dst).cmp(&(&y.src, &y.dst)))
    });
    ranked.truncate(top_k);
    ranked
}
