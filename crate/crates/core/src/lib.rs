//! Multilayer public transport network analysis.
//!
//! Stations of several transport modes form a directed graph whose edges
//! follow route sequences, plus walking transfers between nearby stations of
//! different modes. On top of that graph the crate measures structure,
//! robustness to node removal, passenger relocation, feed-forward loop
//! motifs, load-capacity cascades, null-model significance, and a net-utility
//! model of how far transfers should reach.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod error;
pub mod geo;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod motifs;
pub mod resilience;
pub mod stats;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
pub use geo::{haversine, LatLon};
pub use graph::{add_transfer_edges, build_graph, Edge, EdgeKind, Mode, MultilayerGraph, Route, Station};
