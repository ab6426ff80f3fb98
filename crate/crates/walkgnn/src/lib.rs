//! Graph classification on learned substructures.
//!
//! The crate trains two coupled models per task: a sampling model that
//! learns, via Q-learning, to grow an informative substructure (a connected
//! subgraph or a walk) inside each input graph, and an output model that
//! classifies the graph from that substructure alone. Extraction of the
//! substructure doubles as an explanation of the prediction.
//!
//! Start with the runnable programs under `examples/`; each one exercises a
//! single capability end to end.

pub mod agent;
pub mod bench;
pub mod cli;
pub mod config;
pub mod data;
pub mod env;
pub mod error;
pub mod graph;
pub mod nn;
pub mod pipeline;
pub mod selfcheck;

pub use error::{Error, Result};
