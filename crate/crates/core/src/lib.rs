//! Graph structure learning for node classification, link prediction and
//! recommendation.
//!
//! A graph is estimated from pairwise distances by solving a penalized
//! log-degree-barrier problem ([`solver`]), then plugged into downstream
//! models ([`nnet`]) by the end-to-end [`pipelines`].

pub mod cli;
pub mod data;
pub mod distance;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod neighbors;
pub mod nnet;
pub mod pipelines;
pub mod real;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
