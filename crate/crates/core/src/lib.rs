//! Budgeted active sampling of pairs and pseudo-pairs for large-scale linear
//! bipartite ranking.

pub mod active;
pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod harness;
pub mod pairs;
pub mod rng;
pub mod sampling;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
