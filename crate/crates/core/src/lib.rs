//! Subsampling toolkit for collaborative-filtering interaction data.
//!
//! The crate loads interaction logs, subsamples the train split under
//! sixteen strategies (including proxy-importance selection with optional
//! propensity correction), trains a small slate of recommenders per
//! feedback scenario, evaluates them with full-ranking metrics, and
//! measures how faithfully each subsample preserves the algorithm
//! leaderboard via Kendall's Tau aggregated into the Psi statistic.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod rng;
pub mod metrics;
pub mod models;
pub mod sampling;
pub mod svp;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
