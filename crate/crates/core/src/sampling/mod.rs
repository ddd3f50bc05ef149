//! Train-set subsampling strategies with an exact interaction budget.
//!
//! Every strategy retains exactly `budget(percent, train_len)` interactions:
//! user- and node-granularity strategies keep whole units and truncate the
//! final one, which is the smallest distortion that still hits the budget.
//! Samplers are pure functions of `(train, spec)` and never see the
//! validation or test splits.

mod graph_strategies;
mod interaction;
mod pagerank;
mod user;

pub use graph_strategies::{sample_centrality, sample_forest_fire, sample_random_walk};
pub use interaction::{
    sample_random_interactions, sample_stratified_user_history, sample_temporal_user_history,
};
pub use pagerank::pagerank;
pub use user::{sample_head_users, sample_random_users};

use crate::data::{build_graph, Dataset};
use crate::error::{Error, Result};

/// Round half away from zero for non-negative inputs.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Interaction budget for a `percent` sample of `train_len` interactions.
/// Round-half-up, floored at one interaction.
pub fn budget(percent: f64, train_len: usize) -> usize {
    round_half_up(percent * train_len as f64 / 100.0).max(1)
}

/// Tunables for the graph strategies. Values are conventional in the graph
/// sampling literature, not prescribed by the method itself.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct StrategyParams {
    /// Random-walk restart probability.
    pub restart_prob: f64,
    /// Forest-fire burn probability `p_f`; the fan-out is geometric with
    /// mean `p_f / (1 - p_f)`.
    pub burn_prob: f64,
    /// Pagerank damping factor.
    pub damping: f64,
    /// Pagerank L1 convergence tolerance.
    pub pagerank_tol: f64,
    /// Pagerank iteration cap.
    pub pagerank_max_iter: usize,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            restart_prob: 0.15,
            burn_prob: 0.7,
            damping: 0.85,
            pagerank_tol: 1e-8,
            pagerank_max_iter: 100,
        }
    }
}

/// What to sample and with which seed.
#[derive(Debug, Clone)]
pub struct SampleSpec {
    pub percent: f64,
    pub seed: u64,
    pub params: StrategyParams,
}

impl SampleSpec {
    pub fn new(percent: f64, seed: u64) -> Self {
        Self { percent, seed, params: StrategyParams::default() }
    }
}

/// The eight strategies that need no proxy model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseStrategy {
    RandomInteraction,
    StratifiedInteraction,
    TemporalInteraction,
    RandomUser,
    HeadUser,
    Centrality,
    RandomWalk,
    ForestFire,
}

impl BaseStrategy {
    pub const ALL: [BaseStrategy; 8] = [
        BaseStrategy::RandomInteraction,
        BaseStrategy::StratifiedInteraction,
        BaseStrategy::TemporalInteraction,
        BaseStrategy::RandomUser,
        BaseStrategy::HeadUser,
        BaseStrategy::Centrality,
        BaseStrategy::RandomWalk,
        BaseStrategy::ForestFire,
    ];

    pub fn id(self) -> &'static str {
        match self {
            BaseStrategy::RandomInteraction => "random-interaction",
            BaseStrategy::StratifiedInteraction => "stratified",
            BaseStrategy::TemporalInteraction => "temporal",
            BaseStrategy::RandomUser => "random-user",
            BaseStrategy::HeadUser => "head-user",
            BaseStrategy::Centrality => "centrality",
            BaseStrategy::RandomWalk => "random-walk",
            BaseStrategy::ForestFire => "forest-fire",
        }
    }

    pub fn needs_graph(self) -> bool {
        matches!(
            self,
            BaseStrategy::Centrality | BaseStrategy::RandomWalk | BaseStrategy::ForestFire
        )
    }
}

impl std::fmt::Display for BaseStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for BaseStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaseStrategy::ALL
            .into_iter()
            .find(|b| b.id() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown sampling strategy `{s}`")))
    }
}

/// How a sample was produced; enough to reproduce it exactly.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SampleProvenance {
    pub strategy: String,
    pub percent: f64,
    pub seed: u64,
    pub budget: usize,
    /// Anomalies worth surfacing, e.g. `pagerank-not-converged`.
    pub flags: Vec<String>,
}

/// A retained subsample plus its provenance.
#[derive(Debug, Clone)]
pub struct SampleResult {
    pub retained: Dataset,
    pub provenance: SampleProvenance,
}

/// Run one of the base strategies, building the bipartite graph on demand.
pub fn sample_with_strategy(
    train: &Dataset,
    strategy: BaseStrategy,
    spec: &SampleSpec,
) -> Result<SampleResult> {
    match strategy {
        BaseStrategy::RandomInteraction => sample_random_interactions(train, spec),
        BaseStrategy::StratifiedInteraction => sample_stratified_user_history(train, spec),
        BaseStrategy::TemporalInteraction => sample_temporal_user_history(train, spec),
        BaseStrategy::RandomUser => sample_random_users(train, spec),
        BaseStrategy::HeadUser => sample_head_users(train, spec),
        BaseStrategy::Centrality => {
            let graph = build_graph(train)?;
            sample_centrality(train, &graph, spec)
        }
        BaseStrategy::RandomWalk => {
            let graph = build_graph(train)?;
            sample_random_walk(train, &graph, spec)
        }
        BaseStrategy::ForestFire => {
            let graph = build_graph(train)?;
            sample_forest_fire(train, &graph, spec)
        }
    }
}

/// Validate a spec against the train set and return the exact budget.
pub(crate) fn checked_budget(train: &Dataset, spec: &SampleSpec) -> Result<usize> {
    if !(spec.percent > 0.0 && spec.percent <= 100.0) {
        return Err(Error::Parameter(format!(
            "sampling percent must be in (0, 100], got {}",
            spec.percent
        )));
    }
    let b = budget(spec.percent, train.len());
    if b > train.len() {
        return Err(Error::BudgetExceedsTrain { budget: b, train_len: train.len() });
    }
    Ok(b)
}

/// Assemble the result from retained interaction indices.
pub(crate) fn finalize(
    train: &Dataset,
    mut kept: Vec<usize>,
    strategy: &str,
    spec: &SampleSpec,
    budget: usize,
    flags: Vec<String>,
) -> SampleResult {
    debug_assert_eq!(kept.len(), budget, "strategy {strategy} missed its budget");
    kept.sort_unstable();
    SampleResult {
        retained: train.subset(&kept),
        provenance: SampleProvenance {
            strategy: strategy.to_owned(),
            percent: spec.percent,
            seed: spec.seed,
            budget,
            flags,
        },
    }
}
