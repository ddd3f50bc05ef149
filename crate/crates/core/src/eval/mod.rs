//! Leaderboard fidelity evaluation: Kendall's tau between full-data and
//! sampled leaderboards, aggregated into the Psi statistic and the
//! rank-movement grid, plus the experiment orchestration around them.

mod experiment;
mod leaderboard;
mod psi;
mod strategy;
mod synth;
mod tau;

pub use experiment::{
    config_from_toml, run_experiment, train_selected, write_artifacts, AlgorithmConfig,
    BoardRecord, CellFailure, CellResult, CsvSource, DatasetConfig, DatasetSource,
    ExperimentConfig, PMleRecord, PropensitySettings, ProxySettings, PsiRecord, PsiReport,
    StrategyPsi,
};
pub use leaderboard::{fractional_ranks, Leaderboard, LeaderboardEntry};
pub use psi::{compute_psi, metrics_for_scenario, p_mle_term, PsiValue, TauCell};
pub use strategy::SamplingStrategy;
pub use synth::{generate_synthetic, SyntheticConfig};
pub use tau::{kendall_tau, kendall_tau_bruteforce};
