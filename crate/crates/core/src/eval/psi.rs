//! Aggregation of per-cell taus into the Psi statistic and the
//! rank-movement probability.

use crate::data::Scenario;
use crate::error::{Error, Result};
use crate::metrics::Metric;

/// Which metrics pertain to a scenario.
pub fn metrics_for_scenario(scenario: Scenario) -> Vec<Metric> {
    match scenario {
        Scenario::Explicit => vec![Metric::Mse],
        Scenario::Implicit | Scenario::Sequential => {
            vec![Metric::Auc, Metric::RecallAt(100), Metric::NdcgAt(10)]
        }
    }
}

/// One tau between the full-data and sampled leaderboards.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TauCell {
    pub dataset: String,
    pub strategy: String,
    pub scenario: Scenario,
    pub metric: String,
    pub percent: f64,
    pub seed_index: u32,
    pub tau: f64,
}

/// Mean tau over every expected `(scenario, metric, percent, seed)` cell of
/// one `(dataset, strategy)` pair. With `allow_partial` the normalizer
/// shrinks to the present cells; otherwise a missing cell is an error.
pub fn compute_psi(
    cells: &[TauCell],
    scenarios: &[Scenario],
    percents: &[f64],
    seed_indices: u32,
    allow_partial: bool,
) -> Result<PsiValue> {
    let mut sum = 0.0;
    let mut present = 0usize;
    let mut expected = 0usize;
    for &scenario in scenarios {
        for metric in metrics_for_scenario(scenario) {
            let label = metric.label();
            for &percent in percents {
                for seed_index in 0..seed_indices {
                    expected += 1;
                    let found = cells.iter().find(|c| {
                        c.scenario == scenario
                            && c.metric == label
                            && c.percent == percent
                            && c.seed_index == seed_index
                    });
                    match found {
                        Some(cell) => {
                            sum += cell.tau;
                            present += 1;
                        }
                        None if allow_partial => {}
                        None => {
                            return Err(Error::MissingCell(format!(
                                "scenario={scenario} metric={label} percent={percent} seed={seed_index}"
                            )))
                        }
                    }
                }
            }
        }
    }
    if present == 0 {
        return Err(Error::MissingCell("no tau cells present".into()));
    }
    Ok(PsiValue { psi: sum / present as f64, cells_present: present, cells_expected: expected })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PsiValue {
    pub psi: f64,
    pub cells_present: usize,
    pub cells_expected: usize,
}

impl PsiValue {
    pub fn is_partial(&self) -> bool {
        self.cells_present < self.cells_expected
    }
}

/// Probability-style score of an algorithm moving up under sampling:
/// `0.5 + (rank_full - rank_sampled) / (2 (n - 1))` for one cell.
pub fn p_mle_term(full_rank: f64, sampled_rank: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Parameter("rank movement needs at least two algorithms".into()));
    }
    Ok(0.5 + (full_rank - sampled_rank) / (2.0 * (n as f64 - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(scenario: Scenario, metric: &str, percent: f64, seed: u32, tau: f64) -> TauCell {
        TauCell {
            dataset: "d".into(),
            strategy: "s".into(),
            scenario,
            metric: metric.into(),
            percent,
            seed_index: seed,
            tau,
        }
    }

    #[test]
    fn psi_is_the_mean_over_cells() {
        let cells = vec![
            cell(Scenario::Explicit, "MSE", 100.0, 0, 1.0),
            cell(Scenario::Implicit, "AUC", 100.0, 0, 0.5),
            cell(Scenario::Implicit, "Recall@100", 100.0, 0, 0.5),
            cell(Scenario::Implicit, "nDCG@10", 100.0, 0, 1.0),
        ];
        let v = compute_psi(
            &cells,
            &[Scenario::Explicit, Scenario::Implicit],
            &[100.0],
            1,
            false,
        )
        .unwrap();
        assert_eq!(v.psi, 0.75);
        assert!(!v.is_partial());
    }

    #[test]
    fn missing_cell_is_an_error_without_the_flag() {
        let cells = vec![cell(Scenario::Explicit, "MSE", 80.0, 0, 1.0)];
        let err = compute_psi(&cells, &[Scenario::Explicit], &[80.0, 60.0], 1, false).unwrap_err();
        match err {
            Error::MissingCell(msg) => assert!(msg.contains("percent=60")),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn partial_grid_renormalizes() {
        let cells =
            vec![cell(Scenario::Explicit, "MSE", 80.0, 0, 1.0), cell(Scenario::Explicit, "MSE", 60.0, 0, 0.5)];
        let v = compute_psi(&cells, &[Scenario::Explicit], &[80.0, 60.0, 40.0], 1, true).unwrap();
        assert_eq!(v.psi, 0.75);
        assert!(v.is_partial());
    }

    #[test]
    fn rank_movement_extremes() {
        // unchanged rank
        assert_eq!(p_mle_term(3.0, 3.0, 7).unwrap(), 0.5);
        // best drops to worst with n = 7: 0.5 + (1 - 7) / 12 = 0
        assert_eq!(p_mle_term(1.0, 7.0, 7).unwrap(), 0.0);
        // worst rises to best
        assert_eq!(p_mle_term(7.0, 1.0, 7).unwrap(), 1.0);
    }

    #[test]
    fn pertinence_table() {
        assert_eq!(metrics_for_scenario(Scenario::Explicit), vec![Metric::Mse]);
        assert_eq!(metrics_for_scenario(Scenario::Sequential).len(), 3);
    }
}
