//! Algorithm leaderboards with fractional ranks.

use crate::data::Scenario;
use crate::error::{Error, Result};
use crate::metrics::Metric;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LeaderboardEntry {
    pub algorithm: String,
    pub value: f64,
    /// 1 is best; exact metric ties share the averaged rank.
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Leaderboard {
    pub scenario: Scenario,
    pub metric: String,
    /// `full` or `<strategy>` for sampled sources.
    pub source: String,
    pub entries: Vec<LeaderboardEntry>,
}

impl Leaderboard {
    /// Build from measured values, ranking by the metric's direction.
    pub fn from_values(
        scenario: Scenario,
        metric: Metric,
        source: &str,
        values: &[(String, f64)],
    ) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Parameter("a leaderboard needs at least two algorithms".into()));
        }
        let raw: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
        let ranks = fractional_ranks(&raw, metric.lower_is_better());
        let entries = values
            .iter()
            .zip(&ranks)
            .map(|((algorithm, value), &rank)| LeaderboardEntry {
                algorithm: algorithm.clone(),
                value: *value,
                rank,
            })
            .collect();
        Ok(Self { scenario, metric: metric.label(), source: source.to_owned(), entries })
    }

    pub fn rank_of(&self, algorithm: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.algorithm == algorithm).map(|e| e.rank)
    }

    /// Rank vector aligned with this leaderboard's algorithm order.
    pub fn ranks_aligned_with(&self, algorithms: &[String]) -> Result<Vec<f64>> {
        algorithms
            .iter()
            .map(|a| {
                self.rank_of(a).ok_or_else(|| {
                    Error::MissingCell(format!("algorithm `{a}` absent from leaderboard"))
                })
            })
            .collect()
    }

    pub fn algorithms(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.algorithm.clone()).collect()
    }
}

/// Fractional ranks, 1 = best. Exact value ties get the average of the
/// positions they occupy.
pub fn fractional_ranks(values: &[f64], lower_is_better: bool) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        if lower_is_better {
            values[a].total_cmp(&values[b])
        } else {
            values[b].total_cmp(&values[a])
        }
    });
    let mut ranks = vec![0.0; n];
    let mut pos = 0usize;
    while pos < n {
        let mut end = pos + 1;
        while end < n && values[order[end]] == values[order[pos]] {
            end += 1;
        }
        // positions pos+1 ..= end averaged
        let avg = (pos + 1 + end) as f64 / 2.0;
        for &idx in &order[pos..end] {
            ranks[idx] = avg;
        }
        pos = end;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_follow_direction() {
        // higher better: 0.9 is rank 1
        assert_eq!(fractional_ranks(&[0.1, 0.9, 0.5], false), vec![3.0, 1.0, 2.0]);
        // lower better: 0.1 is rank 1
        assert_eq!(fractional_ranks(&[0.1, 0.9, 0.5], true), vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn exact_ties_share_averaged_rank() {
        let ranks = fractional_ranks(&[0.5, 0.5, 0.2, 0.9], false);
        assert_eq!(ranks, vec![2.5, 2.5, 4.0, 1.0]);
    }

    #[test]
    fn leaderboard_ranks_are_a_permutation_up_to_ties() {
        let values = vec![
            ("a".to_owned(), 0.3),
            ("b".to_owned(), 0.8),
            ("c".to_owned(), 0.1),
        ];
        let lb =
            Leaderboard::from_values(Scenario::Implicit, Metric::Auc, "full", &values).unwrap();
        assert_eq!(lb.rank_of("b"), Some(1.0));
        assert_eq!(lb.rank_of("c"), Some(3.0));
        let sum: f64 = lb.entries.iter().map(|e| e.rank).sum();
        assert_eq!(sum, 6.0);
    }

    #[test]
    fn mse_leaderboard_inverts() {
        let values = vec![("a".to_owned(), 2.0), ("b".to_owned(), 1.0)];
        let lb =
            Leaderboard::from_values(Scenario::Explicit, Metric::Mse, "full", &values).unwrap();
        assert_eq!(lb.rank_of("b"), Some(1.0));
    }

    #[test]
    fn single_algorithm_is_rejected() {
        let values = vec![("a".to_owned(), 2.0)];
        assert!(Leaderboard::from_values(Scenario::Explicit, Metric::Mse, "full", &values).is_err());
    }
}
