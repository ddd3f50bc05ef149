//! Difficulty scores derived from a proxy trace.
//!
//! Explicit feedback: an interaction's importance is the proxy's squared
//! error on it averaged over epochs. Averaging rather than summing divides
//! the summed form by the constant epoch count, so selection order is
//! unchanged.
//!
//! Implicit/sequential feedback: the per-epoch contribution is a smoothed
//! inverse of the sampled AUC, `(n_neg + 1 + s) / (correct + s)` with
//! smoothing `s` (1 by default). The unsmoothed reciprocal-indicator form
//! blows up on any fully misranked epoch; the smoothed form keeps the same
//! ordering intent while staying bounded.

use crate::error::{Error, Result};
use crate::svp::{EpochTrace, Granularity, PropensityParams, ProxyKind, TraceRecord};

/// Per-interaction and per-user importance; a user's importance is the
/// arithmetic mean over that user's interactions.
#[derive(Debug, Clone)]
pub struct ImportanceTable {
    pub proxy: ProxyKind,
    pub granularity: Granularity,
    pub propensity_corrected: bool,
    /// `(user, item)` per scored interaction, aligned with `interaction`.
    pub users: Vec<u32>,
    pub items: Vec<u32>,
    pub interaction: Vec<f64>,
    pub user: Vec<f64>,
    /// Propensity per interaction when corrected; empty otherwise.
    pub propensities: Vec<f64>,
}

impl ImportanceTable {
    pub fn with_granularity(mut self, granularity: Granularity) -> Self {
        self.granularity = granularity;
        self
    }

    pub fn strategy_id(&self) -> String {
        let family = if self.propensity_corrected { "svp-cf-prop" } else { "svp-cf" };
        format!("{family}:{}:{}", self.proxy, self.granularity)
    }

    fn check_finite(&self) -> Result<()> {
        let ok = self.interaction.iter().chain(self.user.iter()).all(|v| v.is_finite() && *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter("importance values must be finite and non-negative".into()))
        }
    }
}

/// Mean squared error over epochs, per interaction.
pub fn importance_explicit(trace: &EpochTrace, granularity: Granularity) -> Result<ImportanceTable> {
    let rows = match &trace.record {
        TraceRecord::Explicit(rows) => rows,
        TraceRecord::Implicit { .. } => {
            return Err(Error::Parameter(
                "explicit importance needs an explicit-feedback trace".into(),
            ))
        }
    };
    let per_interaction = mean_over_epochs(rows, trace.interactions());
    build_table(trace, granularity, false, per_interaction, Vec::new())
}

/// Mean smoothed inverse sampled-AUC over epochs, per interaction.
pub fn importance_implicit(
    trace: &EpochTrace,
    granularity: Granularity,
    smoothing: f64,
) -> Result<ImportanceTable> {
    let (rows, n_neg) = match &trace.record {
        TraceRecord::Implicit { correct, n_neg } => (correct, *n_neg),
        TraceRecord::Explicit(_) => {
            return Err(Error::Parameter(
                "implicit importance needs an implicit-feedback trace".into(),
            ))
        }
    };
    if smoothing <= 0.0 {
        return Err(Error::Parameter("smoothing must be positive".into()));
    }
    let epochs = rows.len() as f64;
    let mut per_interaction = vec![0.0; trace.interactions()];
    for row in rows {
        for (idx, &correct) in row.iter().enumerate() {
            per_interaction[idx] +=
                (f64::from(n_neg) + 1.0 + smoothing) / (f64::from(correct) + smoothing);
        }
    }
    per_interaction.iter_mut().for_each(|v| *v /= epochs);
    build_table(trace, granularity, false, per_interaction, Vec::new())
}

/// Divide each interaction's importance by its propensity and rebuild the
/// per-user means from the corrected values.
pub fn importance_prop(
    table: &ImportanceTable,
    params: &PropensityParams,
) -> Result<ImportanceTable> {
    if table.propensity_corrected {
        return Err(Error::Parameter("table is already propensity-corrected".into()));
    }
    let mut corrected = table.clone();
    corrected.propensity_corrected = true;
    corrected.propensities = Vec::with_capacity(table.interaction.len());
    for (idx, value) in corrected.interaction.iter_mut().enumerate() {
        let p = params.propensity(table.users[idx] as usize, table.items[idx] as usize)?;
        *value = table.interaction[idx] / p;
        corrected.propensities.push(p);
    }
    corrected.user = user_means(&corrected.users, &corrected.interaction, table.user.len());
    corrected.check_finite()?;
    Ok(corrected)
}

fn mean_over_epochs(rows: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n];
    for row in rows {
        for (idx, v) in row.iter().enumerate() {
            acc[idx] += v;
        }
    }
    let epochs = rows.len() as f64;
    acc.iter_mut().for_each(|v| *v /= epochs);
    acc
}

fn user_means(users: &[u32], values: &[f64], num_users: usize) -> Vec<f64> {
    let mut sums = vec![0.0; num_users];
    let mut counts = vec![0usize; num_users];
    for (idx, &u) in users.iter().enumerate() {
        sums[u as usize] += values[idx];
        counts[u as usize] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect()
}

fn build_table(
    trace: &EpochTrace,
    granularity: Granularity,
    corrected: bool,
    per_interaction: Vec<f64>,
    propensities: Vec<f64>,
) -> Result<ImportanceTable> {
    let user = user_means(&trace.users, &per_interaction, trace.num_users as usize);
    let table = ImportanceTable {
        proxy: trace.proxy,
        granularity,
        propensity_corrected: corrected,
        users: trace.users.clone(),
        items: trace.items.clone(),
        interaction: per_interaction,
        user,
        propensities,
    };
    table.check_finite()?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Scenario;

    fn explicit_trace(users: &[u32], items: &[u32], rows: Vec<Vec<f64>>) -> EpochTrace {
        EpochTrace {
            proxy: ProxyKind::BiasOnly,
            scenario: Scenario::Explicit,
            epochs: rows.len(),
            users: users.to_vec(),
            items: items.to_vec(),
            num_users: users.iter().max().map_or(0, |m| m + 1),
            record: TraceRecord::Explicit(rows),
        }
    }

    fn implicit_trace(users: &[u32], items: &[u32], correct: Vec<Vec<u32>>, n_neg: u32) -> EpochTrace {
        EpochTrace {
            proxy: ProxyKind::Mf,
            scenario: Scenario::Implicit,
            epochs: correct.len(),
            users: users.to_vec(),
            items: items.to_vec(),
            num_users: users.iter().max().map_or(0, |m| m + 1),
            record: TraceRecord::Implicit { correct, n_neg },
        }
    }

    #[test]
    fn explicit_mean_over_epochs() {
        let t = explicit_trace(&[0, 0], &[0, 1], vec![vec![0.4, 0.0], vec![0.2, 0.0]]);
        let table = importance_explicit(&t, Granularity::Interaction).unwrap();
        assert!((table.interaction[0] - 0.3).abs() < 1e-15);
        assert_eq!(table.interaction[1], 0.0);
        // constant trace keeps the constant
        let t = explicit_trace(&[0], &[0], vec![vec![0.7]; 5]);
        let table = importance_explicit(&t, Granularity::Interaction).unwrap();
        assert!((table.interaction[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn implicit_hand_values() {
        // perfectly ranked every epoch with n_neg = 4 -> (4 + 2) / (4 + 1)
        let t = implicit_trace(&[0], &[0], vec![vec![4], vec![4]], 4);
        let table = importance_implicit(&t, Granularity::Interaction, 1.0).unwrap();
        assert!((table.interaction[0] - 1.2).abs() < 1e-15);
        // fully misranked -> 6 / 1
        let t = implicit_trace(&[0], &[0], vec![vec![0]], 4);
        let table = importance_implicit(&t, Granularity::Interaction, 1.0).unwrap();
        assert!((table.interaction[0] - 6.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_ranking_scores_below_any_misranking() {
        for misranked in 0..4u32 {
            let t = implicit_trace(&[0, 1], &[0, 0], vec![vec![4, misranked]], 4);
            let table = importance_implicit(&t, Granularity::Interaction, 1.0).unwrap();
            assert!(table.interaction[0] < table.interaction[1]);
        }
    }

    #[test]
    fn user_importance_is_mean_of_interactions() {
        let t = explicit_trace(&[0, 0, 1], &[0, 1, 0], vec![vec![1.0, 3.0, 5.0]]);
        let table = importance_explicit(&t, Granularity::User).unwrap();
        assert!((table.user[0] - 2.0).abs() < 1e-15);
        assert!((table.user[1] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn propensity_identity_and_scaling() {
        let t = explicit_trace(&[0, 1], &[0, 1], vec![vec![2.0, 2.0]]);
        let table = importance_explicit(&t, Granularity::Interaction).unwrap();
        // equal counts give one shared propensity; correction scales uniformly
        let params = PropensityParams::new(0.55, 1.5, &vec![10; 40], &vec![10; 40]).unwrap();
        let corrected = importance_prop(&table, &params).unwrap();
        let p = params.propensity(0, 0).unwrap();
        assert!(p < 1.0);
        assert!((corrected.interaction[0] - 2.0 / p).abs() < 1e-12);
        assert!(corrected.interaction[0] > table.interaction[0]);
        assert_eq!(corrected.user.len(), table.user.len());
    }

    #[test]
    fn tail_pairs_upweighted_against_head_pairs() {
        let t = explicit_trace(&[0, 1], &[0, 1], vec![vec![2.0, 2.0]]);
        let table = importance_explicit(&t, Granularity::Interaction).unwrap();
        // user 0 / item 0 are tail (small counts), user 1 / item 1 head
        let mut user_counts = vec![20u32; 30];
        user_counts[0] = 2;
        user_counts[1] = 500;
        let mut item_counts = vec![20u32; 30];
        item_counts[0] = 2;
        item_counts[1] = 500;
        let params = PropensityParams::new(0.55, 1.5, &user_counts, &item_counts).unwrap();
        let corrected = importance_prop(&table, &params).unwrap();
        assert!(corrected.interaction[0] > corrected.interaction[1]);
    }
}
