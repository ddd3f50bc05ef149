//! Proxy training with a per-epoch difficulty trace.

use rand::Rng;

use crate::data::{Dataset, Scenario};
use crate::error::{Error, Result};
use crate::models::{train_with, ModelParams, TrainConfig};
use crate::rng::{child_seed, rng_from_seed};
use crate::svp::ProxyKind;

/// Per-epoch, per-interaction difficulty record.
#[derive(Debug, Clone)]
pub enum TraceRecord {
    /// Squared error of the proxy's rating prediction, one row per epoch.
    Explicit(Vec<Vec<f64>>),
    /// For each positive, how many of the `n_neg` freshly sampled negatives
    /// the proxy ranked strictly below it; one row per epoch.
    Implicit { correct: Vec<Vec<u32>>, n_neg: u32 },
}

/// The proxy's training history, self-describing enough to turn into an
/// importance table without the dataset at hand.
#[derive(Debug, Clone)]
pub struct EpochTrace {
    pub proxy: ProxyKind,
    pub scenario: Scenario,
    pub epochs: usize,
    /// `(user, item)` per train interaction, aligned with the record rows.
    pub users: Vec<u32>,
    pub items: Vec<u32>,
    pub num_users: u32,
    pub record: TraceRecord,
}

impl EpochTrace {
    pub fn interactions(&self) -> usize {
        self.users.len()
    }
}

/// Train an inexpensive proxy on the full train set and record each
/// interaction's difficulty after every epoch.
///
/// Explicit feedback records squared errors; implicit and sequential
/// feedback record, for each positive, its rank among `cfg.n_neg` negatives
/// freshly drawn from the user's non-interacted items each epoch.
pub fn train_proxy(
    train: &Dataset,
    proxy: ProxyKind,
    scenario: Scenario,
    cfg: &TrainConfig,
) -> Result<EpochTrace> {
    if cfg.epochs < 1 {
        return Err(Error::Parameter("proxy needs at least one epoch".into()));
    }
    if scenario != Scenario::Explicit && cfg.n_neg < 1 {
        return Err(Error::Parameter("implicit proxy scoring needs n_neg >= 1".into()));
    }

    let users: Vec<u32> = train.interactions().iter().map(|it| it.user).collect();
    let items: Vec<u32> = train.interactions().iter().map(|it| it.item).collect();

    let trace = match scenario {
        Scenario::Explicit => {
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(cfg.epochs);
            train_with(train, proxy.model_kind(), scenario, cfg, |_, params| {
                rows.push(explicit_row(train, params));
                Ok(())
            })?;
            TraceRecord::Explicit(rows)
        }
        Scenario::Implicit | Scenario::Sequential => {
            let positives = crate::models::positive_items(train);
            let mut scoring_rng = rng_from_seed(child_seed(cfg.seed, "proxy-scoring"));
            let mut rows: Vec<Vec<u32>> = Vec::with_capacity(cfg.epochs);
            train_with(train, proxy.model_kind(), scenario, cfg, |_, params| {
                rows.push(implicit_row(train, params, &positives, cfg.n_neg, &mut scoring_rng));
                Ok(())
            })?;
            TraceRecord::Implicit { correct: rows, n_neg: cfg.n_neg as u32 }
        }
    };

    Ok(EpochTrace {
        proxy,
        scenario,
        epochs: cfg.epochs,
        users,
        items,
        num_users: train.num_users(),
        record: trace,
    })
}

fn explicit_row(train: &Dataset, params: &ModelParams) -> Vec<f64> {
    train
        .interactions()
        .iter()
        .map(|it| {
            let err = params.score(it.user as usize, it.item as usize).expect("train indices")
                - it.rating;
            err * err
        })
        .collect()
}

fn implicit_row(
    train: &Dataset,
    params: &ModelParams,
    positives: &[Vec<u32>],
    n_neg: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<u32> {
    let num_items = train.num_items() as usize;
    train
        .interactions()
        .iter()
        .map(|it| {
            let u = it.user as usize;
            let pos_score = params.score(u, it.item as usize).expect("train indices");
            let user_pos = &positives[u];
            let mut correct = 0u32;
            for _ in 0..n_neg {
                let neg = if user_pos.len() >= num_items {
                    // no true negatives left; fall back to any other item
                    let mut j = rng.gen_range(0..num_items);
                    if j == it.item as usize {
                        j = (j + 1) % num_items;
                    }
                    j
                } else {
                    crate::models::draw_negative(rng, num_items, user_pos)
                        .expect("checked above")
                };
                if pos_score > params.score(u, neg).expect("train indices") {
                    correct += 1;
                }
            }
            correct
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::toy_dataset;

    #[test]
    fn explicit_trace_has_one_row_per_epoch() {
        let train = toy_dataset(&[(0, 0, 3.0, 0), (0, 1, 1.0, 1), (1, 0, 2.0, 2)]);
        let cfg = TrainConfig { epochs: 4, ..TrainConfig::default() };
        let trace = train_proxy(&train, ProxyKind::BiasOnly, Scenario::Explicit, &cfg).unwrap();
        match &trace.record {
            TraceRecord::Explicit(rows) => {
                assert_eq!(rows.len(), 4);
                assert!(rows.iter().all(|r| r.len() == train.len()));
            }
            _ => panic!("wrong record kind"),
        }
    }

    #[test]
    fn single_interaction_error_shrinks_towards_zero() {
        let train = toy_dataset(&[(0, 0, 2.0, 0)]);
        let cfg = TrainConfig {
            epochs: 250,
            learning_rate: 0.1,
            l2_reg: 0.0,
            latent_dim: 0,
            ..TrainConfig::default()
        };
        let trace = train_proxy(&train, ProxyKind::BiasOnly, Scenario::Explicit, &cfg).unwrap();
        match &trace.record {
            TraceRecord::Explicit(rows) => {
                let last = rows.last().unwrap()[0];
                assert!(last < 1e-4, "final squared error {last} should approach zero");
            }
            _ => panic!("wrong record kind"),
        }
    }

    #[test]
    fn implicit_trace_counts_within_bounds_and_reproduces() {
        let rows: Vec<(u32, u32, f64, i64)> =
            (0..4u32).flat_map(|u| (0..3u32).map(move |j| (u, (u + j) % 6, 1.0, j as i64))).collect();
        let train = toy_dataset(&rows);
        let cfg = TrainConfig { epochs: 3, n_neg: 4, seed: 8, ..TrainConfig::default() };
        let a = train_proxy(&train, ProxyKind::Mf, Scenario::Implicit, &cfg).unwrap();
        let b = train_proxy(&train, ProxyKind::Mf, Scenario::Implicit, &cfg).unwrap();
        match (&a.record, &b.record) {
            (
                TraceRecord::Implicit { correct: ca, n_neg },
                TraceRecord::Implicit { correct: cb, .. },
            ) => {
                assert_eq!(ca, cb, "same seed must reproduce the trace");
                assert!(ca.iter().flatten().all(|&c| c <= *n_neg));
            }
            _ => panic!("wrong record kind"),
        }
    }
}
