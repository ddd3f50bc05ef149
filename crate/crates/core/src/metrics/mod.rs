//! Scenario evaluation: MSE for explicit feedback; AUC, Recall@k, and
//! nDCG@k over full item rankings for implicit and sequential feedback.
//!
//! Ranking metrics never subsample the candidate set. For each user the
//! candidates are all items except that user's train and validation items,
//! so previously seen items cannot pad the ranking. Per-user results are
//! computed independently (in parallel) and reduced in user order, which
//! keeps every value bit-reproducible.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::data::{Dataset, SplitBundle};
use crate::error::{Error, Result};
use crate::models::Model;

/// A metric identity: what was measured and at which cutoff.
/// Serializes as its label, e.g. `"Recall@100"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Mse,
    Auc,
    RecallAt(usize),
    NdcgAt(usize),
}

impl Metric {
    pub fn lower_is_better(self) -> bool {
        matches!(self, Metric::Mse)
    }

    pub fn label(self) -> String {
        match self {
            Metric::Mse => "MSE".to_owned(),
            Metric::Auc => "AUC".to_owned(),
            Metric::RecallAt(k) => format!("Recall@{k}"),
            Metric::NdcgAt(k) => format!("nDCG@{k}"),
        }
    }

    pub fn k(self) -> Option<usize> {
        match self {
            Metric::RecallAt(k) | Metric::NdcgAt(k) => Some(k),
            _ => None,
        }
    }
}

impl serde::Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl<'de> serde::Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let label = String::deserialize(deserializer)?;
        label.parse().map_err(serde::de::Error::custom)
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("mse") {
            return Ok(Metric::Mse);
        }
        if s.eq_ignore_ascii_case("auc") {
            return Ok(Metric::Auc);
        }
        if let Some(k) = s.strip_prefix("Recall@").or_else(|| s.strip_prefix("recall@")) {
            return Ok(Metric::RecallAt(k.parse().map_err(|_| bad_metric(s))?));
        }
        if let Some(k) = s.strip_prefix("nDCG@").or_else(|| s.strip_prefix("ndcg@")) {
            return Ok(Metric::NdcgAt(k.parse().map_err(|_| bad_metric(s))?));
        }
        Err(bad_metric(s))
    }
}

fn bad_metric(s: &str) -> Error {
    Error::Parameter(format!("unknown metric `{s}`"))
}

/// A measured value plus how many users produced it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricValue {
    pub metric: Metric,
    /// Cutoff, where the metric has one.
    pub k: Option<usize>,
    pub value: f64,
    pub users_evaluated: usize,
    /// Users that had to be skipped (e.g. no candidate negatives for AUC).
    pub users_skipped: usize,
}

/// Mean squared error of predicted ratings over the test interactions.
pub fn mse(model: &Model, test: &Dataset) -> Result<MetricValue> {
    if test.is_empty() {
        return Err(Error::EmptyDataset("mse needs a non-empty test set".into()));
    }
    let mut acc = 0.0;
    for it in test.interactions() {
        let err = model.score(it.user as usize, it.item as usize)? - it.rating;
        acc += err * err;
    }
    let users = (0..test.num_users()).filter(|&u| !test.user_history(u).is_empty()).count();
    Ok(MetricValue {
        metric: Metric::Mse,
        k: None,
        value: acc / test.len() as f64,
        users_evaluated: users,
        users_skipped: 0,
    })
}

pub fn auc(model: &Model, split: &SplitBundle) -> Result<MetricValue> {
    Ok(ranking_metrics(model, split, &[Metric::Auc])?.pop().expect("one metric requested"))
}

pub fn recall_at_k(model: &Model, split: &SplitBundle, k: usize) -> Result<MetricValue> {
    Ok(ranking_metrics(model, split, &[Metric::RecallAt(k)])?.pop().expect("one metric"))
}

pub fn ndcg_at_k(model: &Model, split: &SplitBundle, k: usize) -> Result<MetricValue> {
    Ok(ranking_metrics(model, split, &[Metric::NdcgAt(k)])?.pop().expect("one metric"))
}

/// Evaluate several ranking metrics in one pass over the users. Each user's
/// item scores are computed once and shared across the requested metrics.
pub fn ranking_metrics(
    model: &Model,
    split: &SplitBundle,
    metrics: &[Metric],
) -> Result<Vec<MetricValue>> {
    if split.test.is_empty() {
        return Err(Error::EmptyDataset("ranking metrics need a non-empty test set".into()));
    }
    for m in metrics {
        if *m == Metric::Mse {
            return Err(Error::Parameter("mse is not a ranking metric".into()));
        }
    }

    let num_users = split.test.num_users();
    let per_user: Vec<Option<Vec<Option<f64>>>> = (0..num_users)
        .into_par_iter()
        .map(|user| user_ranking_values(model, split, user, metrics))
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(metrics.len());
    for (pos, metric) in metrics.iter().enumerate() {
        let mut sum = 0.0;
        let mut evaluated = 0usize;
        let mut skipped = 0usize;
        for row in per_user.iter().flatten() {
            match row[pos] {
                Some(v) => {
                    sum += v;
                    evaluated += 1;
                }
                None => skipped += 1,
            }
        }
        if evaluated == 0 {
            return Err(Error::Precondition(format!(
                "no user could be evaluated for {}",
                metric.label()
            )));
        }
        out.push(MetricValue {
            metric: *metric,
            k: metric.k(),
            value: sum / evaluated as f64,
            users_evaluated: evaluated,
            users_skipped: skipped,
        });
    }
    Ok(out)
}

/// Metric values for one user, `None` when the user has no test items.
/// Inner `None`s mark metrics that had to skip this user.
fn user_ranking_values(
    model: &Model,
    split: &SplitBundle,
    user: u32,
    metrics: &[Metric],
) -> Result<Option<Vec<Option<f64>>>> {
    let test_items = distinct_items(&split.test, user);
    if test_items.is_empty() {
        return Ok(None);
    }
    let mut seen: HashSet<u32> = HashSet::new();
    for &idx in split.train.user_history(user) {
        seen.insert(split.train.interaction(idx).item);
    }
    for &idx in split.validation.user_history(user) {
        seen.insert(split.validation.interaction(idx).item);
    }

    let scores = model.scores_for_user(user as usize)?;
    let num_items = scores.len() as u32;
    let test_set: HashSet<u32> = test_items.iter().copied().collect();

    // candidates: everything the user has not consumed in train/validation
    let mut candidates: Vec<u32> = (0..num_items).filter(|i| !seen.contains(i)).collect();
    candidates
        .sort_by(|&a, &b| scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b)));

    let mut values = Vec::with_capacity(metrics.len());
    for metric in metrics {
        let value = match metric {
            Metric::Auc => user_auc(&scores, &candidates, &test_items, &test_set),
            Metric::RecallAt(k) => {
                let hits =
                    candidates.iter().take(*k).filter(|i| test_set.contains(i)).count();
                Some(hits as f64 / test_items.len() as f64)
            }
            Metric::NdcgAt(k) => {
                let mut dcg = 0.0;
                for (rank0, item) in candidates.iter().take(*k).enumerate() {
                    if test_set.contains(item) {
                        dcg += 1.0 / ((rank0 + 2) as f64).log2();
                    }
                }
                let ideal_hits = test_items.len().min(*k);
                let idcg: f64 =
                    (0..ideal_hits).map(|r| 1.0 / ((r + 2) as f64).log2()).sum();
                Some(dcg / idcg)
            }
            Metric::Mse => unreachable!("rejected above"),
        };
        values.push(value);
    }
    Ok(Some(values))
}

/// Fraction of candidate negatives ranked strictly below each test positive;
/// ties count one half. Averaged over the user's test positives. `None`
/// when the user has no candidate negatives left.
fn user_auc(
    scores: &[f64],
    candidates: &[u32],
    test_items: &[u32],
    test_set: &HashSet<u32>,
) -> Option<f64> {
    let negatives: Vec<u32> =
        candidates.iter().copied().filter(|i| !test_set.contains(i)).collect();
    if negatives.is_empty() {
        return None;
    }
    let mut acc = 0.0;
    for &pos in test_items {
        let s = scores[pos as usize];
        let mut below = 0.0;
        for &neg in &negatives {
            let sn = scores[neg as usize];
            if sn < s {
                below += 1.0;
            } else if sn == s {
                below += 0.5;
            }
        }
        acc += below / negatives.len() as f64;
    }
    Some(acc / test_items.len() as f64)
}

/// Distinct items of a user's interactions in a dataset, in first-seen order.
fn distinct_items(dataset: &Dataset, user: u32) -> Vec<u32> {
    let mut out = Vec::new();
    for &idx in dataset.user_history(user) {
        let item = dataset.interaction(idx).item;
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Scenario;
    use crate::models::{ModelKind, ModelParams, PopularityModel};
    use crate::testutil::toy_dataset;

    /// Bundle with explicit item-bias scores: items get scores from `betas`.
    fn bundle_with_scores(
        train_rows: &[(u32, u32, f64, i64)],
        val_rows: &[(u32, u32, f64, i64)],
        test_rows: &[(u32, u32, f64, i64)],
    ) -> SplitBundle {
        let mut all = Vec::new();
        all.extend_from_slice(train_rows);
        all.extend_from_slice(val_rows);
        all.extend_from_slice(test_rows);
        let full = toy_dataset(&all);
        let train: Vec<usize> = (0..train_rows.len()).collect();
        let val: Vec<usize> =
            (train_rows.len()..train_rows.len() + val_rows.len()).collect();
        let test: Vec<usize> = (train_rows.len() + val_rows.len()..all.len()).collect();
        SplitBundle {
            scenario: Scenario::Implicit,
            train: full.subset(&train),
            validation: full.subset(&val),
            test: full.subset(&test),
        }
    }

    fn item_bias_model(num_users: usize, betas: &[f64]) -> Model {
        let mut p =
            ModelParams::init(ModelKind::BiasOnly, num_users, betas.len(), 0, 0).unwrap();
        p.beta_item.copy_from_slice(betas);
        Model::Learned(p)
    }

    #[test]
    fn mse_perfect_and_offset() {
        let test = toy_dataset(&[(0, 0, 0.0, 0), (0, 1, 0.0, 1)]);
        let model = item_bias_model(1, &[0.0, 0.0]);
        assert_eq!(mse(&model, &test).unwrap().value, 0.0);
        let offset = item_bias_model(1, &[1.0, 1.0]);
        assert_eq!(mse(&offset, &test).unwrap().value, 1.0);
    }

    #[test]
    fn mse_hand_computed() {
        // errors 1 and 3 -> (1 + 9) / 2 = 5
        let test = toy_dataset(&[(0, 0, 1.0, 0), (0, 1, 3.0, 1)]);
        let model = item_bias_model(1, &[2.0, 6.0]);
        assert_eq!(mse(&model, &test).unwrap().value, 5.0);
    }

    #[test]
    fn mse_empty_test_errors() {
        let d = toy_dataset(&[(0, 0, 1.0, 0)]);
        let empty = d.subset(&[]);
        let model = item_bias_model(1, &[0.0]);
        assert!(mse(&model, &empty).is_err());
    }

    #[test]
    fn auc_extremes() {
        // 5 items; user trained on item 0, test positive item 1
        let b = bundle_with_scores(
            &[(0, 0, 1.0, 0), (0, 4, 1.0, 1)],
            &[],
            &[(0, 1, 1.0, 2)],
        );
        let top = item_bias_model(1, &[0.0, 9.0, 1.0, 1.0, 0.0]);
        assert_eq!(auc(&top, &b).unwrap().value, 1.0);
        let bottom = item_bias_model(1, &[0.0, -9.0, 1.0, 1.0, 0.0]);
        assert_eq!(auc(&bottom, &b).unwrap().value, 0.0);
    }

    #[test]
    fn auc_half_when_split_evenly() {
        // four negatives: two above, two below the positive
        let b = bundle_with_scores(&[(0, 5, 1.0, 0)], &[], &[(0, 0, 1.0, 1)]);
        let model = item_bias_model(1, &[5.0, 9.0, 8.0, 1.0, 2.0, 0.0]);
        assert_eq!(auc(&model, &b).unwrap().value, 0.5);
    }

    #[test]
    fn auc_skips_users_without_negatives() {
        // user 0: all items consumed in train except the test positive
        let b = bundle_with_scores(
            &[(0, 0, 1.0, 0), (0, 1, 1.0, 1), (1, 0, 1.0, 2)],
            &[],
            &[(0, 2, 1.0, 3), (1, 1, 1.0, 4)],
        );
        let model = item_bias_model(2, &[3.0, 2.0, 1.0]);
        let v = auc(&model, &b).unwrap();
        assert_eq!(v.users_evaluated, 1);
        assert_eq!(v.users_skipped, 1);
    }

    #[test]
    fn recall_basics() {
        let b = bundle_with_scores(&[(0, 0, 1.0, 0)], &[], &[(0, 1, 1.0, 1), (0, 2, 1.0, 2)]);
        // item 1 ranks first, item 2 last among candidates {1,2,3}
        let model = item_bias_model(1, &[0.0, 9.0, -9.0, 1.0]);
        assert_eq!(recall_at_k(&model, &b, 1).unwrap().value, 0.5);
        assert_eq!(recall_at_k(&model, &b, 3).unwrap().value, 1.0);
    }

    #[test]
    fn ndcg_single_hit_positions() {
        let b = bundle_with_scores(&[(0, 4, 1.0, 0)], &[], &[(0, 0, 1.0, 1)]);
        // positive at rank 1
        let model = item_bias_model(1, &[9.0, 1.0, 2.0, 3.0, 0.0]);
        assert_eq!(ndcg_at_k(&model, &b, 10).unwrap().value, 1.0);
        // positive at rank 3 -> 1/log2(4) = 0.5
        let model = item_bias_model(1, &[1.0, 9.0, 8.0, 0.5, 0.0]);
        assert!((ndcg_at_k(&model, &b, 10).unwrap().value - 0.5).abs() < 1e-12);
        // positive outside the cutoff
        let model = item_bias_model(1, &[-1.0, 9.0, 8.0, 7.0, 0.0]);
        assert_eq!(ndcg_at_k(&model, &b, 2).unwrap().value, 0.0);
    }

    #[test]
    fn rank_shift_never_hurts() {
        let b = bundle_with_scores(&[(0, 5, 1.0, 0)], &[], &[(0, 2, 1.0, 1)]);
        let worse = item_bias_model(1, &[5.0, 4.0, 1.0, 3.0, 2.0, 0.0]);
        let better = item_bias_model(1, &[5.0, 4.0, 4.5, 3.0, 2.0, 0.0]);
        for metric in [Metric::Auc, Metric::RecallAt(2), Metric::NdcgAt(2)] {
            let lo = ranking_metrics(&worse, &b, &[metric]).unwrap()[0].value;
            let hi = ranking_metrics(&better, &b, &[metric]).unwrap()[0].value;
            assert!(hi >= lo, "{metric} decreased when the test item moved up");
        }
    }

    #[test]
    fn poprec_ranking_ignores_users() {
        let train = toy_dataset(&[(0, 0, 1.0, 0), (1, 0, 1.0, 1), (1, 1, 1.0, 2), (2, 2, 1.0, 3)]);
        let model = Model::Popularity(PopularityModel::from_train(&train));
        let a = model.scores_for_user(0).unwrap();
        let b = model.scores_for_user(2).unwrap();
        assert_eq!(a, b);
    }
}
