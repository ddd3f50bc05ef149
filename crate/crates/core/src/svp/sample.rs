//! Importance-ranked subsampling.

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::sampling::{checked_budget, finalize, SampleResult, SampleSpec};
use crate::svp::{Granularity, ImportanceTable};

/// Keep the highest-importance points.
///
/// Interaction granularity sorts interactions by importance; user
/// granularity keeps whole users in importance order and truncates the
/// final one uniformly at random. Ties break by a seeded shuffle so that
/// equal-importance points are picked without positional bias.
pub fn svp_sample(
    train: &Dataset,
    table: &ImportanceTable,
    spec: &SampleSpec,
) -> Result<SampleResult> {
    if table.interaction.len() != train.len() {
        return Err(Error::Parameter(format!(
            "importance table covers {} interactions, train has {}",
            table.interaction.len(),
            train.len()
        )));
    }
    let budget = checked_budget(train, spec)?;
    let mut rng = rng_from_seed(spec.seed);
    let strategy = table.strategy_id();

    let kept = match table.granularity {
        Granularity::Interaction => {
            let mut order: Vec<usize> = (0..train.len()).collect();
            order.shuffle(&mut rng);
            // stable sort keeps the shuffled order within importance ties
            order.sort_by(|&a, &b| table.interaction[b].total_cmp(&table.interaction[a]));
            order.truncate(budget);
            order
        }
        Granularity::User => {
            let mut users: Vec<u32> =
                (0..train.num_users()).filter(|&u| !train.user_history(u).is_empty()).collect();
            users.shuffle(&mut rng);
            users.sort_by(|&a, &b| table.user[b as usize].total_cmp(&table.user[a as usize]));
            let mut kept = Vec::with_capacity(budget);
            for user in users {
                let history = train.user_history(user);
                let remaining = budget - kept.len();
                if history.len() <= remaining {
                    kept.extend_from_slice(history);
                } else {
                    let picks = rand::seq::index::sample(&mut rng, history.len(), remaining);
                    kept.extend(picks.into_iter().map(|pos| history[pos]));
                }
                if kept.len() == budget {
                    break;
                }
            }
            kept
        }
    };

    Ok(finalize(train, kept, &strategy, spec, budget, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svp::ProxyKind;
    use crate::testutil::{interaction_multiset, toy_dataset};

    fn table_for(train: &Dataset, scores: Vec<f64>, granularity: Granularity) -> ImportanceTable {
        let users: Vec<u32> = train.interactions().iter().map(|it| it.user).collect();
        let items: Vec<u32> = train.interactions().iter().map(|it| it.item).collect();
        let mut sums = vec![0.0; train.num_users() as usize];
        let mut counts = vec![0usize; train.num_users() as usize];
        for (idx, &u) in users.iter().enumerate() {
            sums[u as usize] += scores[idx];
            counts[u as usize] += 1;
        }
        let user = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect();
        ImportanceTable {
            proxy: ProxyKind::Mf,
            granularity,
            propensity_corrected: false,
            users,
            items,
            interaction: scores,
            user,
            propensities: Vec::new(),
        }
    }

    #[test]
    fn top_k_by_importance() {
        let train = toy_dataset(&[(0, 0, 1.0, 0), (0, 1, 1.0, 1), (0, 2, 1.0, 2)]);
        // importances a:3, b:1, c:2 -> budget 2 keeps {a, c}
        let table = table_for(&train, vec![3.0, 1.0, 2.0], Granularity::Interaction);
        let res = svp_sample(&train, &table, &SampleSpec::new(66.0, 1)).unwrap();
        let items: Vec<u32> = res.retained.interactions().iter().map(|it| it.item).collect();
        assert_eq!(items, vec![0, 2]);
    }

    #[test]
    fn p100_is_identity() {
        let train = toy_dataset(&[(0, 0, 1.0, 0), (0, 1, 1.0, 1), (1, 0, 1.0, 2)]);
        let table = table_for(&train, vec![0.5, 0.5, 0.5], Granularity::Interaction);
        let res = svp_sample(&train, &table, &SampleSpec::new(100.0, 7)).unwrap();
        assert_eq!(interaction_multiset(&res.retained), interaction_multiset(&train));
    }

    #[test]
    fn scaling_importances_leaves_selection_unchanged() {
        let rows: Vec<(u32, u32, f64, i64)> =
            (0..6u32).flat_map(|u| (0..3u32).map(move |j| (u, j, 1.0, j as i64))).collect();
        let train = toy_dataset(&rows);
        let scores: Vec<f64> = (0..train.len()).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let scaled: Vec<f64> = scores.iter().map(|v| v * 42.0).collect();
        for granularity in [Granularity::Interaction, Granularity::User] {
            let a = svp_sample(
                &train,
                &table_for(&train, scores.clone(), granularity),
                &SampleSpec::new(40.0, 3),
            )
            .unwrap();
            let b = svp_sample(
                &train,
                &table_for(&train, scaled.clone(), granularity),
                &SampleSpec::new(40.0, 3),
            )
            .unwrap();
            assert_eq!(a.retained.interactions(), b.retained.interactions());
        }
    }

    #[test]
    fn user_granularity_keeps_important_users_whole() {
        let rows = vec![
            (0, 0, 1.0, 0),
            (0, 1, 1.0, 1),
            (1, 0, 1.0, 0),
            (1, 1, 1.0, 1),
            (2, 2, 1.0, 0),
            (2, 3, 1.0, 1),
        ];
        let train = toy_dataset(&rows);
        // user 1 most important, then user 2, then user 0
        let table = table_for(&train, vec![0.1, 0.1, 9.0, 9.0, 5.0, 5.0], Granularity::User);
        let res = svp_sample(&train, &table, &SampleSpec::new(50.0, 5)).unwrap();
        assert_eq!(res.retained.len(), 3);
        assert_eq!(res.retained.user_history(1).len(), 2);
        assert_eq!(res.retained.user_history(0).len(), 0);
        assert_eq!(res.retained.user_history(2).len(), 1);
    }

    #[test]
    fn budget_above_train_is_an_error() {
        let train = toy_dataset(&[(0, 0, 1.0, 0)]);
        let table = table_for(&train, vec![1.0], Granularity::Interaction);
        assert!(svp_sample(&train, &table, &SampleSpec::new(150.0, 0)).is_err());
    }

    #[test]
    fn strategy_ids_encode_variant() {
        let train = toy_dataset(&[(0, 0, 1.0, 0)]);
        let table = table_for(&train, vec![1.0], Granularity::Interaction);
        assert_eq!(table.strategy_id(), "svp-cf:mf:interaction");
        let prop = ImportanceTable { propensity_corrected: true, ..table };
        assert_eq!(prop.strategy_id(), "svp-cf-prop:mf:interaction");
    }
}
