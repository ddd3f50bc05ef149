//! Minimum-activity user filter.

use std::sync::Arc;

use crate::data::{Dataset, IdMaps, Interaction};
use crate::error::{Error, Result};

/// Remove users with fewer than `k` interactions, in a single pass.
///
/// Only users are filtered; items are never removed for low activity, but
/// items left with zero interactions are dropped from the index. Both sides
/// are re-densified, keeping relative order of the surviving raw labels.
/// The pass is not iterated, so users that fall below `k` because of item
/// re-indexing cannot occur (items keep all surviving interactions), and
/// the operation is idempotent for a fixed `k`.
pub fn filter_min_interactions(dataset: &Dataset, k: u32) -> Result<Dataset> {
    if k < 1 {
        return Err(Error::Parameter(format!("min-interaction threshold must be >= 1, got {k}")));
    }

    let keep_user: Vec<bool> =
        (0..dataset.num_users()).map(|u| dataset.user_history(u).len() >= k as usize).collect();

    let mut item_seen = vec![false; dataset.num_items() as usize];
    for it in dataset.interactions() {
        if keep_user[it.user as usize] {
            item_seen[it.item as usize] = true;
        }
    }

    let mut user_remap = vec![u32::MAX; dataset.num_users() as usize];
    let mut item_remap = vec![u32::MAX; dataset.num_items() as usize];
    let mut maps = IdMaps::default();
    for (u, keep) in keep_user.iter().enumerate() {
        if *keep {
            let label = dataset.id_maps().users.label(u as u32).unwrap_or_default().to_owned();
            user_remap[u] = maps.users.get_or_insert(&label);
        }
    }
    for (i, seen) in item_seen.iter().enumerate() {
        if *seen {
            let label = dataset.id_maps().items.label(i as u32).unwrap_or_default().to_owned();
            item_remap[i] = maps.items.get_or_insert(&label);
        }
    }

    let interactions: Vec<Interaction> = dataset
        .interactions()
        .iter()
        .filter(|it| keep_user[it.user as usize])
        .map(|it| Interaction {
            user: user_remap[it.user as usize],
            item: item_remap[it.item as usize],
            ..*it
        })
        .collect();

    if interactions.is_empty() {
        return Err(Error::EmptyDataset(format!("no user has {k} or more interactions")));
    }

    let num_users = maps.users.len() as u32;
    let num_items = maps.items.len() as u32;
    Dataset::from_parts(interactions, num_users, num_items, Arc::new(maps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::toy_dataset;

    #[test]
    fn drops_users_below_threshold() {
        // u0 has 5 interactions, u1 has 2
        let d = toy_dataset(&[
            (0, 0, 1.0, 0),
            (0, 1, 1.0, 1),
            (0, 2, 1.0, 2),
            (0, 0, 1.0, 3),
            (0, 1, 1.0, 4),
            (1, 3, 1.0, 5),
            (1, 4, 1.0, 6),
        ]);
        let filtered = filter_min_interactions(&d, 3).unwrap();
        assert_eq!(filtered.num_users(), 1);
        assert_eq!(filtered.len(), 5);
        // items 3 and 4 lost all interactions and are re-densified away
        assert_eq!(filtered.num_items(), 3);
        assert_eq!(filtered.id_maps().users.label(0), Some("u0"));
    }

    #[test]
    fn identity_when_everyone_qualifies() {
        let d = toy_dataset(&[(0, 0, 1.0, 0), (0, 1, 1.0, 1), (1, 0, 1.0, 2), (1, 1, 1.0, 3)]);
        let filtered = filter_min_interactions(&d, 2).unwrap();
        assert_eq!(filtered.len(), d.len());
        assert_eq!(filtered.num_users(), d.num_users());
        assert_eq!(filtered.num_items(), d.num_items());
    }

    #[test]
    fn k_one_is_identity() {
        let d = toy_dataset(&[(0, 0, 1.0, 0), (1, 1, 1.0, 1)]);
        let filtered = filter_min_interactions(&d, 1).unwrap();
        assert_eq!(filtered.len(), 2);
    }

    #[test]
    fn idempotent_for_fixed_k() {
        let d = toy_dataset(&[
            (0, 0, 1.0, 0),
            (0, 1, 1.0, 1),
            (0, 2, 1.0, 2),
            (1, 0, 1.0, 3),
            (2, 1, 1.0, 4),
            (2, 2, 1.0, 5),
            (2, 0, 1.0, 6),
        ]);
        let once = filter_min_interactions(&d, 3).unwrap();
        let twice = filter_min_interactions(&once, 3).unwrap();
        assert_eq!(once.len(), twice.len());
        assert_eq!(once.num_users(), twice.num_users());
        assert_eq!(once.num_items(), twice.num_items());
    }

    #[test]
    fn empty_result_is_an_error() {
        let d = toy_dataset(&[(0, 0, 1.0, 0), (1, 1, 1.0, 1)]);
        assert!(matches!(filter_min_interactions(&d, 5), Err(Error::EmptyDataset(_))));
    }
}
