//! Shared helpers for unit tests.

use std::sync::Arc;

use crate::data::{Dataset, IdMaps, Interaction};

/// Build a dataset from `(user, item, rating, timestamp)` rows with synthetic
/// raw labels `u<n>` / `i<n>`.
pub(crate) fn toy_dataset(rows: &[(u32, u32, f64, i64)]) -> Dataset {
    let mut num_users = 0;
    let mut num_items = 0;
    for &(u, i, _, _) in rows {
        num_users = num_users.max(u + 1);
        num_items = num_items.max(i + 1);
    }
    let mut maps = IdMaps::default();
    for u in 0..num_users {
        maps.users.get_or_insert(&format!("u{u}"));
    }
    for i in 0..num_items {
        maps.items.get_or_insert(&format!("i{i}"));
    }
    let interactions = rows
        .iter()
        .map(|&(user, item, rating, timestamp)| Interaction { user, item, rating, timestamp })
        .collect();
    Dataset::from_parts(interactions, num_users, num_items, Arc::new(maps)).unwrap()
}

/// Sorted multiset fingerprint of a dataset's interactions.
pub(crate) fn interaction_multiset(d: &Dataset) -> Vec<(u32, u32, u64, i64)> {
    let mut rows: Vec<(u32, u32, u64, i64)> = d
        .interactions()
        .iter()
        .map(|it| (it.user, it.item, it.rating.to_bits(), it.timestamp))
        .collect();
    rows.sort_unstable();
    rows
}
