//! Interaction logs: loading, validation, filtering, splitting, and the
//! bipartite interaction graph.
//!
//! A [`Dataset`] is an immutable list of `(user, item, rating, timestamp)`
//! events with dense contiguous indices on both sides, per-user histories
//! ordered by time, and the raw-ID maps kept around for export. Splits and
//! subsamples share the parent's index space so that models trained on a
//! subset stay aligned with the untouched validation/test sets.

mod csv_io;
mod filter;
mod graph;
mod split;

pub use csv_io::{export_csv, export_id_maps, ingest_csv, CsvSchema};
pub use filter::filter_min_interactions;
pub use graph::{build_graph, BipartiteGraph, GraphEdge};
pub use split::{split_leave_one_last, split_random, SplitBundle};

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// One observed user-item event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub rating: f64,
    pub timestamp: i64,
}

/// Which feedback signal a pipeline treats the interactions as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Explicit,
    Implicit,
    Sequential,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Explicit, Scenario::Implicit, Scenario::Sequential];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Explicit => "explicit",
            Scenario::Implicit => "implicit",
            Scenario::Sequential => "sequential",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Scenario::Explicit),
            "implicit" => Ok(Scenario::Implicit),
            "sequential" => Ok(Scenario::Sequential),
            other => Err(Error::Parameter(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Bijection between raw entity labels and dense indices.
#[derive(Debug, Clone, Default)]
pub struct IdMap {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn get_or_insert(&mut self, label: &str) -> u32 {
        if let Some(&idx) = self.index.get(label) {
            return idx;
        }
        let idx = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), idx);
        idx
    }

    pub fn label(&self, idx: u32) -> Option<&str> {
        self.labels.get(idx as usize).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Raw-ID maps for both sides of the interaction matrix.
#[derive(Debug, Clone, Default)]
pub struct IdMaps {
    pub users: IdMap,
    pub items: IdMap,
}

/// An immutable interaction log with dense ids and per-user time-ordered
/// histories.
///
/// Datasets produced by [`ingest_csv`] and [`filter_min_interactions`]
/// guarantee that every user and item index occurs in at least one
/// interaction. Views produced by [`Dataset::subset`] (splits, subsamples)
/// deliberately keep the parent's `num_users`/`num_items` and id maps even
/// when some entities lose all their events, so indices stay comparable
/// across train/validation/test and across samples.
#[derive(Debug, Clone)]
pub struct Dataset {
    interactions: Vec<Interaction>,
    num_users: u32,
    num_items: u32,
    user_histories: Vec<Vec<usize>>,
    id_maps: Arc<IdMaps>,
}

impl Dataset {
    pub fn from_parts(
        interactions: Vec<Interaction>,
        num_users: u32,
        num_items: u32,
        id_maps: Arc<IdMaps>,
    ) -> Result<Self> {
        for (pos, it) in interactions.iter().enumerate() {
            if it.user >= num_users {
                return Err(Error::UnknownIndex { entity: "user", index: it.user as usize });
            }
            if it.item >= num_items {
                return Err(Error::UnknownIndex { entity: "item", index: it.item as usize });
            }
            if it.timestamp < 0 {
                return Err(Error::Parse {
                    line: pos + 1,
                    message: format!("negative timestamp {}", it.timestamp),
                });
            }
        }
        let user_histories = build_histories(&interactions, num_users);
        Ok(Self { interactions, num_users, num_items, user_histories, id_maps })
    }

    /// View over a subset of this dataset's interactions. Keeps the parent
    /// index space and id maps; `indices` need not be sorted.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut sorted: Vec<usize> = indices.to_vec();
        sorted.sort_unstable();
        let interactions: Vec<Interaction> =
            sorted.iter().map(|&i| self.interactions[i]).collect();
        let user_histories = build_histories(&interactions, self.num_users);
        Dataset {
            interactions,
            num_users: self.num_users,
            num_items: self.num_items,
            user_histories,
            id_maps: Arc::clone(&self.id_maps),
        }
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn num_users(&self) -> u32 {
        self.num_users
    }

    pub fn num_items(&self) -> u32 {
        self.num_items
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn interaction(&self, idx: usize) -> &Interaction {
        &self.interactions[idx]
    }

    /// Interaction indices of one user, ordered by timestamp (ties keep
    /// input order).
    pub fn user_history(&self, user: u32) -> &[usize] {
        &self.user_histories[user as usize]
    }

    pub fn id_maps(&self) -> &IdMaps {
        &self.id_maps
    }

    pub fn id_maps_arc(&self) -> Arc<IdMaps> {
        Arc::clone(&self.id_maps)
    }

    /// Per-user interaction counts, indexed by user.
    pub fn user_counts(&self) -> Vec<u32> {
        self.user_histories.iter().map(|h| h.len() as u32).collect()
    }

    /// Per-item interaction counts, indexed by item.
    pub fn item_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.num_items as usize];
        for it in &self.interactions {
            counts[it.item as usize] += 1;
        }
        counts
    }
}

fn build_histories(interactions: &[Interaction], num_users: u32) -> Vec<Vec<usize>> {
    let mut histories = vec![Vec::new(); num_users as usize];
    for (idx, it) in interactions.iter().enumerate() {
        histories[it.user as usize].push(idx);
    }
    for history in &mut histories {
        // stable sort keeps input order on timestamp ties
        history.sort_by_key(|&idx| interactions[idx].timestamp);
    }
    histories
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::toy_dataset;

    #[test]
    fn histories_sorted_by_time_with_input_order_ties() {
        let d = toy_dataset(&[(0, 0, 1.0, 5), (0, 1, 1.0, 2), (0, 2, 1.0, 5), (1, 0, 1.0, 1)]);
        assert_eq!(d.user_history(0), &[1, 0, 2]);
        assert_eq!(d.user_history(1), &[3]);
    }

    #[test]
    fn subset_keeps_index_space() {
        let d = toy_dataset(&[(0, 0, 1.0, 0), (1, 1, 1.0, 1), (2, 2, 1.0, 2)]);
        let s = d.subset(&[2, 0]);
        assert_eq!(s.len(), 2);
        assert_eq!(s.num_users(), 3);
        assert_eq!(s.num_items(), 3);
        assert!(s.user_history(1).is_empty());
        // subset indices are applied in sorted order
        assert_eq!(s.interaction(0).user, 0);
        assert_eq!(s.interaction(1).user, 2);
    }

    #[test]
    fn from_parts_rejects_out_of_range() {
        let maps = Arc::new(IdMaps::default());
        let bad = Dataset::from_parts(
            vec![Interaction { user: 1, item: 0, rating: 1.0, timestamp: 0 }],
            1,
            1,
            maps,
        );
        assert!(bad.is_err());
    }
}
