//! The user-item bipartite interaction graph.

use std::collections::HashMap;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// One distinct `(user, item)` pair; parallel interactions are collapsed
/// into `interactions`, whose length is the edge multiplicity.
#[derive(Debug, Clone)]
pub struct GraphEdge {
    pub user: u32,
    pub item: u32,
    /// Indices into the source dataset's interaction list.
    pub interactions: Vec<usize>,
}

impl GraphEdge {
    pub fn multiplicity(&self) -> usize {
        self.interactions.len()
    }
}

/// Undirected bipartite graph over the dataset's full index space.
///
/// Node ids place users first: node `u` for user `u`, node
/// `num_users + i` for item `i`. Entities without any interaction in the
/// source (possible for split views) become isolated nodes.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    num_users: u32,
    num_items: u32,
    edges: Vec<GraphEdge>,
    adjacency: Vec<Vec<u32>>,
    total_multiplicity: usize,
}

impl BipartiteGraph {
    pub fn num_users(&self) -> u32 {
        self.num_users
    }

    pub fn num_items(&self) -> u32 {
        self.num_items
    }

    pub fn node_count(&self) -> usize {
        (self.num_users + self.num_items) as usize
    }

    pub fn user_node(&self, user: u32) -> usize {
        user as usize
    }

    pub fn item_node(&self, item: u32) -> usize {
        (self.num_users + item) as usize
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    /// Edge ids incident to a node.
    pub fn incident_edges(&self, node: usize) -> &[u32] {
        &self.adjacency[node]
    }

    pub fn other_endpoint(&self, edge_id: u32, node: usize) -> usize {
        let edge = &self.edges[edge_id as usize];
        let user_node = self.user_node(edge.user);
        if node == user_node {
            self.item_node(edge.item)
        } else {
            user_node
        }
    }

    /// Sum of multiplicities of edges incident to a node.
    pub fn weighted_degree(&self, node: usize) -> usize {
        self.adjacency[node].iter().map(|&e| self.edges[e as usize].multiplicity()).sum()
    }

    /// Sum of all edge multiplicities; equals the source interaction count.
    pub fn total_multiplicity(&self) -> usize {
        self.total_multiplicity
    }
}

/// Build the bipartite graph mirroring a train set.
pub fn build_graph(train: &Dataset) -> Result<BipartiteGraph> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("cannot build a graph from an empty train set".into()));
    }

    let mut by_pair: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (idx, it) in train.interactions().iter().enumerate() {
        by_pair.entry((it.user, it.item)).or_default().push(idx);
    }

    let mut pairs: Vec<(u32, u32)> = by_pair.keys().copied().collect();
    pairs.sort_unstable();

    let num_users = train.num_users();
    let num_items = train.num_items();
    let mut edges = Vec::with_capacity(pairs.len());
    let mut adjacency = vec![Vec::new(); (num_users + num_items) as usize];
    let mut total = 0usize;
    for (user, item) in pairs {
        let interactions = by_pair.remove(&(user, item)).unwrap();
        total += interactions.len();
        let edge_id = edges.len() as u32;
        adjacency[user as usize].push(edge_id);
        adjacency[(num_users + item) as usize].push(edge_id);
        edges.push(GraphEdge { user, item, interactions });
    }

    Ok(BipartiteGraph { num_users, num_items, edges, adjacency, total_multiplicity: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::toy_dataset;

    #[test]
    fn one_user_two_items() {
        let d = toy_dataset(&[(0, 0, 1.0, 0), (0, 1, 1.0, 1)]);
        let g = build_graph(&d).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.total_multiplicity(), 2);
    }

    #[test]
    fn duplicate_pair_collapses_with_multiplicity() {
        let d = toy_dataset(&[(0, 0, 1.0, 0), (0, 0, 2.0, 1), (0, 1, 1.0, 2)]);
        let g = build_graph(&d).unwrap();
        assert_eq!(g.edges().len(), 2);
        let dup = g.edges().iter().find(|e| e.item == 0).unwrap();
        assert_eq!(dup.multiplicity(), 2);
        assert_eq!(g.total_multiplicity(), d.len());
    }

    #[test]
    fn edges_connect_users_to_items_only() {
        let d = toy_dataset(&[(0, 0, 1.0, 0), (1, 0, 1.0, 1), (1, 1, 1.0, 2)]);
        let g = build_graph(&d).unwrap();
        for e in g.edges() {
            assert!(g.user_node(e.user) < g.num_users() as usize);
            assert!(g.item_node(e.item) >= g.num_users() as usize);
        }
    }

    #[test]
    fn empty_train_is_an_error() {
        let d = toy_dataset(&[(0, 0, 1.0, 0)]);
        let empty = d.subset(&[]);
        assert!(build_graph(&empty).is_err());
    }
}
