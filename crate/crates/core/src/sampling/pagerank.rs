//! Pagerank by power iteration over the bipartite graph.

use crate::data::BipartiteGraph;

/// Multiplicity-weighted pagerank. Dangling nodes spread their mass
/// uniformly. Returns the score vector (summing to one) and whether the L1
/// change dropped below `tol` within `max_iter` sweeps.
pub fn pagerank(
    graph: &BipartiteGraph,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, bool) {
    let n = graph.node_count();
    if n == 0 {
        return (Vec::new(), true);
    }

    let weighted_degree: Vec<f64> =
        (0..n).map(|node| graph.weighted_degree(node) as f64).collect();

    let uniform = 1.0 / n as f64;
    let mut rank = vec![uniform; n];
    let mut next = vec![0.0; n];
    let mut converged = false;

    for _ in 0..max_iter {
        let dangling: f64 =
            (0..n).filter(|&v| weighted_degree[v] == 0.0).map(|v| rank[v]).sum();
        let base = (1.0 - damping) * uniform + damping * dangling * uniform;
        next.iter_mut().for_each(|x| *x = base);

        for (node, &degree) in weighted_degree.iter().enumerate() {
            if degree == 0.0 {
                continue;
            }
            let share = damping * rank[node] / degree;
            for &edge_id in graph.incident_edges(node) {
                let edge = &graph.edges()[edge_id as usize];
                let other = graph.other_endpoint(edge_id, node);
                next[other] += share * edge.multiplicity() as f64;
            }
        }

        let diff: f64 = rank.iter().zip(next.iter()).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if diff < tol {
            converged = true;
            break;
        }
    }

    (rank, converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_graph;
    use crate::testutil::toy_dataset;

    #[test]
    fn two_node_symmetric_graph_is_half_half() {
        let d = toy_dataset(&[(0, 0, 1.0, 0)]);
        let g = build_graph(&d).unwrap();
        let (scores, converged) = pagerank(&g, 0.85, 1e-8, 100);
        assert!(converged);
        assert!((scores[0] - 0.5).abs() < 1e-12);
        assert!((scores[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn star_center_has_max_score() {
        // one user interacting with five items
        let rows: Vec<(u32, u32, f64, i64)> =
            (0..5u32).map(|i| (0, i, 1.0, i as i64)).collect();
        let d = toy_dataset(&rows);
        let g = build_graph(&d).unwrap();
        let (scores, _) = pagerank(&g, 0.85, 1e-8, 100);
        let center = scores[0];
        assert!(scores[1..].iter().all(|&s| s < center));
    }

    #[test]
    fn scores_sum_to_one() {
        let rows: Vec<(u32, u32, f64, i64)> = (0..7u32)
            .flat_map(|u| (0..3u32).map(move |j| (u, (u + j) % 6, 1.0, j as i64)))
            .collect();
        let d = toy_dataset(&rows);
        let g = build_graph(&d).unwrap();
        let (scores, _) = pagerank(&g, 0.85, 1e-8, 100);
        let sum: f64 = scores.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }
}
