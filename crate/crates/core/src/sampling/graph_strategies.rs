//! Graph-granularity strategies over the bipartite interaction graph.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{BipartiteGraph, Dataset};
use crate::error::Result;
use crate::rng::rng_from_seed;
use crate::sampling::{checked_budget, finalize, pagerank, SampleResult, SampleSpec};

/// Keep all interactions of the top pagerank nodes until the budget is met;
/// the final node's contribution is truncated uniformly at random.
pub fn sample_centrality(
    train: &Dataset,
    graph: &BipartiteGraph,
    spec: &SampleSpec,
) -> Result<SampleResult> {
    let budget = checked_budget(train, spec)?;
    let mut rng = rng_from_seed(spec.seed);

    let (scores, converged) =
        pagerank(graph, spec.params.damping, spec.params.pagerank_tol, spec.params.pagerank_max_iter);
    let mut flags = Vec::new();
    if !converged {
        flags.push("pagerank-not-converged".to_owned());
    }

    let mut order: Vec<usize> = (0..graph.node_count()).collect();
    order.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });

    let mut edge_taken = vec![false; graph.edges().len()];
    let mut kept: Vec<usize> = Vec::with_capacity(budget);
    'outer: for node in order {
        let mut added: Vec<usize> = Vec::new();
        for &edge_id in graph.incident_edges(node) {
            if !edge_taken[edge_id as usize] {
                edge_taken[edge_id as usize] = true;
                added.extend_from_slice(&graph.edges()[edge_id as usize].interactions);
            }
        }
        if kept.len() + added.len() >= budget {
            let need = budget - kept.len();
            added.shuffle(&mut rng);
            kept.extend_from_slice(&added[..need]);
            break 'outer;
        }
        kept.extend_from_slice(&added);
    }

    Ok(finalize(train, kept, "centrality", spec, budget, flags))
}

/// Random walks with restart; an interaction is retained once both of its
/// endpoints have been visited. The walk restarts from a fresh node when it
/// stops discovering anything, and the increment that crosses the budget is
/// trimmed uniformly at random.
pub fn sample_random_walk(
    train: &Dataset,
    graph: &BipartiteGraph,
    spec: &SampleSpec,
) -> Result<SampleResult> {
    let budget = checked_budget(train, spec)?;
    let mut rng = rng_from_seed(spec.seed);

    // steps without a new visit before the walk counts as absorbed
    const STALL_LIMIT: usize = 1000;

    let n = graph.node_count();
    let mut visited = vec![false; n];
    let mut edge_taken = vec![false; graph.edges().len()];
    let mut kept: Vec<usize> = Vec::with_capacity(budget);

    let visit = |node: usize,
                 visited: &mut Vec<bool>,
                 edge_taken: &mut Vec<bool>,
                 graph: &BipartiteGraph| {
        visited[node] = true;
        let mut added = Vec::new();
        for &edge_id in graph.incident_edges(node) {
            if edge_taken[edge_id as usize] {
                continue;
            }
            if visited[graph.other_endpoint(edge_id, node)] {
                edge_taken[edge_id as usize] = true;
                added.extend_from_slice(&graph.edges()[edge_id as usize].interactions);
            }
        }
        added
    };

    let pick_start = |visited: &[bool], rng: &mut ChaCha8Rng| -> Option<usize> {
        let candidates: Vec<usize> = (0..n)
            .filter(|&v| !visited[v] && !graph.incident_edges(v).is_empty())
            .collect();
        candidates.choose(rng).copied()
    };

    let mut start = match pick_start(&visited, &mut rng) {
        Some(s) => s,
        None => return Ok(finalize(train, kept, "random-walk", spec, budget, Vec::new())),
    };
    let mut added = visit(start, &mut visited, &mut edge_taken, graph);
    push_trimmed(&mut kept, added, budget, &mut rng);

    let mut current = start;
    let mut stalled = 0usize;
    while kept.len() < budget {
        if rng.gen::<f64>() < spec.params.restart_prob {
            current = start;
        } else {
            current = weighted_neighbor(graph, current, &mut rng).unwrap_or(start);
        }
        if visited[current] {
            stalled += 1;
        } else {
            added = visit(current, &mut visited, &mut edge_taken, graph);
            push_trimmed(&mut kept, added, budget, &mut rng);
            stalled = 0;
        }
        if stalled > STALL_LIMIT {
            // absorbed; jump to an unvisited region (one must exist while
            // the budget is unmet, since full visitation retains everything)
            match pick_start(&visited, &mut rng) {
                Some(fresh) => {
                    start = fresh;
                    current = fresh;
                    added = visit(fresh, &mut visited, &mut edge_taken, graph);
                    push_trimmed(&mut kept, added, budget, &mut rng);
                    stalled = 0;
                }
                None => break,
            }
        }
    }

    Ok(finalize(train, kept, "random-walk", spec, budget, Vec::new()))
}

/// Snowball sampling by burning edges outward from random ignition points.
///
/// Each newly burned node burns a geometric number (mean
/// `p_f / (1 - p_f)`) of previously unvisited neighbors. A dead fire
/// reignites at a fresh unvisited node; once every node has been visited
/// with budget to spare, the visited state resets so later fires can reach
/// edges the earlier ones skipped. After several fruitless fires the
/// remainder is filled uniformly from unburned edges and flagged.
pub fn sample_forest_fire(
    train: &Dataset,
    graph: &BipartiteGraph,
    spec: &SampleSpec,
) -> Result<SampleResult> {
    let budget = checked_budget(train, spec)?;
    let mut rng = rng_from_seed(spec.seed);

    const MAX_FRUITLESS_FIRES: usize = 32;

    let n = graph.node_count();
    let mut visited = vec![false; n];
    let mut burned = vec![false; graph.edges().len()];
    let mut kept: Vec<usize> = Vec::with_capacity(budget);
    let mut flags = Vec::new();
    let mut fruitless = 0usize;

    'fires: while kept.len() < budget {
        let unvisited: Vec<usize> = (0..n)
            .filter(|&v| !visited[v] && !graph.incident_edges(v).is_empty())
            .collect();
        let start = match unvisited.choose(&mut rng) {
            Some(&s) => s,
            None => {
                visited.iter_mut().for_each(|v| *v = false);
                continue 'fires;
            }
        };

        let burned_before = kept.len();
        visited[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            let fanout = geometric(&mut rng, spec.params.burn_prob);
            if fanout == 0 {
                continue;
            }
            let mut frontier: Vec<u32> = graph
                .incident_edges(node)
                .iter()
                .copied()
                .filter(|&e| !visited[graph.other_endpoint(e, node)])
                .collect();
            frontier.shuffle(&mut rng);
            for &edge_id in frontier.iter().take(fanout) {
                let neighbor = graph.other_endpoint(edge_id, node);
                if visited[neighbor] {
                    continue; // frontier may hold parallel routes to one node
                }
                visited[neighbor] = true;
                queue.push_back(neighbor);
                if !burned[edge_id as usize] {
                    burned[edge_id as usize] = true;
                    let added = graph.edges()[edge_id as usize].interactions.clone();
                    push_trimmed(&mut kept, added, budget, &mut rng);
                    if kept.len() == budget {
                        break;
                    }
                }
            }
            if kept.len() == budget {
                break;
            }
        }

        if kept.len() == burned_before {
            fruitless += 1;
            if fruitless > MAX_FRUITLESS_FIRES {
                let mut rest: Vec<usize> = (0..graph.edges().len())
                    .filter(|&e| !burned[e])
                    .flat_map(|e| graph.edges()[e].interactions.iter().copied())
                    .collect();
                rest.shuffle(&mut rng);
                let need = budget - kept.len();
                kept.extend_from_slice(&rest[..need]);
                flags.push("forest-fire-filled".to_owned());
                break;
            }
        } else {
            fruitless = 0;
        }
    }

    Ok(finalize(train, kept, "forest-fire", spec, budget, flags))
}

/// Append `added`, trimming it uniformly at random if it crosses the budget.
fn push_trimmed(kept: &mut Vec<usize>, mut added: Vec<usize>, budget: usize, rng: &mut ChaCha8Rng) {
    let room = budget - kept.len();
    if added.len() > room {
        added.shuffle(rng);
        added.truncate(room);
    }
    kept.extend_from_slice(&added);
}

/// Pick an incident interaction uniformly, i.e. a neighbor weighted by edge
/// multiplicity.
fn weighted_neighbor(graph: &BipartiteGraph, node: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
    let total = graph.weighted_degree(node);
    if total == 0 {
        return None;
    }
    let mut ticket = rng.gen_range(0..total);
    for &edge_id in graph.incident_edges(node) {
        let m = graph.edges()[edge_id as usize].multiplicity();
        if ticket < m {
            return Some(graph.other_endpoint(edge_id, node));
        }
        ticket -= m;
    }
    None
}

/// Geometric draw with `P(X = k) = (1 - p) p^k`.
fn geometric(rng: &mut ChaCha8Rng, p: f64) -> usize {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return usize::MAX;
    }
    let u: f64 = rng.gen::<f64>();
    ((1.0 - u).ln() / p.ln()).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_graph;
    use crate::sampling::budget;
    use crate::testutil::{interaction_multiset, toy_dataset};

    fn train_and_graph() -> (Dataset, BipartiteGraph) {
        let rows: Vec<(u32, u32, f64, i64)> = (0..8u32)
            .flat_map(|u| (0..4u32).map(move |j| (u, (u + 2 * j) % 9, 1.0, j as i64)))
            .collect();
        let train = toy_dataset(&rows);
        let graph = build_graph(&train).unwrap();
        (train, graph)
    }

    #[test]
    fn centrality_hits_budget_exactly() {
        let (train, graph) = train_and_graph();
        for percent in [80.0, 40.0, 10.0] {
            let res = sample_centrality(&train, &graph, &SampleSpec::new(percent, 5)).unwrap();
            assert_eq!(res.retained.len(), budget(percent, train.len()));
        }
    }

    #[test]
    fn random_walk_single_edge_graph() {
        let train = toy_dataset(&[(0, 0, 1.0, 0)]);
        let graph = build_graph(&train).unwrap();
        let res = sample_random_walk(&train, &graph, &SampleSpec::new(100.0, 1)).unwrap();
        assert_eq!(res.retained.len(), 1);
    }

    #[test]
    fn random_walk_full_budget_is_identity() {
        let (train, graph) = train_and_graph();
        let res = sample_random_walk(&train, &graph, &SampleSpec::new(100.0, 2)).unwrap();
        assert_eq!(interaction_multiset(&res.retained), interaction_multiset(&train));
    }

    #[test]
    fn random_walk_deterministic() {
        let (train, graph) = train_and_graph();
        let a = sample_random_walk(&train, &graph, &SampleSpec::new(30.0, 11)).unwrap();
        let b = sample_random_walk(&train, &graph, &SampleSpec::new(30.0, 11)).unwrap();
        assert_eq!(a.retained.interactions(), b.retained.interactions());
    }

    #[test]
    fn forest_fire_identity_and_exactness() {
        let (train, graph) = train_and_graph();
        let res = sample_forest_fire(&train, &graph, &SampleSpec::new(100.0, 9)).unwrap();
        assert_eq!(interaction_multiset(&res.retained), interaction_multiset(&train));
        for percent in [60.0, 20.0] {
            let res = sample_forest_fire(&train, &graph, &SampleSpec::new(percent, 9)).unwrap();
            assert_eq!(res.retained.len(), budget(percent, train.len()));
        }
    }

    #[test]
    fn forest_fire_burns_whole_path_component() {
        // path graph: u0 - i0 - u1 - i1 - u2 - i2
        let train = toy_dataset(&[
            (0, 0, 1.0, 0),
            (1, 0, 1.0, 1),
            (1, 1, 1.0, 2),
            (2, 1, 1.0, 3),
            (2, 2, 1.0, 4),
        ]);
        let graph = build_graph(&train).unwrap();
        let mut spec = SampleSpec::new(100.0, 4);
        spec.params.burn_prob = 0.999;
        let res = sample_forest_fire(&train, &graph, &spec).unwrap();
        assert_eq!(res.retained.len(), train.len());
    }

    #[test]
    fn geometric_mean_matches_burn_probability() {
        let mut rng = rng_from_seed(8);
        let draws = 20_000;
        let mean: f64 =
            (0..draws).map(|_| geometric(&mut rng, 0.7) as f64).sum::<f64>() / draws as f64;
        assert!((mean - 0.7 / 0.3).abs() < 0.1, "mean {mean}");
    }
}
