//! Synthetic interaction logs with latent structure and long-tail
//! popularity, sized for desk-scale experiments.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{Dataset, IdMaps, Interaction};
use crate::error::{Error, Result};
use crate::rng::{child_seed, rng_from_seed};
use crate::svp::PropensityParams;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticConfig {
    pub users: usize,
    pub items: usize,
    /// Total interactions to generate (each user gets at least three).
    pub interactions: usize,
    pub latent_dim: usize,
    /// Zipf exponent for item popularity; 0 gives near-uniform counts.
    pub popularity_exponent: f64,
    /// Zipf exponent for user activity.
    pub user_activity_exponent: f64,
    /// Rating noise sigma around the latent affinity.
    pub noise: f64,
    pub seed: u64,
    /// Optionally thin the log missing-not-at-random using the propensity
    /// sigmoids with these `(A, B)` scalars.
    pub mnar: Option<(f64, f64)>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            users: 200,
            items: 100,
            interactions: 2_000,
            latent_dim: 8,
            popularity_exponent: 1.0,
            user_activity_exponent: 0.8,
            noise: 0.5,
            seed: 0,
            mnar: None,
        }
    }
}

/// Generate a dataset: latent-factor affinities, Zipf-distributed item
/// popularity and user activity, per-user increasing timestamps, ratings
/// centered on 3 plus the affinity.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    if cfg.users == 0 || cfg.items == 0 {
        return Err(Error::Parameter("users and items must be positive".into()));
    }
    if cfg.items < 3 {
        return Err(Error::Parameter("need at least three items for three-long histories".into()));
    }
    if cfg.interactions < 3 * cfg.users {
        return Err(Error::Parameter(format!(
            "{} interactions cannot give {} users three interactions each",
            cfg.interactions, cfg.users
        )));
    }
    if cfg.latent_dim == 0 {
        return Err(Error::Parameter("latent_dim must be positive".into()));
    }

    let mut rng = rng_from_seed(child_seed(cfg.seed, "synthetic"));
    let d = cfg.latent_dim;
    let sigma = 1.0 / (d as f64).powf(0.25);
    let theta: Vec<f64> = (0..cfg.users * d).map(|_| sigma * normal(&mut rng)).collect();
    let phi: Vec<f64> = (0..cfg.items * d).map(|_| sigma * normal(&mut rng)).collect();

    // popularity rank assigned by shuffle so item ids carry no order
    let mut item_rank: Vec<usize> = (0..cfg.items).collect();
    item_rank.shuffle(&mut rng);
    let log_pop: Vec<f64> = item_rank
        .iter()
        .map(|&r| -cfg.popularity_exponent * ((r + 1) as f64).ln())
        .collect();

    let history_lengths = zipf_allocation(
        cfg.users,
        cfg.interactions - 3 * cfg.users,
        cfg.user_activity_exponent,
        cfg.items,
        &mut rng,
    );

    let affinity_scale = 1.5; // how strongly taste beats popularity
    let mut interactions = Vec::with_capacity(cfg.interactions);
    for (user, &len) in history_lengths.iter().enumerate() {
        // Gumbel top-k draw without replacement, weighted by
        // popularity * exp(affinity)
        let user_theta = &theta[user * d..(user + 1) * d];
        let mut keys: Vec<(f64, u32)> = (0..cfg.items)
            .map(|item| {
                let aff: f64 = user_theta
                    .iter()
                    .zip(&phi[item * d..(item + 1) * d])
                    .map(|(a, b)| a * b)
                    .sum();
                let gumbel = -(-(rng.gen_range(f64::MIN_POSITIVE..1.0)).ln()).ln();
                (log_pop[item] + affinity_scale * aff + gumbel, item as u32)
            })
            .collect();
        keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        let mut stamps: Vec<i64> = (0..len).map(|_| rng.gen_range(0..10_000_000i64)).collect();
        stamps.sort_unstable();
        for (pos, &(_, item)) in keys.iter().take(len).enumerate() {
            let aff: f64 = user_theta
                .iter()
                .zip(&phi[item as usize * d..(item as usize + 1) * d])
                .map(|(a, b)| a * b)
                .sum();
            let rating = 3.0 + aff + cfg.noise * normal(&mut rng);
            interactions.push(Interaction {
                user: user as u32,
                item,
                rating,
                timestamp: stamps[pos],
            });
        }
    }

    if let Some((a, b)) = cfg.mnar {
        interactions = thin_mnar(interactions, cfg, a, b, &mut rng_from_seed(child_seed(cfg.seed, "mnar")))?;
    }

    let mut maps = IdMaps::default();
    for u in 0..cfg.users {
        maps.users.get_or_insert(&format!("u{u}"));
    }
    for i in 0..cfg.items {
        maps.items.get_or_insert(&format!("i{i}"));
    }
    Dataset::from_parts(interactions, cfg.users as u32, cfg.items as u32, Arc::new(maps))
}

/// Box-Muller standard normal, one value per call.
fn normal(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Per-user history lengths: 3 plus a Zipf share of the extra interactions,
/// capped by the item count, distributed by largest remainder.
fn zipf_allocation(
    users: usize,
    extra: usize,
    exponent: f64,
    max_len: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<usize> {
    let mut activity_rank: Vec<usize> = (0..users).collect();
    activity_rank.shuffle(rng);
    let weights: Vec<f64> =
        activity_rank.iter().map(|&r| ((r + 1) as f64).powf(-exponent)).collect();
    let total_weight: f64 = weights.iter().sum();

    let mut lengths = vec![3usize; users];
    let mut shares: Vec<(f64, usize)> = Vec::with_capacity(users);
    let mut assigned = 0usize;
    for (user, w) in weights.iter().enumerate() {
        let exact = extra as f64 * w / total_weight;
        let floor = exact.floor() as usize;
        let capped = floor.min(max_len - 3);
        lengths[user] += capped;
        assigned += capped;
        shares.push((exact - floor as f64, user));
    }
    let mut leftover = extra - assigned;
    shares.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut cursor = 0usize;
    while leftover > 0 {
        let (_, user) = shares[cursor % shares.len()];
        if lengths[user] < max_len {
            lengths[user] += 1;
            leftover -= 1;
        }
        cursor += 1;
        if cursor > shares.len() * (max_len + 1) {
            break; // every user at capacity
        }
    }
    lengths
}

fn thin_mnar(
    interactions: Vec<Interaction>,
    cfg: &SyntheticConfig,
    a: f64,
    b: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<Interaction>> {
    let mut user_counts = vec![0u32; cfg.users];
    let mut item_counts = vec![0u32; cfg.items];
    for it in &interactions {
        user_counts[it.user as usize] += 1;
        item_counts[it.item as usize] += 1;
    }
    let params = PropensityParams::new(a, b, &user_counts, &item_counts)?;
    let kept: Vec<Interaction> = interactions
        .into_iter()
        .filter(|it| {
            let p = params
                .propensity(it.user as usize, it.item as usize)
                .expect("counts cover all entities");
            rng.gen::<f64>() < p
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyDataset("mnar thinning removed everything".into()));
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let cfg = SyntheticConfig { users: 30, items: 20, interactions: 150, ..Default::default() };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.interactions(), b.interactions());
    }

    #[test]
    fn total_matches_request_and_min_three() {
        let cfg = SyntheticConfig { users: 40, items: 30, interactions: 400, ..Default::default() };
        let d = generate_synthetic(&cfg).unwrap();
        assert_eq!(d.len(), 400);
        for u in 0..d.num_users() {
            assert!(d.user_history(u).len() >= 3);
        }
    }

    #[test]
    fn zero_exponent_flattens_popularity() {
        let cfg = SyntheticConfig {
            users: 150,
            items: 100,
            interactions: 3_000,
            popularity_exponent: 0.0,
            user_activity_exponent: 0.0,
            ..Default::default()
        };
        let spread = |cfg: &SyntheticConfig| {
            let counts = generate_synthetic(cfg).unwrap().item_counts();
            let max = *counts.iter().max().unwrap() as f64;
            let min = (*counts.iter().min().unwrap() as f64).max(1.0);
            max / min
        };
        let uniform = spread(&cfg);
        let skewed = spread(&SyntheticConfig { popularity_exponent: 1.5, seed: 1, ..cfg });
        assert!(
            skewed > 2.0 * uniform,
            "exponent should widen the count spread: uniform {uniform:.2}, skewed {skewed:.2}"
        );
    }

    #[test]
    fn timestamps_non_decreasing_per_user() {
        let cfg = SyntheticConfig { users: 20, items: 15, interactions: 120, ..Default::default() };
        let d = generate_synthetic(&cfg).unwrap();
        for u in 0..d.num_users() {
            let history = d.user_history(u);
            for w in history.windows(2) {
                assert!(d.interaction(w[0]).timestamp <= d.interaction(w[1]).timestamp);
            }
        }
    }

    #[test]
    fn infeasible_configs_error() {
        let cfg = SyntheticConfig { users: 10, items: 5, interactions: 20, ..Default::default() };
        assert!(generate_synthetic(&cfg).is_err());
        let cfg = SyntheticConfig { users: 0, ..Default::default() };
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn mnar_thinning_keeps_a_subset() {
        let base = SyntheticConfig { users: 50, items: 40, interactions: 500, ..Default::default() };
        let full = generate_synthetic(&base).unwrap();
        let thinned =
            generate_synthetic(&SyntheticConfig { mnar: Some((0.55, 1.5)), ..base }).unwrap();
        assert!(thinned.len() < full.len());
        assert!(!thinned.is_empty());
    }
}
