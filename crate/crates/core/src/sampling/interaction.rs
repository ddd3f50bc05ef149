//! Interaction-granularity strategies: random, user-stratified, temporal.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::Result;
use crate::rng::rng_from_seed;
use crate::sampling::{checked_budget, finalize, round_half_up, SampleResult, SampleSpec};

/// Uniform sample of exactly the budget, without replacement.
pub fn sample_random_interactions(train: &Dataset, spec: &SampleSpec) -> Result<SampleResult> {
    let budget = checked_budget(train, spec)?;
    let mut rng = rng_from_seed(spec.seed);
    let kept = rand::seq::index::sample(&mut rng, train.len(), budget).into_vec();
    Ok(finalize(train, kept, "random-interaction", spec, budget, Vec::new()))
}

/// Per-user quota sampling that matches the user-frequency distribution.
///
/// Each user contributes `round-half-up(p% of N_u)` interactions drawn
/// uniformly from their history; single random additions/removals then move
/// the total onto the exact budget. During removal, users holding a single
/// retained interaction are only drained once no other option is left.
pub fn sample_stratified_user_history(train: &Dataset, spec: &SampleSpec) -> Result<SampleResult> {
    per_user_quota_sample(train, spec, "stratified", |train, user, quota, rng| {
        let history = train.user_history(user);
        rand::seq::index::sample(rng, history.len(), quota)
            .into_iter()
            .map(|pos| history[pos])
            .collect()
    })
}

/// Per-user quota sampling that keeps each user's most recent interactions.
/// Adjustment adds/removes at the per-user recency boundary: removals drop
/// the oldest retained event, additions pull in the newest unretained one.
pub fn sample_temporal_user_history(train: &Dataset, spec: &SampleSpec) -> Result<SampleResult> {
    per_user_quota_sample(train, spec, "temporal", |train, user, quota, _rng| {
        let history = train.user_history(user);
        history[history.len() - quota..].to_vec()
    })
}

/// Shared quota machinery. `pick` selects a user's initial `quota`
/// interactions; recency-ordered pickers get boundary adjustments for free
/// because per-user kept lists stay ordered oldest-first.
fn per_user_quota_sample(
    train: &Dataset,
    spec: &SampleSpec,
    strategy: &str,
    pick: impl Fn(&Dataset, u32, usize, &mut ChaCha8Rng) -> Vec<usize>,
) -> Result<SampleResult> {
    let budget = checked_budget(train, spec)?;
    let mut rng = rng_from_seed(spec.seed);
    let temporal = strategy == "temporal";

    let num_users = train.num_users();
    let mut per_user: Vec<Vec<usize>> = Vec::with_capacity(num_users as usize);
    let mut total = 0usize;
    for user in 0..num_users {
        let n = train.user_history(user).len();
        let quota = round_half_up(spec.percent * n as f64 / 100.0).min(n);
        let kept = if quota == 0 { Vec::new() } else { pick(train, user, quota, &mut rng) };
        total += kept.len();
        per_user.push(kept);
    }

    let mut flags = Vec::new();
    while total > budget {
        // one removal per eligible user per round keeps deviations at one
        let mut eligible: Vec<u32> =
            (0..num_users).filter(|&u| per_user[u as usize].len() > 1).collect();
        if eligible.is_empty() {
            eligible = (0..num_users).filter(|&u| !per_user[u as usize].is_empty()).collect();
            if !flags.iter().any(|f| f == "stratified-user-drained") {
                flags.push("stratified-user-drained".to_owned());
            }
        }
        eligible.shuffle(&mut rng);
        for user in eligible.into_iter().take(total - budget) {
            let kept = &mut per_user[user as usize];
            let victim = if temporal { 0 } else { rng.gen_range(0..kept.len()) };
            kept.remove(victim);
            total -= 1;
        }
    }
    while total < budget {
        let mut eligible: Vec<u32> = (0..num_users)
            .filter(|&u| per_user[u as usize].len() < train.user_history(u).len())
            .collect();
        eligible.shuffle(&mut rng);
        for user in eligible.into_iter().take(budget - total) {
            let history = train.user_history(user);
            let kept = &mut per_user[user as usize];
            if temporal {
                // next unretained index just before the kept suffix
                let boundary = history.len() - kept.len();
                kept.insert(0, history[boundary - 1]);
            } else {
                let missing: Vec<usize> =
                    history.iter().copied().filter(|idx| !kept.contains(idx)).collect();
                kept.push(missing[rng.gen_range(0..missing.len())]);
            }
            total += 1;
        }
    }

    let kept: Vec<usize> = per_user.into_iter().flatten().collect();
    Ok(finalize(train, kept, strategy, spec, budget, flags))
}
