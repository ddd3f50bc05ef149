//! User-granularity strategies: whole histories kept per user, with the
//! final user truncated to land exactly on the budget.

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::Result;
use crate::rng::rng_from_seed;
use crate::sampling::{checked_budget, finalize, SampleResult, SampleSpec};

/// Keep whole users in seeded-random order until the budget is met.
pub fn sample_random_users(train: &Dataset, spec: &SampleSpec) -> Result<SampleResult> {
    let budget = checked_budget(train, spec)?;
    let mut rng = rng_from_seed(spec.seed);
    let mut order: Vec<u32> =
        (0..train.num_users()).filter(|&u| !train.user_history(u).is_empty()).collect();
    order.shuffle(&mut rng);
    let kept = accumulate_users(train, &order, budget, &mut rng);
    Ok(finalize(train, kept, "random-user", spec, budget, Vec::new()))
}

/// Keep the most active users first.
///
/// Equivalent to iteratively removing the user with the fewest interactions:
/// users sorted by history length descending (ties by user index) are kept
/// greedily until the budget is met.
pub fn sample_head_users(train: &Dataset, spec: &SampleSpec) -> Result<SampleResult> {
    let budget = checked_budget(train, spec)?;
    let mut rng = rng_from_seed(spec.seed);
    let mut order: Vec<u32> =
        (0..train.num_users()).filter(|&u| !train.user_history(u).is_empty()).collect();
    order.sort_by_key(|&u| (std::cmp::Reverse(train.user_history(u).len()), u));
    let kept = accumulate_users(train, &order, budget, &mut rng);
    Ok(finalize(train, kept, "head-user", spec, budget, Vec::new()))
}

fn accumulate_users(
    train: &Dataset,
    order: &[u32],
    budget: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<usize> {
    let mut kept = Vec::with_capacity(budget);
    for &user in order {
        let history = train.user_history(user);
        let remaining = budget - kept.len();
        if history.len() <= remaining {
            kept.extend_from_slice(history);
        } else {
            // final user: uniform truncation to the exact budget
            let picks = rand::seq::index::sample(rng, history.len(), remaining);
            kept.extend(picks.into_iter().map(|pos| history[pos]));
        }
        if kept.len() == budget {
            break;
        }
    }
    kept
}
