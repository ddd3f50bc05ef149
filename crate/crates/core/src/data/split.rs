//! Train/validation/test splitting.

use rand::seq::SliceRandom;

use crate::data::{Dataset, Scenario};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::sampling::round_half_up;

/// Disjoint train/validation/test views sharing one index space.
#[derive(Debug, Clone)]
pub struct SplitBundle {
    pub scenario: Scenario,
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

impl SplitBundle {
    pub fn total_len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }
}

/// Randomized 80/10/10 split of each user's history.
///
/// Per user, `n_test = n_val = max(1, round-half-up(N_u / 10))` interactions
/// are drawn uniformly at random; the remainder trains. Requires every user
/// to have at least 3 interactions so each part is non-empty.
pub fn split_random(dataset: &Dataset, scenario: Scenario, seed: u64) -> Result<SplitBundle> {
    if scenario == Scenario::Sequential {
        return Err(Error::Precondition(
            "sequential scenario requires the leave-one-last split".into(),
        ));
    }
    check_min_history(dataset)?;

    let mut rng = rng_from_seed(seed);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for user in 0..dataset.num_users() {
        let mut indices: Vec<usize> = dataset.user_history(user).to_vec();
        indices.shuffle(&mut rng);
        let holdout = round_half_up(indices.len() as f64 / 10.0).max(1);
        test.extend_from_slice(&indices[..holdout]);
        validation.extend_from_slice(&indices[holdout..2 * holdout]);
        train.extend_from_slice(&indices[2 * holdout..]);
    }

    Ok(SplitBundle {
        scenario,
        train: dataset.subset(&train),
        validation: dataset.subset(&validation),
        test: dataset.subset(&test),
    })
}

/// Leave-one-last split for the sequential scenario: per user, the latest
/// interaction is test, the second latest validation, the rest train.
/// Timestamp ties resolve to the later input row.
pub fn split_leave_one_last(dataset: &Dataset) -> Result<SplitBundle> {
    check_min_history(dataset)?;

    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for user in 0..dataset.num_users() {
        let history = dataset.user_history(user);
        let n = history.len();
        test.push(history[n - 1]);
        validation.push(history[n - 2]);
        train.extend_from_slice(&history[..n - 2]);
    }

    Ok(SplitBundle {
        scenario: Scenario::Sequential,
        train: dataset.subset(&train),
        validation: dataset.subset(&validation),
        test: dataset.subset(&test),
    })
}

fn check_min_history(dataset: &Dataset) -> Result<()> {
    for user in 0..dataset.num_users() {
        let n = dataset.user_history(user).len();
        if n < 3 {
            return Err(Error::Precondition(format!(
                "user {user} has {n} interactions, splitting needs at least 3"
            )));
        }
    }
    Ok(())
}
