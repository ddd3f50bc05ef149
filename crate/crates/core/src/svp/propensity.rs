//! Observation-propensity model for interaction data.
//!
//! The probability that a truly relevant `(u, i)` pair shows up in the log
//! factorizes into per-user and per-item sigmoids of activity:
//!
//! ```text
//! p_u = 1 / (1 + C_u * exp(-A * ln(N_u + B)))      C_u = (ln|U| - 1) * (B + 1)^A
//! p_i = 1 / (1 + C_i * exp(-A * ln(N_i + B)))      C_i = (ln|I| - 1) * (B + 1)^A
//! p_ui = p_u * p_i
//! ```
//!
//! with `N_u`, `N_i` the interaction counts on the full train set. Noise is
//! one-sided: a logged interaction is always truly relevant.

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PropensityParams {
    pub a: f64,
    pub b: f64,
    c_user: f64,
    c_item: f64,
    user_counts: Vec<u32>,
    item_counts: Vec<u32>,
}

impl PropensityParams {
    /// Build from per-entity interaction counts.
    pub fn new(a: f64, b: f64, user_counts: &[u32], item_counts: &[u32]) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Parameter(format!("propensity A must be positive, got {a}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Parameter(format!("propensity B must be positive, got {b}")));
        }
        for (n, side) in [(user_counts.len(), "users"), (item_counts.len(), "items")] {
            if n <= 1 {
                return Err(Error::Parameter(format!(
                    "propensity model needs more than one {side} entry (log would not be positive)"
                )));
            }
        }
        let scale = (b + 1.0).powf(a);
        Ok(Self {
            a,
            b,
            c_user: ((user_counts.len() as f64).ln() - 1.0) * scale,
            c_item: ((item_counts.len() as f64).ln() - 1.0) * scale,
            user_counts: user_counts.to_vec(),
            item_counts: item_counts.to_vec(),
        })
    }

    /// Counts taken from the proxy's training data, the full train split.
    pub fn from_train(train: &Dataset, a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, &train.user_counts(), &train.item_counts())
    }

    pub fn num_users(&self) -> usize {
        self.user_counts.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_counts.len()
    }

    pub fn user_propensity(&self, u: usize) -> Result<f64> {
        let n = *self
            .user_counts
            .get(u)
            .ok_or(Error::UnknownIndex { entity: "user", index: u })?;
        sigmoid_curve(f64::from(n), self.c_user, self.a, self.b)
    }

    pub fn item_propensity(&self, i: usize) -> Result<f64> {
        let n = *self
            .item_counts
            .get(i)
            .ok_or(Error::UnknownIndex { entity: "item", index: i })?;
        sigmoid_curve(f64::from(n), self.c_item, self.a, self.b)
    }

    /// `p_ui = p_u * p_i`.
    pub fn propensity(&self, u: usize, i: usize) -> Result<f64> {
        Ok(self.user_propensity(u)? * self.item_propensity(i)?)
    }

    /// The curve itself, for callers that supply a raw count.
    pub fn user_curve(&self, count: f64) -> Result<f64> {
        sigmoid_curve(count, self.c_user, self.a, self.b)
    }
}

fn sigmoid_curve(count: f64, c: f64, a: f64, b: f64) -> Result<f64> {
    let denom = 1.0 + c * (-a * (count + b).ln()).exp();
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Parameter(
            "degenerate propensity curve; entity population too small".into(),
        ));
    }
    // tiny populations can push the curve above one; keep it a probability
    Ok((1.0 / denom).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(users: usize, items: usize, per_user: u32, per_item: u32) -> PropensityParams {
        PropensityParams::new(0.55, 1.5, &vec![per_user; users], &vec![per_item; items]).unwrap()
    }

    #[test]
    fn matches_hand_computed_value() {
        let p = params(1000, 1000, 10, 10);
        // C_u = (ln 1000 - 1) * 2.5^0.55, p_u = 1 / (1 + C_u * 11.5^-0.55)
        assert!((p.user_propensity(0).unwrap() - 0.2815).abs() < 5e-4);
    }

    #[test]
    fn monotone_in_activity() {
        let mut counts = vec![10u32; 4];
        counts[1] = 100;
        let p = PropensityParams::new(0.55, 1.5, &counts, &[5, 5]).unwrap();
        assert!(p.user_propensity(1).unwrap() > p.user_propensity(0).unwrap());
    }

    #[test]
    fn pair_propensity_is_a_product() {
        let p = params(50, 80, 7, 3);
        let expected = p.user_propensity(2).unwrap() * p.item_propensity(4).unwrap();
        assert_eq!(p.propensity(2, 4).unwrap(), expected);
    }

    #[test]
    fn single_entity_population_is_an_error() {
        assert!(PropensityParams::new(0.55, 1.5, &[3], &[3, 3]).is_err());
        assert!(PropensityParams::new(0.55, 1.5, &[3, 3], &[3]).is_err());
    }

    #[test]
    fn values_stay_probabilities() {
        for users in [2usize, 3, 10, 1000] {
            let p = PropensityParams::new(0.55, 1.5, &vec![1u32; users], &vec![1u32; 10]).unwrap();
            for n in [0u32, 1, 10, 10_000] {
                let v = p.user_curve(f64::from(n)).unwrap();
                assert!(v > 0.0 && v <= 1.0, "users={users} n={n} gave {v}");
            }
        }
    }

    #[test]
    fn bad_scalars_rejected() {
        assert!(PropensityParams::new(-0.5, 1.5, &[1, 1], &[1, 1]).is_err());
        assert!(PropensityParams::new(0.55, 0.0, &[1, 1], &[1, 1]).is_err());
    }
}
