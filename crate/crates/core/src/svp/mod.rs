//! Selection-via-proxy subsampling for interaction data.
//!
//! A cheap proxy model (bias-only or MF) is trained on the full train set;
//! its per-epoch difficulty record scores every interaction, optionally
//! corrected by inverse propensities to counter the missing-not-at-random
//! skew of interaction logs. The highest-importance interactions (or users)
//! are retained.

mod importance;
mod propensity;
mod proxy;
mod sample;
mod unbiasedness;

pub use importance::{importance_explicit, importance_implicit, importance_prop, ImportanceTable};
pub use propensity::PropensityParams;
pub use proxy::{train_proxy, EpochTrace, TraceRecord};
pub use sample::svp_sample;
pub use unbiasedness::{check_unbiasedness, UnbiasednessConfig, UnbiasednessReport};

use crate::error::{Error, Result};
use crate::models::ModelKind;

/// Proxy families: intentionally the cheapest members of the model slate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxyKind {
    BiasOnly,
    Mf,
}

impl ProxyKind {
    pub fn model_kind(self) -> ModelKind {
        match self {
            ProxyKind::BiasOnly => ModelKind::BiasOnly,
            ProxyKind::Mf => ModelKind::Mf,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProxyKind::BiasOnly => "bias-only",
            ProxyKind::Mf => "mf",
        }
    }
}

impl std::fmt::Display for ProxyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProxyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bias-only" => Ok(ProxyKind::BiasOnly),
            "mf" => Ok(ProxyKind::Mf),
            other => Err(Error::Parameter(format!("unknown proxy kind `{other}`"))),
        }
    }
}

/// Whether whole users or single interactions are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Interaction,
    User,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Interaction => "interaction",
            Granularity::User => "user",
        }
    }
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interaction" => Ok(Granularity::Interaction),
            "user" => Ok(Granularity::User),
            other => Err(Error::Parameter(format!("unknown granularity `{other}`"))),
        }
    }
}
