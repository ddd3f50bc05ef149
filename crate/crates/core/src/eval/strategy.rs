//! The full strategy roster: eight plain samplers and eight
//! selection-via-proxy variants.

use crate::error::{Error, Result};
use crate::sampling::BaseStrategy;
use crate::svp::{Granularity, ProxyKind};

/// Identifier grammar: base ids as-is; proxy variants are
/// `svp-cf[:prop]:<proxy>:<granularity>` spelled
/// `svp-cf:mf:interaction`, `svp-cf-prop:bias-only:user`, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingStrategy {
    Base(BaseStrategy),
    Svp { proxy: ProxyKind, granularity: Granularity, propensity: bool },
}

impl SamplingStrategy {
    /// All sixteen strategies in presentation order.
    pub fn roster() -> Vec<SamplingStrategy> {
        let mut out: Vec<SamplingStrategy> =
            BaseStrategy::ALL.into_iter().map(SamplingStrategy::Base).collect();
        for propensity in [false, true] {
            for proxy in [ProxyKind::Mf, ProxyKind::BiasOnly] {
                for granularity in [Granularity::Interaction, Granularity::User] {
                    out.push(SamplingStrategy::Svp { proxy, granularity, propensity });
                }
            }
        }
        out
    }

    pub fn id(&self) -> String {
        match self {
            SamplingStrategy::Base(b) => b.id().to_owned(),
            SamplingStrategy::Svp { proxy, granularity, propensity } => {
                let family = if *propensity { "svp-cf-prop" } else { "svp-cf" };
                format!("{family}:{proxy}:{granularity}")
            }
        }
    }

    pub fn is_svp(&self) -> bool {
        matches!(self, SamplingStrategy::Svp { .. })
    }
}

impl std::fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.id())
    }
}

impl std::str::FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(base) = s.parse::<BaseStrategy>() {
            return Ok(SamplingStrategy::Base(base));
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 && (parts[0] == "svp-cf" || parts[0] == "svp-cf-prop") {
            return Ok(SamplingStrategy::Svp {
                proxy: parts[1].parse()?,
                granularity: parts[2].parse()?,
                propensity: parts[0] == "svp-cf-prop",
            });
        }
        Err(Error::Parameter(format!("unknown sampling strategy `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roster_has_sixteen_distinct_ids() {
        let roster = SamplingStrategy::roster();
        assert_eq!(roster.len(), 16);
        let ids: std::collections::HashSet<String> = roster.iter().map(|s| s.id()).collect();
        assert_eq!(ids.len(), 16);
    }

    #[test]
    fn ids_round_trip() {
        for strategy in SamplingStrategy::roster() {
            let parsed: SamplingStrategy = strategy.id().parse().unwrap();
            assert_eq!(parsed, strategy);
        }
    }

    #[test]
    fn unknown_ids_error() {
        assert!("svp-cf:mf".parse::<SamplingStrategy>().is_err());
        assert!("svp-cf:gbm:user".parse::<SamplingStrategy>().is_err());
        assert!("head".parse::<SamplingStrategy>().is_err());
    }
}
