//! Additive decomposition of the joint log-probability.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChannelEvidence {
    pub name: String,
    /// Log marginal likelihood of the transformed values.
    pub log_marginal: f64,
    /// `Σ ln |dy/dx|` of the channel's transforms.
    pub log_jacobian: f64,
}

/// `ln P(A, x, {b})` split into its independent parts.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EvidenceBreakdown {
    pub adjacency: f64,
    pub partition_prior: f64,
    pub channels: Vec<ChannelEvidence>,
}

impl EvidenceBreakdown {
    pub fn total(&self) -> f64 {
        self.adjacency + self.partition_prior + combine_channels(&self.channels)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("evidence serialization cannot fail")
    }
}

/// Channels are conditionally independent given the partition, so their
/// log-marginals and Jacobians simply add.
pub fn combine_channels(channels: &[ChannelEvidence]) -> f64 {
    channels.iter().map(|c| c.log_marginal + c.log_jacobian).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(name: &str, lm: f64, lj: f64) -> ChannelEvidence {
        ChannelEvidence {
            name: name.into(),
            log_marginal: lm,
            log_jacobian: lj,
        }
    }

    #[test]
    fn combination_rules() {
        let a = ch("a", -3.5, 0.25);
        assert_eq!(combine_channels(std::slice::from_ref(&a)), -3.25);
        assert_eq!(combine_channels(&[a.clone(), a.clone()]), 2.0 * -3.25);
        let b = ch("b", 1.0, -2.0);
        assert_eq!(combine_channels(&[a.clone(), b.clone()]), combine_channels(&[b, a]));
    }
}
