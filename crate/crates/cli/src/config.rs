//! Run configuration: a strict JSON file whose settings command-line flags
//! override.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;
use wsbm::adjacency::AdjacencyModel;
use wsbm::channel::ChannelSpec;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Name used for this candidate in model comparisons.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Covariate channels to model; the graph sidecar's channels when empty.
    pub channels: Vec<ChannelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjacency_model: Option<AdjacencyModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Sweeps per annealing stage when fitting, total sweeps when sampling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    /// `[β, sweeps]` annealing stages.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_schedule: Option<Vec<(f64, usize)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

/// Parses `β:sweeps` stages separated by commas, e.g. `1:10,2:10,4:20`.
pub fn parse_schedule(text: &str) -> Result<Vec<(f64, usize)>> {
    let mut stages = Vec::new();
    for stage in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some((beta, sweeps)) = stage.split_once(':') else {
            bail!("invalid annealing stage {stage:?}; expected beta:sweeps");
        };
        let beta: f64 = beta
            .trim()
            .parse()
            .with_context(|| format!("invalid beta in stage {stage:?}"))?;
        let sweeps: usize = sweeps
            .trim()
            .parse()
            .with_context(|| format!("invalid sweep count in stage {stage:?}"))?;
        stages.push((beta, sweeps));
    }
    if stages.is_empty() {
        bail!("annealing schedule {text:?} has no stages");
    }
    Ok(stages)
}
