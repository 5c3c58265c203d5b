//! Markov chain Monte Carlo over hierarchical partitions.

pub mod fit;
pub mod init;
pub mod mh;
pub mod proposal;
pub mod sweep;

pub use fit::{
    align_labels, default_schedule, fit_map, sample_posterior, FitConfig, FitResult, PosteriorSamples, SampleConfig,
    Start,
};
pub use init::{agglomerative_init, trim_redundant_levels, InitConfig};
pub use mh::{mh_step, StepOutcome};
pub use proposal::{log_proposal_probability, propose, Target};
pub use sweep::{sweep, SweepStats};

use crate::state::StateError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error(transparent)]
    State(#[from] StateError),
}
