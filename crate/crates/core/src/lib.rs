//! Bayesian inference of nested stochastic block models on graphs whose
//! edges carry real or integer covariates.
//!
//! The joint probability of a graph, its edge covariates and a hierarchical
//! partition combines an adjacency likelihood, a partition prior and one
//! weight likelihood per covariate channel. [`state::BlockState`] keeps every
//! term up to date under single-element moves, and [`sampler`] builds
//! agglomerative initialisation, annealed MAP search and posterior sampling on
//! top of it.

pub mod adjacency;
pub mod analysis;
pub mod channel;
pub mod evidence;
pub mod exact;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod partition;
pub mod sampler;
pub mod special;
pub mod state;
pub mod stats;
pub mod synth;
pub mod transform;
pub mod weights;
