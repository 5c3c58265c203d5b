//! Slow, independent reference computations for the test suite.
//!
//! Nothing here calls into the incremental state or the production
//! likelihood helpers; formulas are re-derived from plain sums so that a
//! disagreement points at one side only.

pub mod constrained;
pub mod enumerate;
pub mod quadrature;

pub use constrained::{constrained_sample, ConstrainedStats};
pub use enumerate::{enumerate_posterior, flat_log_joint, EnumeratedPosterior};
pub use quadrature::{chi_square_test, integrate};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("exhaustive enumeration supports at most {max} nodes, got {found}")]
    TooLarge { max: usize, found: usize },
    #[error("no configuration satisfies the constraints: {0}")]
    Infeasible(String),
}
