//! Weight likelihoods: nested microcanonical models, flat conjugate models
//! and the single-value marginals used for fitted-distribution curves.

pub mod conjugate;
pub mod marginal;
pub mod micro;

use crate::channel::{FamilyKind, PreparedChannel};
use crate::stats::PairStats;
use conjugate::FlatStats;

fn as_count(x: f64) -> u64 {
    x.round().max(0.0) as u64
}

/// Contribution of one group pair at `level` (0 is the bottom) to the log
/// marginal of channel `c`. Normal level and global terms are separate.
pub fn pair_term(ch: &PreparedChannel, c: usize, level: usize, s: &PairStats) -> f64 {
    if s.m == 0 {
        return 0.0;
    }
    use FamilyKind::*;
    match ch.kind {
        ExponentialMicro => micro::exponential_pair(s.n, s.sum(c)),
        NormalMicro => micro::normal_pair(s.n, s.scaled_variance(c)),
        GeometricMicro => micro::geometric_pair(s.n, as_count(s.sum(c))),
        BinomialMicro if level == 0 => micro::binomial_base_pair(s.n, ch.bound, as_count(s.sum(c))),
        PoissonMicro if level == 0 => micro::poisson_base_pair(s.n, as_count(s.sum(c))),
        BinomialMicro | PoissonMicro => micro::geometric_pair(s.n, as_count(s.sum(c))),
        _ if level == 0 => conjugate::pair_log_marginal(
            ch.family(),
            &ch.prior,
            ch.bound,
            FlatStats {
                m: s.n,
                sum: s.sum(c),
                sumsq: s.sumsq(c),
            },
        ),
        _ => 0.0,
    }
}
