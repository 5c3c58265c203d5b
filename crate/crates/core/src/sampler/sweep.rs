//! One sweep: as many move attempts as there are movable non-empty elements.
//! Each attempt draws a level uniformly and then a non-empty element of that
//! level uniformly. A level's element count is unchanged by moves at that
//! level, so the selection probability cancels in the acceptance ratio.

use super::mh::mh_step;
use crate::state::BlockState;
use rand::{Rng, RngExt};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SweepStats {
    pub attempts: usize,
    pub accepted: usize,
    pub delta: f64,
}

/// Levels `0..max_level` take part (every level below the top when `None`).
pub fn sweep<R: Rng + ?Sized>(
    state: &mut BlockState,
    beta: f64,
    epsilon: f64,
    max_level: Option<usize>,
    rng: &mut R,
) -> SweepStats {
    let top = state.depth().saturating_sub(1);
    let levels = max_level.map_or(top, |m| m.min(top));
    let mut stats = SweepStats::default();
    if levels == 0 {
        return stats;
    }
    let counts: Vec<usize> = (0..levels).map(|l| state.live_elements(l)).collect();
    let attempts: usize = counts.iter().sum();
    for _ in 0..attempts {
        let level = rng.random_range(0..levels);
        let i = rng.random_range(0..state.live_elements(level));
        let u = if level == 0 {
            i as u32
        } else {
            state.nonempty_groups(level - 1)[i]
        };
        let out = mh_step(state, level, u, beta, epsilon, rng);
        stats.attempts += 1;
        if out.accepted {
            stats.accepted += 1;
            stats.delta += out.delta;
        }
    }
    stats
}
