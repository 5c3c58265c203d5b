//! Neighbourhood-guided move proposals.
//!
//! To relabel element `u`, follow a random half-edge of `u` to a neighbour
//! group `t`. With probability `ε(B+1) / (e_t + ε(B+1))` pick uniformly among
//! the `B` non-empty groups and one new group; otherwise follow a random
//! half-edge of `t` and take the group at its far end. Isolated elements always
//! choose uniformly. A new group's parent is drawn uniformly from the
//! non-empty groups one level up. The uniform branch keeps every partition
//! reachable.

use crate::state::BlockState;
use rand::{Rng, RngExt};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Existing(u32),
    New { parent: u32 },
}

/// Draws a target for element `u` of `level`.
pub fn propose<R: Rng + ?Sized>(state: &BlockState, level: usize, u: u32, epsilon: f64, rng: &mut R) -> Target {
    let k = state.element_degree(level, u);
    let b = state.group_count(level) as f64;
    if k > 0 {
        let t = state.element_half_edge_group(level, u, rng.random_range(0..k));
        let e_t = state.group_degree(level, t);
        let uniform = epsilon * (b + 1.0);
        if !rng.random_bool(uniform / (e_t as f64 + uniform)) {
            return Target::Existing(state.group_half_edge_group(level, t, rng.random_range(0..e_t)));
        }
    }
    uniform_target(state, level, rng)
}

fn uniform_target<R: Rng + ?Sized>(state: &BlockState, level: usize, rng: &mut R) -> Target {
    let groups = state.nonempty_groups(level);
    let i = rng.random_range(0..=groups.len());
    if i < groups.len() {
        Target::Existing(groups[i])
    } else {
        let parents = state.nonempty_groups(level + 1);
        Target::New {
            parent: parents[rng.random_range(0..parents.len())],
        }
    }
}

/// Log-probability that [`propose`] returns `target` for `u` in the current
/// state. An existing target must be a non-empty group.
pub fn log_proposal_probability(state: &BlockState, level: usize, u: u32, epsilon: f64, target: Target) -> f64 {
    let b = state.group_count(level) as f64;
    let k = state.element_degree(level, u);
    let new_factor = match target {
        Target::Existing(_) => 0.0,
        Target::New { .. } => -(state.group_count(level + 1) as f64).ln(),
    };
    if k == 0 {
        return -(b + 1.0).ln() + new_factor;
    }
    let mut p = 0.0;
    for (t, k_ut) in state.element_neighbor_groups(level, u) {
        let e_t = state.group_degree(level, t) as f64;
        let e_tr = match target {
            Target::Existing(r) => state.connection(level, t, r) as f64,
            Target::New { .. } => 0.0,
        };
        p += k_ut as f64 / k as f64 * (epsilon + e_tr) / (e_t + epsilon * (b + 1.0));
    }
    p.ln() + new_factor
}
