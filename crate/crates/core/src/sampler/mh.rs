//! Metropolis–Hastings acceptance for single-element moves.

use super::proposal::{log_proposal_probability, propose, Target};
use crate::state::BlockState;
use rand::{Rng, RngExt};

/// Smallest improvement accepted by greedy (`β = ∞`) steps.
pub const GREEDY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    /// Change of the log-joint (zero unless accepted).
    pub delta: f64,
}

/// Proposes and accepts or rejects one move of element `u` at `level` with
/// probability `min(1, exp(β Δ) q_rev / q_fwd)`. `beta = f64::INFINITY`
/// accepts only strict improvements. Moves that would leave a parent group
/// empty are rejected, as are moves back into the current group.
pub fn mh_step<R: Rng + ?Sized>(
    state: &mut BlockState,
    level: usize,
    u: u32,
    beta: f64,
    epsilon: f64,
    rng: &mut R,
) -> StepOutcome {
    let target = propose(state, level, u, epsilon, rng);
    let s = state.label(level, u);
    if target == Target::Existing(s) {
        return StepOutcome::default();
    }
    let log_fwd = if beta.is_finite() {
        log_proposal_probability(state, level, u, epsilon, target)
    } else {
        0.0
    };
    let r = match target {
        Target::Existing(r) => r,
        Target::New { parent } => state.new_group(level, parent),
    };
    if state.move_empties_parent(level, u, r) {
        return StepOutcome::default();
    }
    let saved = state.joint_snapshot();
    let delta = state.apply_move(level, u, r);
    let accept = if beta.is_finite() {
        let reverse = if state.group_size(level, s) == 0 {
            Target::New {
                parent: state.label(level + 1, s),
            }
        } else {
            Target::Existing(s)
        };
        let log_rev = log_proposal_probability(state, level, u, epsilon, reverse);
        let a = beta * delta + log_rev - log_fwd;
        a >= 0.0 || rng.random::<f64>() < a.exp()
    } else {
        delta > GREEDY_TOLERANCE
    };
    if accept {
        StepOutcome { accepted: true, delta }
    } else {
        state.apply_move(level, u, s);
        state.restore_joint(saved);
        StepOutcome::default()
    }
}
