//! Agglomerative initialisation.
//!
//! Starting from singletons, each merge wave lets every group pick its best
//! merge partner among its neighbours and a couple of random groups, then
//! applies the best non-conflicting merges until the group count has shrunk
//! by a fixed ratio. Greedy sweeps follow every wave and the best partition
//! seen along the way is kept. The hierarchy is built one level at a time:
//! each new level starts as the identity over the groups below and is
//! agglomerated in turn, until a level no longer compresses.

use super::sweep::sweep;
use crate::model::Model;
use crate::partition::HierarchicalPartition;
use crate::state::BlockState;
use rand::{Rng, RngExt};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub struct InitConfig {
    /// Factor by which each wave divides the group count.
    pub shrink: f64,
    /// Neighbouring groups considered as merge partners.
    pub neighbor_candidates: usize,
    /// Random groups considered as merge partners.
    pub random_candidates: usize,
    /// Greedy sweeps after each wave.
    pub sweeps_per_wave: usize,
    pub epsilon: f64,
    /// Build upper levels; otherwise return a single partition under the top.
    pub nested: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            shrink: 1.3,
            neighbor_candidates: 10,
            random_candidates: 2,
            sweeps_per_wave: 10,
            epsilon: 1.0,
            nested: true,
        }
    }
}

/// Moves every non-empty member of group `r` into `t` and returns the total
/// change of the log-joint.
fn merge(state: &mut BlockState, level: usize, r: u32, t: u32) -> (f64, Vec<u32>) {
    let moved: Vec<u32> = state
        .members(level, r)
        .iter()
        .copied()
        .filter(|&e| state.element_nonempty(level, e))
        .collect();
    let mut delta = 0.0;
    for &e in &moved {
        delta += state.apply_move(level, e, t);
    }
    (delta, moved)
}

fn merge_delta(state: &mut BlockState, level: usize, r: u32, t: u32) -> f64 {
    let saved = state.joint_snapshot();
    let (delta, moved) = merge(state, level, r, t);
    for &e in moved.iter().rev() {
        state.apply_move(level, e, r);
    }
    state.restore_joint(saved);
    delta
}

fn candidates<R: Rng + ?Sized>(state: &BlockState, level: usize, r: u32, cfg: &InitConfig, rng: &mut R) -> Vec<u32> {
    let mut near: Vec<u32> = state
        .incident(level, r)
        .iter()
        .copied()
        .filter(|&t| t != r && state.group_size(level, t) > 0)
        .collect();
    near.sort_unstable();
    while near.len() > cfg.neighbor_candidates {
        let i = rng.random_range(0..near.len());
        near.swap_remove(i);
    }
    let groups = state.nonempty_groups(level);
    for _ in 0..cfg.random_candidates {
        let t = groups[rng.random_range(0..groups.len())];
        if t != r && !near.contains(&t) {
            near.push(t);
        }
    }
    near
}

/// Agglomerates the groups of `level`, which must sit directly under the
/// top, and leaves the state at the best partition seen.
fn agglomerate_level<R: Rng + ?Sized>(state: &mut BlockState, level: usize, cfg: &InitConfig, rng: &mut R) {
    let mut best = (state.log_joint(), state.partition());
    // Greedy sweeps may split groups again; once a wave fails to shrink the
    // count, later waves skip them so the loop always terminates.
    let mut sweeps = cfg.sweeps_per_wave;
    while state.group_count(level) > 1 {
        let b = state.group_count(level);
        let target = ((b as f64 / cfg.shrink).floor() as usize).clamp(1, b - 1);
        let mut groups = state.nonempty_groups(level).to_vec();
        groups.sort_unstable();
        let mut options: Vec<(f64, u32, u32)> = Vec::new();
        for &r in &groups {
            let mut choice: Option<(f64, u32)> = None;
            for t in candidates(state, level, r, cfg, rng) {
                let d = merge_delta(state, level, r, t);
                if choice.is_none_or(|(bd, _)| d > bd) {
                    choice = Some((d, t));
                }
            }
            if let Some((d, t)) = choice {
                options.push((d, r, t));
            }
        }
        options.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut used = vec![false; state.group_slots(level)];
        let mut merges = b - target;
        for (_, r, t) in options {
            if merges == 0 {
                break;
            }
            if used[r as usize] || used[t as usize] {
                continue;
            }
            used[r as usize] = true;
            used[t as usize] = true;
            merge(state, level, r, t);
            merges -= 1;
        }
        for _ in 0..sweeps {
            sweep(state, f64::INFINITY, cfg.epsilon, Some(level + 1), rng);
        }
        if state.group_count(level) >= b {
            sweeps = 0;
        }
        if state.log_joint() > best.0 {
            best = (state.log_joint(), state.partition());
        }
    }
    *state = BlockState::new(Arc::clone(state.model()), &best.1).expect("snapshot partitions are valid");
}

/// Drops every level above the first one holding a single non-empty group.
/// Such levels contribute nothing to the joint.
pub fn trim_redundant_levels(partition: &HierarchicalPartition) -> HierarchicalPartition {
    let p = partition.compact();
    let mut levels = p.into_levels();
    if let Some(l) = (0..levels.len()).find(|&l| levels[l].iter().all(|&x| x == 0)) {
        levels.truncate(l + 1);
    }
    HierarchicalPartition::new(levels).expect("truncation keeps a valid hierarchy")
}

/// Ensures at least two levels so that the bottom level can move.
pub fn with_movable_bottom(partition: &HierarchicalPartition) -> HierarchicalPartition {
    if partition.depth() >= 2 {
        return partition.clone();
    }
    let mut levels = partition.levels().to_vec();
    let slots = levels[0].iter().max().map_or(1, |&m| m as usize + 1);
    levels.push(vec![0; slots]);
    HierarchicalPartition::new(levels).expect("adding a single top group is valid")
}

/// Builds an initial hierarchy for `model`. The result always has at least
/// two levels.
pub fn agglomerative_init<R: Rng + ?Sized>(model: Arc<Model>, cfg: &InitConfig, rng: &mut R) -> HierarchicalPartition {
    let n = model.node_count();
    let singletons = HierarchicalPartition::new(vec![(0..n as u32).collect(), vec![0; n]]).expect("valid");
    let mut state = BlockState::new(Arc::clone(&model), &singletons).expect("valid");
    agglomerate_level(&mut state, 0, cfg, rng);
    let mut current = state.partition().compact();
    if !cfg.nested {
        return current;
    }
    loop {
        let top_level = current.depth() - 1;
        let below = top_level - 1;
        let groups = current.group_count(below);
        if groups <= 2 {
            break;
        }
        let mut levels = current.levels().to_vec();
        levels[top_level] = (0..groups as u32).collect();
        levels.push(vec![0; groups]);
        let extended = HierarchicalPartition::new(levels).expect("identity level is valid");
        let mut st = BlockState::new(Arc::clone(&model), &extended).expect("valid");
        agglomerate_level(&mut st, top_level, cfg, rng);
        let next = st.partition().compact();
        let new_groups = next.group_count(top_level);
        if new_groups <= 1 || new_groups >= groups {
            break;
        }
        current = next;
    }
    current
}
