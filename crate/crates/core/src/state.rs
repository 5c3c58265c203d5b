//! Hierarchical block state with incremental updates.
//!
//! Level `l` (0 is the bottom) holds the multigraph between the groups of
//! `b^l`: per group pair the edge count and the weight statistics of every
//! channel. A move relabels one element of a level; the touched pairs are
//! journaled with their old log-probability terms, changes are pushed up to
//! the parent pairs, and the log-joint changes by the difference of the
//! journaled terms. All sums are exact, so moving an element back restores a
//! bit-identical state.

use crate::adjacency::{prior_group, prior_level};
use crate::channel::FamilyKind;
use crate::evidence::{ChannelEvidence, EvidenceBreakdown};
use crate::exact::ExactSum;
use crate::model::Model;
use crate::partition::{HierarchicalPartition, PartitionError};
use crate::stats::{PairStats, Tracked};
use crate::weights::{micro, pair_term};
use rustc_hash::{FxHashMap, FxHashSet};
use std::sync::Arc;
use thiserror::Error;

pub type PairKey = (u32, u32);

const NONE: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("level {level} does not exist or cannot be moved (the hierarchy has {depth} levels)")]
    Level { level: usize, depth: usize },
    #[error("element {element} does not exist at level {level}")]
    Element { level: usize, element: u32 },
    #[error("group {group} does not exist at level {level}")]
    Group { level: usize, group: u32 },
}

#[derive(Clone, Debug, Default)]
struct Level {
    pairs: FxHashMap<PairKey, PairStats>,
    incident: Vec<FxHashSet<u32>>,
    /// Non-empty elements in each group slot.
    size: Vec<u64>,
    members: Vec<Vec<u32>>,
    /// Position of each element of this level in its group's member list.
    member_pos: Vec<u32>,
    /// Half-edge totals; undirected graphs keep the degree in `deg_out`.
    deg_out: Vec<u64>,
    deg_in: Vec<u64>,
    nonempty: Vec<u32>,
    nonempty_pos: Vec<u32>,
    free: Vec<u32>,
    in_free: Vec<bool>,
    group_stamp: Vec<u64>,
    /// Per channel: pairs pooling more than one value, and the sum of their
    /// scaled variances.
    m_z: Vec<u64>,
    mu_z: Vec<ExactSum>,
}

impl Level {
    fn push_slot(&mut self) -> u32 {
        let g = self.size.len() as u32;
        self.incident.push(FxHashSet::default());
        self.size.push(0);
        self.members.push(Vec::new());
        self.deg_out.push(0);
        self.deg_in.push(0);
        self.nonempty_pos.push(NONE);
        self.in_free.push(false);
        self.group_stamp.push(0);
        g
    }

    fn add_member(&mut self, g: u32, e: u32) {
        let list = &mut self.members[g as usize];
        self.member_pos[e as usize] = list.len() as u32;
        list.push(e);
    }

    fn remove_member(&mut self, g: u32, e: u32) {
        let pos = self.member_pos[e as usize] as usize;
        let list = &mut self.members[g as usize];
        list.swap_remove(pos);
        if let Some(&moved) = list.get(pos) {
            self.member_pos[moved as usize] = pos as u32;
        }
    }

    fn mark_nonempty(&mut self, g: u32) {
        self.nonempty_pos[g as usize] = self.nonempty.len() as u32;
        self.nonempty.push(g);
    }

    fn mark_empty(&mut self, g: u32) {
        let pos = self.nonempty_pos[g as usize] as usize;
        self.nonempty.swap_remove(pos);
        if let Some(&moved) = self.nonempty.get(pos) {
            self.nonempty_pos[moved as usize] = pos as u32;
        }
        self.nonempty_pos[g as usize] = NONE;
        if !self.in_free[g as usize] {
            self.in_free[g as usize] = true;
            self.free.push(g);
        }
    }
}

#[derive(Clone, Debug)]
struct PairJournal {
    key: PairKey,
    old: PairStats,
    old_term: f64,
}

#[derive(Clone, Debug)]
pub struct BlockState {
    model: Arc<Model>,
    labels: Vec<Vec<u32>>,
    levels: Vec<Level>,
    /// Bottom level only: the half-edges `(node, unit)` of each group and
    /// each unit's position in that list.
    he_list: Vec<Vec<(u32, u32)>>,
    he_pos: Vec<Vec<u32>>,
    normal_channels: Vec<usize>,
    epoch: u64,
    /// Whether journaled pairs keep their full old statistics. Only edge
    /// and value counts are needed when no lift follows the move.
    journal_sums: bool,
    jpairs: Vec<Vec<PairJournal>>,
    jgroups: Vec<(usize, u32, f64)>,
    level_terms: Vec<f64>,
    global_term: f64,
    log_joint: f64,
    log_joint_comp: f64,
}

impl BlockState {
    /// Builds every level's statistics from scratch.
    pub fn new(model: Arc<Model>, partition: &HierarchicalPartition) -> Result<Self, StateError> {
        partition.validate_for(model.node_count())?;
        let labels: Vec<Vec<u32>> = partition.levels().to_vec();
        let depth = labels.len();
        let nch = model.channels().len();
        let normal_channels: Vec<usize> = model
            .channels()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == FamilyKind::NormalMicro)
            .map(|(i, _)| i)
            .collect();
        let mut state = Self {
            model,
            labels,
            levels: Vec::with_capacity(depth),
            he_list: Vec::new(),
            he_pos: Vec::new(),
            normal_channels,
            epoch: 0,
            journal_sums: true,
            jpairs: vec![Vec::new(); depth],
            jgroups: Vec::new(),
            level_terms: vec![0.0; depth],
            global_term: 0.0,
            log_joint: 0.0,
            log_joint_comp: 0.0,
        };
        for l in 0..depth {
            let slots = if l + 1 < depth { state.labels[l + 1].len() } else { 1 };
            let mut lv = Level {
                member_pos: vec![0; state.labels[l].len()],
                m_z: vec![0; nch],
                mu_z: vec![ExactSum::new(); nch],
                ..Default::default()
            };
            for _ in 0..slots {
                lv.push_slot();
            }
            for (e, &g) in state.labels[l].iter().enumerate() {
                lv.add_member(g, e as u32);
                let nonempty = l == 0 || state.levels[l - 1].size[e] > 0;
                if nonempty {
                    lv.size[g as usize] += 1;
                }
            }
            for g in 0..slots as u32 {
                if lv.size[g as usize] > 0 {
                    lv.mark_nonempty(g);
                }
            }
            for g in (0..slots as u32).rev() {
                if lv.size[g as usize] == 0 {
                    lv.in_free[g as usize] = true;
                    lv.free.push(g);
                }
            }
            state.levels.push(lv);
            if l == 0 {
                let model = Arc::clone(&state.model);
                for e in 0..model.graph().edge_count() {
                    let (s, t) = model.graph().endpoints(e);
                    let key = state.key(state.labels[0][s as usize], state.labels[0][t as usize]);
                    state.add_to_pair(0, key, &model.edge_stats[e]);
                }
            } else {
                let tracking = &state.model.lift_tracking;
                let lower: Vec<(PairKey, PairStats)> = state.levels[l - 1]
                    .pairs
                    .iter()
                    .map(|(k, v)| (*k, v.lifted(tracking)))
                    .collect();
                for ((a, b), lifted) in lower {
                    let key = state.key(state.labels[l][a as usize], state.labels[l][b as usize]);
                    state.add_to_pair(l, key, &lifted);
                }
            }
            let keys: Vec<PairKey> = state.levels[l].pairs.keys().copied().collect();
            for key in keys {
                state.link(l, key);
                let stats = state.levels[l].pairs[&key].clone();
                state.normal_add(l, &stats);
            }
        }
        let model = Arc::clone(&state.model);
        let n = model.node_count();
        state.he_list = vec![Vec::new(); state.levels[0].size.len()];
        state.he_pos = vec![Vec::new(); n];
        for u in 0..n {
            let g = state.labels[0][u] as usize;
            for j in 0..model.node_units[u].len() {
                state.he_pos[u].push(state.he_list[g].len() as u32);
                state.he_list[g].push((u as u32, j as u32));
            }
        }
        for l in 0..depth {
            let terms: Vec<(PairKey, f64)> = state.levels[l]
                .pairs
                .iter()
                .map(|(k, s)| (*k, state.pair_term(l, *k, s)))
                .collect();
            for (k, t) in terms {
                state.levels[l].pairs.get_mut(&k).expect("pair exists").term = t;
            }
            state.level_terms[l] = state.level_term(l);
        }
        state.global_term = state.global_term();
        state.log_joint = state.evidence().total();
        Ok(state)
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn labels(&self, level: usize) -> &[u32] {
        &self.labels[level]
    }

    pub fn label(&self, level: usize, element: u32) -> u32 {
        self.labels[level][element as usize]
    }

    /// The current hierarchy, including empty group slots.
    pub fn partition(&self) -> HierarchicalPartition {
        HierarchicalPartition::new(self.labels.clone()).expect("state labels are always consistent")
    }

    pub fn group_slots(&self, level: usize) -> usize {
        self.levels[level].size.len()
    }

    pub fn element_count(&self, level: usize) -> usize {
        self.labels[level].len()
    }

    pub fn group_size(&self, level: usize, g: u32) -> u64 {
        self.levels[level].size[g as usize]
    }

    pub fn nonempty_groups(&self, level: usize) -> &[u32] {
        &self.levels[level].nonempty
    }

    pub fn group_count(&self, level: usize) -> usize {
        self.levels[level].nonempty.len()
    }

    pub fn members(&self, level: usize, g: u32) -> &[u32] {
        &self.levels[level].members[g as usize]
    }

    /// Whether an element of `level` holds anything (nodes always do).
    pub fn element_nonempty(&self, level: usize, e: u32) -> bool {
        level == 0 || self.levels[level - 1].size[e as usize] > 0
    }

    /// Non-empty elements at `level`.
    pub fn live_elements(&self, level: usize) -> usize {
        if level == 0 {
            self.labels[0].len()
        } else {
            self.levels[level - 1].nonempty.len()
        }
    }

    pub fn key(&self, a: u32, b: u32) -> PairKey {
        if self.model.is_directed() || a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn pair(&self, level: usize, a: u32, b: u32) -> Option<&PairStats> {
        self.levels[level].pairs.get(&self.key(a, b))
    }

    pub fn pairs(&self, level: usize) -> impl Iterator<Item = (&PairKey, &PairStats)> {
        self.levels[level].pairs.iter()
    }

    pub fn incident(&self, level: usize, g: u32) -> &FxHashSet<u32> {
        &self.levels[level].incident[g as usize]
    }

    pub fn pair_edges(&self, level: usize, a: u32, b: u32) -> u64 {
        self.levels[level].pairs.get(&self.key(a, b)).map_or(0, |p| p.m)
    }

    /// Half-edges of `t` ending in `r` (counted twice when `t == r`),
    /// ignoring direction.
    pub fn connection(&self, level: usize, t: u32, r: u32) -> u64 {
        let m = |a, b| self.levels[level].pairs.get(&(a, b)).map_or(0, |p: &PairStats| p.m);
        if t == r {
            2 * m(t, t)
        } else if self.model.is_directed() {
            m(t, r) + m(r, t)
        } else {
            m(t.min(r), t.max(r))
        }
    }

    /// Half-edge total of a group, ignoring direction.
    pub fn group_degree(&self, level: usize, g: u32) -> u64 {
        let lv = &self.levels[level];
        lv.deg_out[g as usize] + lv.deg_in[g as usize]
    }

    pub fn group_out_in(&self, level: usize, g: u32) -> (u64, u64) {
        let lv = &self.levels[level];
        (lv.deg_out[g as usize], lv.deg_in[g as usize])
    }

    /// Half-edges of an element of `level`, ignoring direction.
    pub fn element_degree(&self, level: usize, e: u32) -> u64 {
        if level == 0 {
            self.model.node_units[e as usize].len() as u64
        } else {
            self.group_degree(level - 1, e)
        }
    }

    /// Groups at `level` adjacent to element `e`, with the number of `e`'s
    /// half-edges reaching each.
    pub fn element_neighbor_groups(&self, level: usize, e: u32) -> Vec<(u32, u64)> {
        let mut v: Vec<(u32, u64)> = Vec::new();
        if level == 0 {
            let g = self.model.graph();
            for &ei in &self.model.node_edges[e as usize] {
                let (s, t) = g.endpoints(ei as usize);
                let k = g.multiplicity(ei as usize) as u64;
                if s == t {
                    v.push((self.labels[0][e as usize], 2 * k));
                } else {
                    let other = if s == e { t } else { s };
                    v.push((self.labels[0][other as usize], k));
                }
            }
        } else {
            for &h in &self.levels[level - 1].incident[e as usize] {
                let w = self.connection(level - 1, e, h);
                if w > 0 {
                    v.push((self.labels[level][h as usize], w));
                }
            }
        }
        v.sort_unstable_by_key(|x| x.0);
        let mut out: Vec<(u32, u64)> = Vec::with_capacity(v.len());
        for (g, w) in v {
            match out.last_mut() {
                Some(last) if last.0 == g => last.1 += w,
                _ => out.push((g, w)),
            }
        }
        out
    }

    /// Group at the far end of `e`'s `index`-th half-edge, for
    /// `index < element_degree(level, e)`.
    pub fn element_half_edge_group(&self, level: usize, e: u32, index: u64) -> u32 {
        if level == 0 {
            let v = self.model.node_units[e as usize][index as usize];
            return self.labels[0][v as usize];
        }
        let mut rest = index;
        let mut partners: Vec<u32> = self.levels[level - 1].incident[e as usize].iter().copied().collect();
        partners.sort_unstable();
        for h in partners {
            let w = self.connection(level - 1, e, h);
            if rest < w {
                return self.labels[level][h as usize];
            }
            rest -= w;
        }
        unreachable!("half-edge index out of range")
    }

    /// Group at the far end of group `t`'s `index`-th half-edge.
    pub fn group_half_edge_group(&self, level: usize, t: u32, index: u64) -> u32 {
        if level == 0 {
            let (w, j) = self.he_list[t as usize][index as usize];
            let v = self.model.node_units[w as usize][j as usize];
            return self.labels[0][v as usize];
        }
        let mut rest = index;
        let mut partners: Vec<u32> = self.levels[level].incident[t as usize].iter().copied().collect();
        partners.sort_unstable();
        for x in partners {
            let w = self.connection(level, t, x);
            if rest < w {
                return x;
            }
            rest -= w;
        }
        unreachable!("half-edge index out of range")
    }

    /// Running log-joint maintained from move deltas.
    pub fn log_joint(&self) -> f64 {
        self.log_joint + self.log_joint_comp
    }

    /// Saved running log-joint, for exact restoration after a rejected move.
    pub(crate) fn joint_snapshot(&self) -> (f64, f64) {
        (self.log_joint, self.log_joint_comp)
    }

    pub(crate) fn restore_joint(&mut self, saved: (f64, f64)) {
        (self.log_joint, self.log_joint_comp) = saved;
    }

    /// Replaces the running log-joint with a full recomputation and returns
    /// the drift that had accumulated.
    pub fn resync(&mut self) -> f64 {
        let fresh = self.evidence().total();
        let drift = (fresh - self.log_joint()).abs();
        self.log_joint = fresh;
        self.log_joint_comp = 0.0;
        drift
    }

    fn accumulate(&mut self, delta: f64) {
        let t = self.log_joint + delta;
        if self.log_joint.abs() >= delta.abs() {
            self.log_joint_comp += (self.log_joint - t) + delta;
        } else {
            self.log_joint_comp += (delta - t) + self.log_joint;
        }
        self.log_joint = t;
    }

    // ----- terms -----

    fn pair_term(&self, level: usize, key: PairKey, s: &PairStats) -> f64 {
        if s.m == 0 {
            return 0.0;
        }
        let directed = self.model.is_directed();
        let adj = self.model.adjacency();
        let mut t = if level == 0 {
            adj.base_pair(directed, key.0 == key.1, s.m)
        } else {
            let lv = &self.levels[level];
            adj.upper_pair(
                directed,
                key.0 == key.1,
                lv.size[key.0 as usize],
                lv.size[key.1 as usize],
                s.m,
            )
        };
        for (c, ch) in self.model.channels().iter().enumerate() {
            t += pair_term(ch, c, level, s);
        }
        t
    }

    fn adjacency_pair_term(&self, level: usize, key: PairKey, m: u64) -> f64 {
        let directed = self.model.is_directed();
        let adj = self.model.adjacency();
        if level == 0 {
            adj.base_pair(directed, key.0 == key.1, m)
        } else {
            let lv = &self.levels[level];
            adj.upper_pair(
                directed,
                key.0 == key.1,
                lv.size[key.0 as usize],
                lv.size[key.1 as usize],
                m,
            )
        }
    }

    fn group_adjacency_term(&self, level: usize, g: u32) -> f64 {
        if level != 0 {
            return 0.0;
        }
        let lv = &self.levels[0];
        let i = g as usize;
        self.model
            .adjacency()
            .base_group(self.model.is_directed(), lv.size[i], lv.deg_out[i], lv.deg_in[i])
    }

    fn group_term(&self, level: usize, g: u32) -> f64 {
        prior_group(self.levels[level].size[g as usize]) + self.group_adjacency_term(level, g)
    }

    fn level_prior_term(&self, level: usize) -> f64 {
        prior_level(self.live_elements(level) as u64, self.group_count(level) as u64)
    }

    fn normal_level_term(&self, level: usize, c: usize) -> f64 {
        let lv = &self.levels[level];
        micro::normal_level(lv.m_z[c], lv.mu_z[c].value())
    }

    fn level_term(&self, level: usize) -> f64 {
        let mut t = self.level_prior_term(level);
        for &c in &self.normal_channels {
            t += self.normal_level_term(level, c);
        }
        t
    }

    fn normal_global_term(&self, c: usize) -> f64 {
        let mut l_bar = 0;
        let mut total = 0.0;
        for lv in &self.levels {
            if lv.m_z[c] > 0 {
                l_bar += 1;
                total += lv.m_z[c] as f64 * lv.mu_z[c].value();
            }
        }
        micro::normal_global(l_bar, total)
    }

    fn global_term(&self) -> f64 {
        self.normal_channels.iter().map(|&c| self.normal_global_term(c)).sum()
    }

    /// Full evaluation of every term from the current statistics.
    pub fn evidence(&self) -> EvidenceBreakdown {
        let depth = self.depth();
        let mut adjacency = self.model.adjacency_constant();
        let mut prior = 0.0;
        for l in 0..depth {
            for (key, s) in &self.levels[l].pairs {
                adjacency += self.adjacency_pair_term(l, *key, s.m);
            }
            for &g in &self.levels[l].nonempty {
                adjacency += self.group_adjacency_term(l, g);
                prior += prior_group(self.levels[l].size[g as usize]);
            }
            prior += self.level_prior_term(l);
        }
        let channels = self
            .model
            .channels()
            .iter()
            .enumerate()
            .map(|(c, ch)| {
                let mut lm = ch.constant;
                for l in 0..depth {
                    for s in self.levels[l].pairs.values() {
                        lm += pair_term(ch, c, l, s);
                    }
                    if ch.kind == FamilyKind::NormalMicro {
                        lm += self.normal_level_term(l, c);
                    }
                }
                if ch.kind == FamilyKind::NormalMicro {
                    lm += self.normal_global_term(c);
                }
                ChannelEvidence {
                    name: ch.name.clone(),
                    log_marginal: lm,
                    log_jacobian: ch.log_jacobian,
                }
            })
            .collect();
        EvidenceBreakdown {
            adjacency,
            partition_prior: prior,
            channels,
        }
    }

    /// Log marginal of one channel at the current partition.
    pub fn channel_log_marginal(&self, c: usize) -> f64 {
        self.evidence().channels[c].log_marginal
    }

    /// Normal-family auxiliaries `(m_z, μ_z)` of channel `c` at `level`.
    pub fn normal_auxiliaries(&self, level: usize, c: usize) -> (u64, f64) {
        let lv = &self.levels[level];
        (lv.m_z[c], lv.mu_z[c].value())
    }

    // ----- low-level mutation -----

    fn normal_add(&mut self, level: usize, s: &PairStats) {
        if s.n <= 1 {
            return;
        }
        for i in 0..self.normal_channels.len() {
            let c = self.normal_channels[i];
            let z = s.scaled_variance(c);
            let lv = &mut self.levels[level];
            lv.m_z[c] += 1;
            lv.mu_z[c].add_f64(z);
        }
    }

    /// [`Self::normal_add`] for the stored statistics of pair `key`.
    fn normal_add_key(&mut self, level: usize, key: PairKey) {
        let lv = &mut self.levels[level];
        let s = &lv.pairs[&key];
        if s.n <= 1 {
            return;
        }
        for &c in &self.normal_channels {
            lv.m_z[c] += 1;
            lv.mu_z[c].add_f64(s.scaled_variance(c));
        }
    }

    fn normal_remove(&mut self, level: usize, s: &PairStats) {
        if s.n <= 1 {
            return;
        }
        for i in 0..self.normal_channels.len() {
            let c = self.normal_channels[i];
            let z = s.scaled_variance(c);
            let lv = &mut self.levels[level];
            lv.m_z[c] -= 1;
            lv.mu_z[c].sub_f64(z);
        }
    }

    fn adjust_degrees(&mut self, level: usize, key: PairKey, m: u64, add: bool) {
        let directed = self.model.is_directed();
        let lv = &mut self.levels[level];
        let (a, b) = (key.0 as usize, key.1 as usize);
        let apply = |x: &mut u64, d: u64| {
            if add {
                *x += d
            } else {
                *x -= d
            }
        };
        if directed {
            apply(&mut lv.deg_out[a], m);
            apply(&mut lv.deg_in[b], m);
        } else if a == b {
            apply(&mut lv.deg_out[a], 2 * m);
        } else {
            apply(&mut lv.deg_out[a], m);
            apply(&mut lv.deg_out[b], m);
        }
    }

    /// Used while building: adds statistics without journaling.
    fn add_to_pair(&mut self, level: usize, key: PairKey, c: &PairStats) {
        let nch = self.model.channels().len();
        self.levels[level]
            .pairs
            .entry(key)
            .or_insert_with(|| PairStats::with_channels(nch))
            .add(c);
        self.adjust_degrees(level, key, c.m, true);
    }

    fn link(&mut self, level: usize, key: PairKey) {
        let lv = &mut self.levels[level];
        lv.incident[key.0 as usize].insert(key.1);
        lv.incident[key.1 as usize].insert(key.0);
    }

    fn unlink(&mut self, level: usize, key: PairKey) {
        let (a, b) = key;
        if self.model.is_directed() && a != b && self.levels[level].pairs.contains_key(&(b, a)) {
            return;
        }
        let lv = &mut self.levels[level];
        lv.incident[a as usize].remove(&b);
        lv.incident[b as usize].remove(&a);
    }

    fn touch_pair(&mut self, level: usize, key: PairKey) {
        let epoch = self.epoch;
        let nch = self.model.channels().len();
        let entry = self.levels[level]
            .pairs
            .entry(key)
            .or_insert_with(|| PairStats::with_channels(nch));
        if entry.stamp == epoch {
            return;
        }
        entry.stamp = epoch;
        let old_term = entry.term;
        let old = if self.journal_sums {
            entry.clone()
        } else {
            PairStats {
                m: entry.m,
                n: entry.n,
                ..Default::default()
            }
        };
        debug_assert!(self.journal_sums || self.normal_channels.is_empty());
        self.normal_remove(level, &old);
        self.jpairs[level].push(PairJournal { key, old, old_term });
    }

    fn touch_group(&mut self, level: usize, g: u32) {
        if self.levels[level].group_stamp[g as usize] == self.epoch {
            return;
        }
        self.levels[level].group_stamp[g as usize] = self.epoch;
        let t = self.group_term(level, g);
        self.jgroups.push((level, g, t));
    }

    /// Journals the pairs whose terms depend on the size of `g`.
    fn touch_incident_pairs(&mut self, level: usize, g: u32) {
        if level == 0 || self.model.adjacency().is_fixed() {
            return;
        }
        let partners: Vec<u32> = self.levels[level].incident[g as usize].iter().copied().collect();
        let directed = self.model.is_directed();
        for h in partners {
            for key in [(g, h), (h, g)] {
                let key = if directed { key } else { self.key(key.0, key.1) };
                if self.levels[level].pairs.contains_key(&key) {
                    self.touch_pair(level, key);
                }
            }
        }
    }

    fn modify_pair(&mut self, level: usize, key: PairKey, c: &PairStats, add: bool) {
        if c.m == 0 {
            return;
        }
        self.touch_pair(level, key);
        let p = self.levels[level].pairs.get_mut(&key).expect("touched pair exists");
        if add {
            p.add(c);
        } else {
            p.sub(c);
        }
        self.adjust_degrees(level, key, c.m, add);
    }

    fn change_size(&mut self, level: usize, g: u32, grow: bool) {
        let before = self.levels[level].size[g as usize];
        let after = if grow { before + 1 } else { before - 1 };
        self.levels[level].size[g as usize] = after;
        let parent_level = level + 1;
        if before == 0 {
            self.levels[level].mark_nonempty(g);
            if parent_level < self.depth() {
                let p = self.labels[parent_level][g as usize];
                self.touch_group(parent_level, p);
                self.touch_incident_pairs(parent_level, p);
                self.change_size(parent_level, p, true);
            }
        } else if after == 0 {
            self.levels[level].mark_empty(g);
            if parent_level < self.depth() {
                let p = self.labels[parent_level][g as usize];
                self.touch_group(parent_level, p);
                self.touch_incident_pairs(parent_level, p);
                self.change_size(parent_level, p, false);
            }
        }
    }

    /// Returns an empty group slot at `level` whose parent is `parent`,
    /// reusing a vacated slot when possible.
    pub fn new_group(&mut self, level: usize, parent: u32) -> u32 {
        assert!(level + 1 < self.depth(), "the top level has a single group");
        let lv = &mut self.levels[level];
        let mut reuse = None;
        while let Some(g) = lv.free.pop() {
            lv.in_free[g as usize] = false;
            if lv.size[g as usize] == 0 {
                reuse = Some(g);
                break;
            }
        }
        let up = level + 1;
        match reuse {
            Some(g) => {
                let old = self.labels[up][g as usize];
                if old != parent {
                    self.levels[up].remove_member(old, g);
                    self.levels[up].add_member(parent, g);
                    self.labels[up][g as usize] = parent;
                }
                g
            }
            None => {
                let g = self.levels[level].push_slot();
                if level == 0 {
                    self.he_list.push(Vec::new());
                }
                self.labels[up].push(parent);
                self.levels[up].member_pos.push(0);
                self.levels[up].add_member(parent, g);
                g
            }
        }
    }

    /// Whether moving `u` out of its group at `level` would leave the parent
    /// group at `level + 1` without any non-empty child, given that the
    /// destination is `r`.
    pub fn move_empties_parent(&self, level: usize, u: u32, r: u32) -> bool {
        let s = self.labels[level][u as usize];
        if s == r || !self.element_nonempty(level, u) || level + 1 >= self.depth() {
            return false;
        }
        if self.levels[level].size[s as usize] != 1 {
            return false;
        }
        let up = level + 1;
        let ps = self.labels[up][s as usize];
        if self.levels[up].size[ps as usize] != 1 {
            return false;
        }
        let r_fills_ps = self.labels[up][r as usize] == ps && self.levels[level].size[r as usize] == 0;
        !r_fills_ps
    }

    /// Moves element `u` of `level` into group `r` and returns the change of
    /// the log-joint.
    pub fn move_element(&mut self, level: usize, u: u32, r: u32) -> Result<f64, StateError> {
        let depth = self.depth();
        if level + 1 >= depth {
            return Err(StateError::Level { level, depth });
        }
        if u as usize >= self.labels[level].len() {
            return Err(StateError::Element { level, element: u });
        }
        if r as usize >= self.group_slots(level) {
            return Err(StateError::Group { level, group: r });
        }
        Ok(self.apply_move(level, u, r))
    }

    pub(crate) fn apply_move(&mut self, level: usize, u: u32, r: u32) -> f64 {
        let s = self.labels[level][u as usize];
        if s == r {
            return 0.0;
        }
        // Within one parent group every edge stays in the same parent pair,
        // so parent sums and edge counts are unchanged and only the number
        // of non-empty child pairs can move. Squared child sums still change.
        let same_parent = level + 1 < self.depth()
            && self.labels[level + 1][s as usize] == self.labels[level + 1][r as usize]
            && !self.model.lift_tracking.contains(&Tracked::SumAndSquares);
        self.journal_sums = level + 1 < self.depth() && !same_parent;
        self.epoch += 1;
        for j in self.jpairs.iter_mut() {
            j.clear();
        }
        self.jgroups.clear();
        self.touch_group(level, s);
        self.touch_group(level, r);
        if self.element_nonempty(level, u) {
            self.touch_incident_pairs(level, s);
            self.touch_incident_pairs(level, r);
            self.change_size(level, r, true);
            self.change_size(level, s, false);
        }
        self.levels[level].remove_member(s, u);
        self.levels[level].add_member(r, u);

        let model = Arc::clone(&self.model);
        let directed = model.is_directed();
        let mut changes: Vec<(PairKey, PairKey, Option<PairStats>, u32)> = Vec::new();
        let relabel = |lab: &[u32], x: u32, to: u32| if x == u { to } else { lab[x as usize] };
        if level == 0 {
            let g = model.graph();
            for &ei in &model.node_edges[u as usize] {
                let (a, b) = g.endpoints(ei as usize);
                let lab = &self.labels[0];
                let old = self.key(relabel(lab, a, s), relabel(lab, b, s));
                let new = self.key(relabel(lab, a, r), relabel(lab, b, r));
                changes.push((old, new, None, ei));
            }
        } else {
            let below = level - 1;
            let mut partners: Vec<u32> = self.levels[below].incident[u as usize].iter().copied().collect();
            partners.sort_unstable();
            for h in partners {
                let keys: &[PairKey] = if !directed {
                    &[(u.min(h), u.max(h))]
                } else if h == u {
                    &[(u, u)]
                } else {
                    &[(u, h), (h, u)]
                };
                for &(a, b) in keys {
                    if let Some(p) = self.levels[below].pairs.get(&(a, b)) {
                        let lifted = p.lifted(&model.lift_tracking);
                        let lab = &self.labels[level];
                        let old = self.key(relabel(lab, a, s), relabel(lab, b, s));
                        let new = self.key(relabel(lab, a, r), relabel(lab, b, r));
                        changes.push((old, new, Some(lifted), 0));
                    }
                }
            }
        }
        for (old, new, lifted, ei) in &changes {
            let c = match lifted {
                Some(p) => p,
                None => &model.edge_stats[*ei as usize],
            };
            self.modify_pair(level, *old, c, false);
            self.modify_pair(level, *new, c, true);
        }
        self.labels[level][u as usize] = r;

        if level == 0 {
            let ui = u as usize;
            for j in 0..model.node_units[ui].len() {
                let pos = self.he_pos[ui][j] as usize;
                let list = &mut self.he_list[s as usize];
                list.swap_remove(pos);
                if let Some(&(w, k)) = list.get(pos) {
                    self.he_pos[w as usize][k as usize] = pos as u32;
                }
                self.he_pos[ui][j] = self.he_list[r as usize].len() as u32;
                self.he_list[r as usize].push((u, j as u32));
            }
        }

        if same_parent {
            let entries = std::mem::take(&mut self.jpairs[level]);
            for e in &entries {
                let cur_m = self.levels[level].pairs.get(&e.key).map_or(0, |p| p.m);
                if (cur_m > 0) == (e.old.m > 0) {
                    continue;
                }
                let (a, b) = e.key;
                let pk = self.key(self.labels[level + 1][a as usize], self.labels[level + 1][b as usize]);
                self.touch_pair(level + 1, pk);
                let parent = self.levels[level + 1].pairs.get_mut(&pk).expect("touched pair exists");
                if cur_m > 0 {
                    parent.n += 1;
                } else {
                    parent.n -= 1;
                }
            }
            self.jpairs[level] = entries;
            return self.finish_move();
        }
        for j in level..depth_minus_one(self.depth()) {
            let entries = std::mem::take(&mut self.jpairs[j]);
            for e in &entries {
                let changed = match self.levels[j].pairs.get(&e.key) {
                    Some(cur) => !e.old.same_lift(cur),
                    None => e.old.m > 0,
                };
                if !changed {
                    continue;
                }
                let (a, b) = e.key;
                let pk = self.key(self.labels[j + 1][a as usize], self.labels[j + 1][b as usize]);
                self.touch_pair(j + 1, pk);
                let (lower, upper) = self.levels.split_at_mut(j + 1);
                let empty = PairStats::default();
                let cur = lower[j].pairs.get(&e.key).unwrap_or(&empty);
                let cur_m = cur.m;
                upper[0].pairs.get_mut(&pk).expect("touched pair exists").replace_lift(
                    &e.old,
                    cur,
                    &self.model.lift_tracking,
                );
                self.adjust_degrees(j + 1, pk, e.old.m, false);
                self.adjust_degrees(j + 1, pk, cur_m, true);
            }
            self.jpairs[j] = entries;
        }
        self.finish_move()
    }

    fn finish_move(&mut self) -> f64 {
        let mut delta = 0.0;
        for l in 0..self.depth() {
            let entries = std::mem::take(&mut self.jpairs[l]);
            for e in &entries {
                let cur = self.levels[l].pairs.get(&e.key).expect("journaled pair exists");
                let (term, cur_m) = (self.pair_term(l, e.key, cur), cur.m);
                delta += term - e.old_term;
                self.levels[l]
                    .pairs
                    .get_mut(&e.key)
                    .expect("journaled pair exists")
                    .term = term;
                self.normal_add_key(l, e.key);
                if cur_m == 0 {
                    self.levels[l].pairs.remove(&e.key);
                    if e.old.m > 0 {
                        self.unlink(l, e.key);
                    }
                } else if e.old.m == 0 {
                    self.link(l, e.key);
                }
            }
            self.jpairs[l] = entries;
        }
        let groups = std::mem::take(&mut self.jgroups);
        for &(l, g, old) in &groups {
            delta += self.group_term(l, g) - old;
        }
        self.jgroups = groups;
        for l in 0..self.depth() {
            let t = self.level_term(l);
            delta += t - self.level_terms[l];
            self.level_terms[l] = t;
        }
        let g = self.global_term();
        delta += g - self.global_term;
        self.global_term = g;
        self.accumulate(delta);
        delta
    }

    /// Checks that every statistic equals a from-scratch rebuild; returns the
    /// first discrepancy.
    pub fn check_consistency(&self) -> Result<(), String> {
        let fresh = BlockState::new(Arc::clone(&self.model), &self.partition()).map_err(|e| e.to_string())?;
        for l in 0..self.depth() {
            let a = &self.levels[l];
            let b = &fresh.levels[l];
            if a.pairs.len() != b.pairs.len() {
                return Err(format!(
                    "level {l}: {} pairs, rebuild has {}",
                    a.pairs.len(),
                    b.pairs.len()
                ));
            }
            for (k, p) in &a.pairs {
                match b.pairs.get(k) {
                    Some(q) if p.same_stats(q) && p.term == q.term => {}
                    _ => return Err(format!("level {l}: pair {k:?} differs from rebuild")),
                }
            }
            if a.size != b.size || a.deg_out != b.deg_out || a.deg_in != b.deg_in {
                return Err(format!("level {l}: group sizes or degrees differ from rebuild"));
            }
            if a.m_z != b.m_z || a.mu_z.iter().zip(&b.mu_z).any(|(x, y)| !x.exact_eq(y)) {
                return Err(format!("level {l}: scaled-variance auxiliaries differ from rebuild"));
            }
            let mut ia: Vec<Vec<u32>> = a.incident.iter().map(|s| s.iter().copied().collect()).collect();
            let mut ib: Vec<Vec<u32>> = b.incident.iter().map(|s| s.iter().copied().collect()).collect();
            ia.iter_mut().chain(ib.iter_mut()).for_each(|v| v.sort_unstable());
            if ia != ib {
                return Err(format!("level {l}: incidence differs from rebuild"));
            }
        }
        let lj = fresh.log_joint();
        if (lj - self.log_joint()).abs() > 1e-8 * lj.abs().max(1.0) {
            return Err(format!(
                "running log-joint {} differs from rebuild {}",
                self.log_joint(),
                lj
            ));
        }
        Ok(())
    }
}

fn depth_minus_one(depth: usize) -> usize {
    depth.saturating_sub(1)
}
