//! Annealed MAP search and posterior sampling over independent chains.

use super::init::{agglomerative_init, trim_redundant_levels, with_movable_bottom, InitConfig};
use super::sweep::sweep;
use super::SamplerError;
use crate::evidence::EvidenceBreakdown;
use crate::model::Model;
use crate::partition::HierarchicalPartition;
use crate::state::BlockState;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use std::sync::Arc;

/// Where a chain starts.
#[derive(Clone, Debug, PartialEq)]
pub enum Start {
    Agglomerative(InitConfig),
    /// Every node in one group.
    Trivial,
    Given(HierarchicalPartition),
}

impl Default for Start {
    fn default() -> Self {
        Self::Agglomerative(InitConfig::default())
    }
}

/// `β = 1, 2, 4, …, 2^20`, each for `sweeps` sweeps.
pub fn default_schedule(sweeps: usize) -> Vec<(f64, usize)> {
    (0..=20).map(|k| (2f64.powi(k), sweeps)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub seed: u64,
    pub chains: usize,
    pub epsilon: f64,
    /// `(β, sweeps)` stages with strictly increasing `β`.
    pub schedule: Vec<(f64, usize)>,
    /// Upper bound on the final greedy sweeps; they stop early once no move
    /// is accepted.
    pub greedy_sweeps: usize,
    pub start: Start,
    /// Recompute the joint from scratch every this many sweeps (0 disables).
    pub check_every: usize,
    /// Print progress lines to standard error.
    pub progress: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            chains: 1,
            epsilon: 1.0,
            schedule: default_schedule(5),
            greedy_sweeps: 20,
            start: Start::default(),
            check_every: 0,
            progress: false,
        }
    }
}

fn validate_common(epsilon: f64, chains: usize) -> Result<(), SamplerError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(SamplerError::Config(format!(
            "proposal epsilon must be positive, got {epsilon}"
        )));
    }
    if chains == 0 {
        return Err(SamplerError::Config("at least one chain is required".into()));
    }
    Ok(())
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        validate_common(self.epsilon, self.chains)?;
        let mut last = 0.0;
        for &(beta, _) in &self.schedule {
            if beta.is_nan() || beta <= last {
                return Err(SamplerError::Config(format!(
                    "annealing betas must be positive and strictly increasing, got {beta} after {last}"
                )));
            }
            last = beta;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Best partition, compacted and without redundant single-group levels.
    pub partition: HierarchicalPartition,
    pub evidence: EvidenceBreakdown,
    pub log_joint: f64,
    /// Best joint reached by each chain.
    pub chain_log_joints: Vec<f64>,
    /// Largest gap seen between the running joint and a full recomputation.
    pub max_drift: f64,
    pub state: BlockState,
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn start_state(
    model: &Arc<Model>,
    start: &Start,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<BlockState, SamplerError> {
    let partition = match start {
        Start::Agglomerative(cfg) => {
            let cfg = InitConfig { epsilon, ..cfg.clone() };
            agglomerative_init(Arc::clone(model), &cfg, rng)
        }
        Start::Trivial => HierarchicalPartition::flat(vec![0; model.node_count()]),
        Start::Given(p) => with_movable_bottom(p),
    };
    Ok(BlockState::new(Arc::clone(model), &partition)?)
}

fn group_counts(state: &BlockState) -> Vec<usize> {
    (0..state.depth()).map(|l| state.group_count(l)).collect()
}

struct ChainOutcome {
    partition: HierarchicalPartition,
    log_joint: f64,
    max_drift: f64,
}

fn run_fit_chain(model: &Arc<Model>, cfg: &FitConfig, chain: usize) -> Result<ChainOutcome, SamplerError> {
    let mut rng = chain_rng(cfg.seed, chain);
    let mut state = start_state(model, &cfg.start, cfg.epsilon, &mut rng)?;
    let mut best = (state.log_joint(), state.partition());
    let mut max_drift: f64 = 0.0;
    let mut done = 0usize;
    let stages = cfg
        .schedule
        .iter()
        .copied()
        .chain(std::iter::once((f64::INFINITY, cfg.greedy_sweeps)));
    for (beta, sweeps) in stages {
        for _ in 0..sweeps {
            let stats = sweep(&mut state, beta, cfg.epsilon, None, &mut rng);
            done += 1;
            if cfg.check_every > 0 && done.is_multiple_of(cfg.check_every) {
                max_drift = max_drift.max(state.resync());
            }
            if state.log_joint() > best.0 {
                best = (state.log_joint(), state.partition());
            }
            if beta.is_infinite() && stats.accepted == 0 {
                break;
            }
        }
        if cfg.progress {
            eprintln!(
                "chain {chain} beta {beta} sweeps {done} log_joint {:.6} groups {:?}",
                state.log_joint(),
                group_counts(&state)
            );
        }
    }
    let partition = trim_redundant_levels(&best.1);
    let fresh = BlockState::new(Arc::clone(model), &partition)?;
    Ok(ChainOutcome {
        log_joint: fresh.log_joint(),
        partition,
        max_drift,
    })
}

/// Runs `f(chain)` for every chain, concurrently when there are several, and
/// returns the outcomes in chain order.
fn run_chains<T: Send>(chains: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    if chains == 1 {
        return vec![f(0)];
    }
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains).map(|c| scope.spawn(move || f(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain worker panicked"))
            .collect()
    })
}

/// Finds the most probable hierarchy: initialisation, annealing through the
/// schedule, then greedy sweeps. Each chain keeps the best partition it saw;
/// the best chain wins, ties going to the lowest chain index.
pub fn fit_map(model: Arc<Model>, cfg: &FitConfig) -> Result<FitResult, SamplerError> {
    cfg.validate()?;
    let outcomes = run_chains(cfg.chains, |c| run_fit_chain(&model, cfg, c));
    let outcomes: Vec<ChainOutcome> = outcomes.into_iter().collect::<Result<_, _>>()?;
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.log_joint > outcomes[best].log_joint {
            best = i;
        }
    }
    let winner = &outcomes[best];
    let state = BlockState::new(Arc::clone(&model), &winner.partition)?;
    Ok(FitResult {
        partition: winner.partition.clone(),
        evidence: state.evidence(),
        log_joint: winner.log_joint,
        chain_log_joints: outcomes.iter().map(|o| o.log_joint).collect(),
        max_drift: outcomes.iter().map(|o| o.max_drift).fold(0.0, f64::max),
        state,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleConfig {
    pub seed: u64,
    pub chains: usize,
    pub epsilon: f64,
    /// Sweeps per chain at `β = 1`, including burn-in.
    pub sweeps: usize,
    /// Defaults to half of `sweeps`.
    pub burn_in: Option<usize>,
    /// Keep every `thin`-th sweep after burn-in.
    pub thin: usize,
    pub start: Start,
    pub check_every: usize,
    pub progress: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            chains: 1,
            epsilon: 1.0,
            sweeps: 1000,
            burn_in: None,
            thin: 10,
            start: Start::default(),
            check_every: 0,
            progress: false,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        validate_common(self.epsilon, self.chains)?;
        if self.thin == 0 {
            return Err(SamplerError::Config("thinning interval must be at least 1".into()));
        }
        if self.burn_in.is_some_and(|b| b >= self.sweeps) {
            return Err(SamplerError::Config("burn-in must be shorter than the run".into()));
        }
        Ok(())
    }

    pub fn effective_burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.sweeps / 2)
    }
}

#[derive(Clone, Debug)]
pub struct PosteriorSamples {
    /// Retained hierarchies (compacted), pooled over chains in chain order.
    pub partitions: Vec<HierarchicalPartition>,
    pub log_joints: Vec<f64>,
    /// Bottom-level labels of the most probable retained sample; the group
    /// columns of `marginals` follow these labels.
    pub reference: Vec<u32>,
    /// `marginals[i][r]`: fraction of samples placing node `i` in group `r`
    /// after aligning each sample's labels with `reference`.
    pub marginals: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub max_drift: f64,
}

struct SampleChain {
    partitions: Vec<HierarchicalPartition>,
    log_joints: Vec<f64>,
    attempts: usize,
    accepted: usize,
    max_drift: f64,
}

fn run_sample_chain(model: &Arc<Model>, cfg: &SampleConfig, chain: usize) -> Result<SampleChain, SamplerError> {
    let mut rng = chain_rng(cfg.seed, chain);
    let mut state = start_state(model, &cfg.start, cfg.epsilon, &mut rng)?;
    let burn_in = cfg.effective_burn_in();
    let mut out = SampleChain {
        partitions: Vec::new(),
        log_joints: Vec::new(),
        attempts: 0,
        accepted: 0,
        max_drift: 0.0,
    };
    for s in 1..=cfg.sweeps {
        let stats = sweep(&mut state, 1.0, cfg.epsilon, None, &mut rng);
        out.attempts += stats.attempts;
        out.accepted += stats.accepted;
        if cfg.check_every > 0 && s % cfg.check_every == 0 {
            out.max_drift = out.max_drift.max(state.resync());
        }
        if s > burn_in && (s - burn_in).is_multiple_of(cfg.thin) {
            out.partitions.push(state.partition().compact());
            out.log_joints.push(state.log_joint());
        }
        if cfg.progress && s % 100 == 0 {
            eprintln!(
                "chain {chain} sweep {s} log_joint {:.6} groups {:?}",
                state.log_joint(),
                group_counts(&state)
            );
        }
    }
    Ok(out)
}

/// Maps the labels of `labels` onto `reference` by greedy maximum overlap.
/// Unmatched groups get fresh labels after the reference ones.
pub fn align_labels(labels: &[u32], reference: &[u32]) -> Vec<u32> {
    let mut overlap: FxHashMap<(u32, u32), usize> = FxHashMap::default();
    for (&a, &b) in labels.iter().zip(reference) {
        *overlap.entry((a, b)).or_default() += 1;
    }
    let mut pairs: Vec<((u32, u32), usize)> = overlap.into_iter().collect();
    pairs.sort_unstable_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    let mut map: FxHashMap<u32, u32> = FxHashMap::default();
    let mut taken: FxHashMap<u32, ()> = FxHashMap::default();
    for ((a, b), _) in pairs {
        if map.contains_key(&a) || taken.contains_key(&b) {
            continue;
        }
        map.insert(a, b);
        taken.insert(b, ());
    }
    let mut next = reference.iter().copied().max().map_or(0, |m| m + 1);
    labels
        .iter()
        .map(|&a| {
            *map.entry(a).or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

/// Samples hierarchies at `β = 1` after burn-in and summarises the bottom
/// level as per-node group-membership frequencies.
pub fn sample_posterior(model: Arc<Model>, cfg: &SampleConfig) -> Result<PosteriorSamples, SamplerError> {
    cfg.validate()?;
    let chains = run_chains(cfg.chains, |c| run_sample_chain(&model, cfg, c));
    let chains: Vec<SampleChain> = chains.into_iter().collect::<Result<_, _>>()?;
    let mut partitions = Vec::new();
    let mut log_joints = Vec::new();
    let (mut attempts, mut accepted, mut max_drift) = (0, 0, 0.0f64);
    for c in chains {
        partitions.extend(c.partitions);
        log_joints.extend(c.log_joints);
        attempts += c.attempts;
        accepted += c.accepted;
        max_drift = max_drift.max(c.max_drift);
    }
    let n = model.node_count();
    let best = (0..log_joints.len()).fold(None, |b: Option<usize>, i| match b {
        Some(j) if log_joints[j] >= log_joints[i] => Some(j),
        _ => Some(i),
    });
    let reference = best.map_or_else(|| vec![0; n], |i| partitions[i].levels()[0].clone());
    let mut counts: Vec<Vec<f64>> = vec![Vec::new(); n];
    for p in &partitions {
        for (i, g) in align_labels(&p.levels()[0], &reference).into_iter().enumerate() {
            let row = &mut counts[i];
            if row.len() <= g as usize {
                row.resize(g as usize + 1, 0.0);
            }
            row[g as usize] += 1.0;
        }
    }
    let width = counts.iter().map(Vec::len).max().unwrap_or(0);
    let total = partitions.len().max(1) as f64;
    let marginals = counts
        .into_iter()
        .map(|mut row| {
            row.resize(width, 0.0);
            row.iter_mut().for_each(|x| *x /= total);
            row
        })
        .collect();
    Ok(PosteriorSamples {
        partitions,
        log_joints,
        reference,
        marginals,
        acceptance_rate: if attempts == 0 {
            0.0
        } else {
            accepted as f64 / attempts as f64
        },
        max_drift,
    })
}
