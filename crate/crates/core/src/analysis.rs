//! Descriptive statistics of fitted states and model comparison.
//!
//! Modularity is reported as a description of a fit, never optimised. Model
//! comparison uses the log posterior odds between two fitted candidates on
//! the same data, each joint including the Jacobians of its transforms.

use crate::adjacency::AdjacencyModel;
use crate::channel::{ChannelSpec, Family};
use crate::evidence::EvidenceBreakdown;
use crate::model::Model;
use crate::partition::HierarchicalPartition;
use crate::sampler::FitResult;
use crate::state::{BlockState, StateError};
use crate::weights::marginal::MicroMarginal;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("modularity is undefined for a graph without edges")]
    NoEdges,
    #[error("level {level} does not exist in a hierarchy of depth {depth}")]
    Level { level: usize, depth: usize },
    #[error("candidates {first:?} and {second:?} were fitted on different data")]
    DifferentData { first: String, second: String },
    #[error("channel index {index} is out of range ({count} channels)")]
    Channel { index: usize, count: usize },
    #[error("channel {name:?} uses a conjugate model; fitted curves need a microcanonical channel")]
    NotMicro { name: String },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    State(#[from] StateError),
}

/// Modularity of one level and its per-group decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Modularity {
    pub level: usize,
    /// `Q = (1/2E) Σ_r (e_rr − e_r²/2E)`.
    pub q: f64,
    /// Non-empty group ids at this level, ascending.
    pub groups: Vec<u32>,
    /// `q_r = B (e_rr/2E − (e_r/2E)²)`, aligned with `groups`; their mean is `q`.
    pub local: Vec<f64>,
}

/// Modularity of the level-`level` partition. Directed graphs are
/// symmetrised: an edge counts towards both of its endpoint groups.
pub fn modularity(state: &BlockState, level: usize) -> Result<Modularity, AnalysisError> {
    if level >= state.depth() {
        return Err(AnalysisError::Level {
            level,
            depth: state.depth(),
        });
    }
    let mut groups = state.nonempty_groups(level).to_vec();
    groups.sort_unstable();
    let degrees: Vec<f64> = groups.iter().map(|&g| state.group_degree(level, g) as f64).collect();
    let two_e: f64 = degrees.iter().sum();
    if two_e == 0.0 {
        return Err(AnalysisError::NoEdges);
    }
    let b = groups.len() as f64;
    let mut q = 0.0;
    let local = groups
        .iter()
        .zip(&degrees)
        .map(|(&g, &e_r)| {
            let e_rr = state.connection(level, g, g) as f64;
            q += e_rr - e_r * e_r / two_e;
            b * (e_rr / two_e - (e_r / two_e).powi(2))
        })
        .collect();
    Ok(Modularity {
        level,
        q: q / two_e,
        groups,
        local,
    })
}

/// A fitted model: its configuration, the partition it found and the
/// evidence at that partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCandidate {
    pub label: String,
    pub channels: Vec<ChannelSpec>,
    pub adjacency: AdjacencyModel,
    pub partition: HierarchicalPartition,
    pub evidence: EvidenceBreakdown,
    /// Fingerprint of the raw graph and covariates.
    pub data: u64,
}

impl ModelCandidate {
    pub fn from_fit(label: impl Into<String>, channels: Vec<ChannelSpec>, fit: &FitResult) -> Self {
        let model = fit.state.model();
        Self {
            label: label.into(),
            channels,
            adjacency: model.adjacency(),
            partition: fit.partition.clone(),
            evidence: fit.evidence.clone(),
            data: model.graph().fingerprint(),
        }
    }

    /// Scores a given partition without fitting.
    pub fn evaluate(
        label: impl Into<String>,
        channels: Vec<ChannelSpec>,
        model: Arc<Model>,
        partition: &HierarchicalPartition,
    ) -> Result<Self, AnalysisError> {
        let state = BlockState::new(Arc::clone(&model), partition)?;
        Ok(Self {
            label: label.into(),
            channels,
            adjacency: model.adjacency(),
            partition: partition.clone(),
            evidence: state.evidence(),
            data: model.graph().fingerprint(),
        })
    }

    /// Joint log-probability including transform Jacobians.
    pub fn log_joint(&self) -> f64 {
        self.evidence.total()
    }
}

/// `ln Λ` between two candidates on the same data. Positive values favour
/// `first`; the magnitude is the strength of that preference in nats.
pub fn posterior_odds(first: &ModelCandidate, second: &ModelCandidate) -> Result<f64, AnalysisError> {
    if first.data != second.data {
        return Err(AnalysisError::DifferentData {
            first: first.label.clone(),
            second: second.label.clone(),
        });
    }
    Ok(first.log_joint() - second.log_joint())
}

/// The fitted distribution of a single covariate value: a mixture of the
/// bottom-level pair marginals weighted by their share of the edges.
#[derive(Clone, Debug)]
pub struct WeightMixture {
    pub channel: String,
    pub family: Family,
    pub components: Vec<(f64, MicroMarginal)>,
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const PANELS: usize = 16;
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == PANELS { b } else { lo + h };
            quadrature::double_exponential::integrate(&f, lo, hi, 1e-12).integral
        })
        .sum()
}

impl WeightMixture {
    /// Density (continuous) or mass (discrete) at `x`, excluding atoms.
    pub fn density(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, c)| w * c.pdf(x)).sum()
    }

    pub fn curve(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&x| self.density(x)).collect()
    }

    /// Point masses with their mixture weights, merged by location.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (w, c) in &self.components {
            for (x, p) in c.atoms() {
                match out.iter_mut().find(|(y, _)| *y == x) {
                    Some(slot) => slot.1 += w * p,
                    None => out.push((x, w * p)),
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Smallest interval holding every component's support.
    pub fn support(&self) -> (f64, f64) {
        self.components
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, c)| {
                let (a, b) = c.support();
                (lo.min(a), hi.max(b))
            })
    }

    /// Total probability, by summation for discrete families and by
    /// quadrature plus atoms for continuous ones. Should be 1.
    pub fn total_mass(&self) -> f64 {
        self.components
            .iter()
            .map(|(w, c)| {
                let (lo, hi) = c.support();
                let mass = if self.family.is_discrete() {
                    (lo as u64..=hi as u64).map(|k| c.pdf(k as f64)).sum()
                } else {
                    let atoms = c.atoms();
                    if atoms.is_empty() {
                        integrate(|x| c.pdf(x), lo, hi)
                    } else {
                        atoms.iter().map(|a| a.1).sum()
                    }
                };
                w * mass
            })
            .sum()
    }
}

/// Fitted single-value distribution of channel `channel` at the bottom
/// level, in transformed coordinates.
pub fn overall_weight_distribution(state: &BlockState, channel: usize) -> Result<WeightMixture, AnalysisError> {
    let model = state.model();
    let count = model.channels().len();
    let ch = model
        .channels()
        .get(channel)
        .ok_or(AnalysisError::Channel { index: channel, count })?;
    if !ch.kind.is_micro() {
        return Err(AnalysisError::NotMicro { name: ch.name.clone() });
    }
    let total: u64 = state.pairs(0).map(|(_, s)| s.m).sum();
    let mut pairs: Vec<_> = state.pairs(0).filter(|(_, s)| s.m > 0).collect();
    pairs.sort_by_key(|(k, _)| **k);
    let components = pairs
        .into_iter()
        .map(|(_, s)| {
            (
                s.m as f64 / total as f64,
                MicroMarginal::new(ch.family(), s.n, s.sum(channel), s.sumsq(channel), ch.bound),
            )
        })
        .collect();
    Ok(WeightMixture {
        channel: ch.name.clone(),
        family: ch.family(),
        components,
    })
}

/// Equal-width histogram of `values` with exactly `bins` rows:
/// `(lower, upper, count)`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, u64)> {
    let bins = bins.max(1);
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if values.is_empty() {
        (lo, hi) = (0.0, 1.0);
    } else if lo == hi {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in values {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct ReportOptions {
    /// Histogram bins per channel.
    pub bins: usize,
    /// Grid points of continuous fitted curves.
    pub points: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { bins: 40, points: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub name: String,
    pub family: Family,
    /// Total probability of the fitted curve; `None` for conjugate channels.
    pub mass: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub nodes: usize,
    pub edges: usize,
    pub directed: bool,
    pub groups_per_level: Vec<usize>,
    pub partition: HierarchicalPartition,
    pub log_joint: f64,
    pub evidence: EvidenceBreakdown,
    /// Empty when the graph has no edges.
    pub modularity: Vec<Modularity>,
    pub channels: Vec<ChannelReport>,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), AnalysisError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| AnalysisError::Io { path, source })
}

/// Writes CSV tables and a JSON summary describing a fitted state:
///
/// - `{channel}.histogram.csv`: empirical histogram of transformed values
/// - `{channel}.curve.csv` and `{channel}.atoms.csv`: fitted distribution
/// - `blocks.level{l}.csv`: edge counts between groups at each level
/// - `modularity.groups.csv` and `modularity.levels.csv`
/// - `summary.json`
///
/// Group ids follow the compacted partition stored in the summary.
pub fn export_fit_report(
    state: &BlockState,
    out_dir: &Path,
    opts: &ReportOptions,
) -> Result<ReportSummary, AnalysisError> {
    std::fs::create_dir_all(out_dir).map_err(|source| AnalysisError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let partition = state.partition().compact();
    let state = BlockState::new(Arc::clone(state.model()), &partition)?;
    let model = state.model();
    let graph = model.graph();

    let mut channels = Vec::new();
    for (c, ch) in model.channels().iter().enumerate() {
        let mut hist = String::from("lower,upper,count,density\n");
        let n = ch.values.len().max(1) as f64;
        for (lo, hi, k) in histogram(&ch.values, opts.bins) {
            writeln!(hist, "{lo},{hi},{k},{}", k as f64 / (n * (hi - lo))).unwrap();
        }
        write_file(out_dir, &format!("{}.histogram.csv", ch.name), &hist)?;

        let mass = match overall_weight_distribution(&state, c) {
            Ok(mix) => {
                let grid: Vec<f64> = if mix.components.is_empty() {
                    Vec::new()
                } else if mix.family.is_discrete() {
                    let top = ch.values.iter().fold(0.0f64, |a, &b| a.max(b));
                    (0..=top as u64).map(|k| k as f64).collect()
                } else {
                    let (lo, hi) = mix.support();
                    let steps = opts.points.max(2) - 1;
                    (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect()
                };
                let mut curve = String::from("x,density\n");
                for (x, y) in grid.iter().zip(mix.curve(&grid)) {
                    writeln!(curve, "{x},{y}").unwrap();
                }
                write_file(out_dir, &format!("{}.curve.csv", ch.name), &curve)?;
                let mut atoms = String::from("x,mass\n");
                for (x, p) in mix.atoms() {
                    writeln!(atoms, "{x},{p}").unwrap();
                }
                write_file(out_dir, &format!("{}.atoms.csv", ch.name), &atoms)?;
                (!mix.components.is_empty()).then(|| mix.total_mass())
            }
            Err(AnalysisError::NotMicro { .. }) => None,
            Err(e) => return Err(e),
        };
        channels.push(ChannelReport {
            name: ch.name.clone(),
            family: ch.family(),
            mass,
        });
    }

    for l in 0..state.depth() {
        let mut rows: Vec<_> = state
            .pairs(l)
            .filter(|(_, s)| s.m > 0)
            .map(|(k, s)| (*k, s.m))
            .collect();
        rows.sort_unstable();
        let mut csv = String::from(if graph.is_directed() {
            "source,target,edges\n"
        } else {
            "r,s,edges\n"
        });
        for ((r, s), m) in rows {
            writeln!(csv, "{r},{s},{m}").unwrap();
        }
        write_file(out_dir, &format!("blocks.level{l}.csv"), &csv)?;
    }

    let modularity = match (0..state.depth())
        .map(|l| modularity(&state, l))
        .collect::<Result<Vec<_>, _>>()
    {
        Ok(m) => m,
        Err(AnalysisError::NoEdges) => Vec::new(),
        Err(e) => return Err(e),
    };
    let mut groups_csv = String::from("level,group,q\n");
    let mut levels_csv = String::from("level,groups,Q\n");
    for m in &modularity {
        for (g, q) in m.groups.iter().zip(&m.local) {
            writeln!(groups_csv, "{},{g},{q}", m.level).unwrap();
        }
        writeln!(levels_csv, "{},{},{}", m.level, m.groups.len(), m.q).unwrap();
    }
    write_file(out_dir, "modularity.groups.csv", &groups_csv)?;
    write_file(out_dir, "modularity.levels.csv", &levels_csv)?;

    let summary = ReportSummary {
        nodes: graph.node_count(),
        edges: graph.total_multiplicity(),
        directed: graph.is_directed(),
        groups_per_level: (0..state.depth()).map(|l| state.group_count(l)).collect(),
        partition,
        log_joint: state.log_joint(),
        evidence: state.evidence(),
        modularity,
        channels,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail");
    write_file(out_dir, "summary.json", &json)?;
    Ok(summary)
}
