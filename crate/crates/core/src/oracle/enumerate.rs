//! Exact posterior over flat partitions of tiny graphs.
//!
//! A flat partition is the two-level hierarchy whose top level holds a
//! single group. Every set partition of up to eight nodes is visited as a
//! restricted growth string and scored from plain sums over the edge list.

use super::OracleError;
use crate::adjacency::AdjacencyModel;
use crate::channel::{Family, FamilyKind, PreparedChannel, Prior};
use crate::model::Model;
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const MAX_NODES: usize = 8;

fn lgamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

fn lfact(n: u64) -> f64 {
    lgamma(n as f64 + 1.0)
}

fn lchoose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    lfact(n) - lfact(k) - lfact(n - k)
}

/// Number of ways to put `k` indistinct items in `n` bins, in log.
fn lbins(n: u64, k: u64) -> f64 {
    if k == 0 {
        0.0
    } else {
        lchoose(n + k - 1, k)
    }
}

/// Exact posterior over all flat partitions, in restricted growth order.
#[derive(Clone, Debug)]
pub struct EnumeratedPosterior {
    pub partitions: Vec<Vec<u32>>,
    pub log_joints: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl EnumeratedPosterior {
    /// Position of `labels` (any labelling) in the enumeration.
    pub fn index_of(&self, labels: &[u32]) -> Option<usize> {
        let canon = relabel(labels);
        self.partitions.iter().position(|p| *p == canon)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &lj) in self.log_joints.iter().enumerate() {
            if lj > self.log_joints[best] {
                best = i;
            }
        }
        best
    }
}

/// Relabels groups in order of first appearance.
fn relabel(labels: &[u32]) -> Vec<u32> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|&x| {
            let next = map.len() as u32;
            *map.entry(x).or_insert(next)
        })
        .collect()
}

fn restricted_growth_strings(n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(i: usize, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=max + 1 {
            cur[i] = v;
            rec(i + 1, max.max(v), cur, out);
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    rec(1, 0, &mut cur, &mut out);
    out
}

pub fn enumerate_posterior(model: &Model) -> Result<EnumeratedPosterior, OracleError> {
    let n = model.node_count();
    if n > MAX_NODES {
        return Err(OracleError::TooLarge {
            max: MAX_NODES,
            found: n,
        });
    }
    let partitions = restricted_growth_strings(n);
    let log_joints: Vec<f64> = partitions.iter().map(|p| flat_log_joint(model, p)).collect();
    let max = log_joints.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_joints.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(EnumeratedPosterior {
        partitions,
        log_joints,
        probabilities: weights.iter().map(|w| w / z).collect(),
    })
}

/// One bottom-level group pair: its edge count and per-channel values.
#[derive(Default)]
struct Block {
    edges: u64,
    values: Vec<Vec<f64>>,
}

/// Joint log-probability of the flat partition `labels`, computed from
/// scratch.
pub fn flat_log_joint(model: &Model, labels: &[u32]) -> f64 {
    let graph = model.graph();
    let n = graph.node_count();
    assert_eq!(labels.len(), n);
    let directed = graph.is_directed();
    let labels = relabel(labels);
    let b = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let mut size = vec![0u64; b];
    for &r in &labels {
        size[r as usize] += 1;
    }

    // Partition prior: bottom level, then the single-group top level.
    let mut total = 0.0;
    if n > 0 {
        total += -lfact(n as u64) - lchoose(n as u64 - 1, b as u64 - 1) - (n as f64).ln();
        total += size.iter().map(|&s| lfact(s)).sum::<f64>();
        total += -(b as f64).ln();
    }

    // Group-pair blocks.
    let channels = model.channels();
    let offsets = graph.edge_offsets();
    let mut blocks: BTreeMap<(u32, u32), Block> = BTreeMap::new();
    let mut edges_total = 0u64;
    for e in 0..graph.edge_count() {
        let (s, t) = graph.endpoints(e);
        let (r, q) = (labels[s as usize], labels[t as usize]);
        let key = if directed || r <= q { (r, q) } else { (q, r) };
        let k = graph.multiplicity(e) as u64;
        let block = blocks.entry(key).or_insert_with(|| Block {
            edges: 0,
            values: vec![Vec::new(); channels.len()],
        });
        block.edges += k;
        edges_total += k;
        for (c, ch) in channels.iter().enumerate() {
            block.values[c].extend_from_slice(&ch.values[offsets[e]..offsets[e + 1]]);
        }
    }

    total += adjacency_term(model, &labels, &size, &blocks, edges_total);
    for (c, ch) in channels.iter().enumerate() {
        total += channel_term(ch, c, &blocks) + ch.log_jacobian;
    }
    total
}

fn adjacency_term(
    model: &Model,
    labels: &[u32],
    size: &[u64],
    blocks: &BTreeMap<(u32, u32), Block>,
    edges_total: u64,
) -> f64 {
    let adj = model.adjacency();
    if adj == AdjacencyModel::FixedCompleteGraph {
        return 0.0;
    }
    let graph = model.graph();
    let directed = graph.is_directed();
    let b = size.len() as u64;
    let mut t = 0.0;

    // Edge placement inside each block, and multiplicity corrections.
    for (&(r, q), block) in blocks {
        let m = block.edges;
        t += lfact(m);
        if !directed && r == q {
            t += m as f64 * 2f64.ln();
        }
    }
    for e in 0..graph.edge_count() {
        let (s, u) = graph.endpoints(e);
        let k = graph.multiplicity(e) as u64;
        t -= lfact(k);
        if !directed && s == u {
            t -= k as f64 * 2f64.ln();
        }
    }

    // Half-edge totals per group and node degrees.
    let mut k_out = vec![0u64; graph.node_count()];
    let mut k_in = vec![0u64; graph.node_count()];
    for e in 0..graph.edge_count() {
        let (s, u) = graph.endpoints(e);
        let k = graph.multiplicity(e) as u64;
        k_out[s as usize] += k;
        if directed {
            k_in[u as usize] += k;
        } else {
            k_out[u as usize] += k;
        }
    }
    let mut e_out = vec![0u64; size.len()];
    let mut e_in = vec![0u64; size.len()];
    for (i, &r) in labels.iter().enumerate() {
        e_out[r as usize] += k_out[i];
        e_in[r as usize] += k_in[i];
    }

    match adj {
        AdjacencyModel::DegreeCorrectedMicro => {
            for i in 0..graph.node_count() {
                t += lfact(k_out[i]) + if directed { lfact(k_in[i]) } else { 0.0 };
            }
            for r in 0..size.len() {
                t += -lfact(e_out[r]) - lbins(size[r], e_out[r]);
                if directed {
                    t += -lfact(e_in[r]) - lbins(size[r], e_in[r]);
                }
            }
        }
        AdjacencyModel::NonDegreeCorrectedMicro => {
            for r in 0..size.len() {
                let k = e_out[r] + e_in[r];
                if k > 0 {
                    t -= k as f64 * (size[r] as f64).ln();
                }
            }
        }
        AdjacencyModel::FixedCompleteGraph => unreachable!(),
    }

    // Top level: all edges form one self-pair spread over the group pairs.
    let slots = if directed { b * b } else { b * (b + 1) / 2 };
    t -= lbins(slots, edges_total);
    t
}

fn as_int(x: f64) -> u64 {
    x.round().max(0.0) as u64
}

/// `ln` of one over the volume of the simplex `Σx = μ` in `n` values.
fn simplex(n: u64, mu: f64) -> f64 {
    if n <= 1 || mu <= 0.0 {
        return 0.0;
    }
    lfact(n - 1) - (n - 1) as f64 * mu.ln()
}

/// Scaled variance with the same relative cut-off as the model, so that
/// populations of equal values are degenerate on both sides.
fn spread(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let s: f64 = values.iter().sum();
    let q: f64 = values.iter().map(|v| v * v).sum();
    let z = q - s * s / n;
    if z <= 1e-12 * q.abs() {
        0.0
    } else {
        z
    }
}

/// `ln` of one over the surface of the sphere slice of squared radius `z`.
fn sphere(n: u64, z: f64) -> f64 {
    if n <= 1 || z <= 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    lgamma((nf - 1.0) / 2.0) + 0.5 * nf.ln() - (nf - 1.0) / 2.0 * PI.ln() - (nf - 3.0) / 2.0 * z.ln()
}

fn compositions(n: u64, mu: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    -lbins(n, mu)
}

fn channel_term(ch: &PreparedChannel, c: usize, blocks: &BTreeMap<(u32, u32), Block>) -> f64 {
    let family = ch.family();
    let pops: Vec<&[f64]> = blocks.values().map(|b| b.values[c].as_slice()).collect();
    let sums: Vec<f64> = pops.iter().map(|p| p.iter().sum()).collect();
    let all: Vec<f64> = pops.iter().flat_map(|p| p.iter().copied()).collect();
    let mut t = match family {
        Family::Binomial => all.iter().map(|&x| lchoose(ch.bound, as_int(x))).sum(),
        Family::Poisson => -all.iter().map(|&x| lfact(as_int(x))).sum::<f64>(),
        _ => 0.0,
    };
    if !ch.kind.is_micro() {
        for p in &pops {
            t += conjugate(family, &ch.prior, ch.bound, p);
        }
        return t;
    }
    // Bottom level.
    for (p, &s) in pops.iter().zip(&sums) {
        let m = p.len() as u64;
        t += match family {
            Family::Exponential => simplex(m, s),
            Family::Normal => sphere(m, spread(p)),
            Family::Geometric => compositions(m, as_int(s)),
            Family::Binomial => -lchoose(ch.bound * m, as_int(s)),
            Family::Poisson => lfact(as_int(s)) - s * (m as f64).ln(),
        };
    }
    // Top level: one population made of the bottom pair sums.
    let n_top = sums.len() as u64;
    let total: f64 = sums.iter().sum();
    t += match family {
        Family::Exponential => simplex(n_top, total),
        Family::Normal => sphere(n_top, if n_top > 1 { spread(&sums) } else { 0.0 }),
        _ => compositions(n_top, as_int(total)),
    };
    if ch.kind == FamilyKind::NormalMicro {
        // Scaled variances of each level are uniform on their own simplex,
        // and the per-level totals on theirs.
        let bottom: Vec<f64> = pops.iter().filter(|p| p.len() > 1).map(|p| spread(p)).collect();
        let top: Vec<f64> = if n_top > 1 { vec![spread(&sums)] } else { Vec::new() };
        let mut totals = Vec::new();
        for zs in [bottom, top] {
            let mz = zs.len() as u64;
            if mz == 0 {
                continue;
            }
            let muz: f64 = zs.iter().sum();
            t += (mz as f64).ln();
            t += simplex(mz, muz);
            totals.push(mz as f64 * muz);
        }
        t += simplex(totals.len() as u64, totals.iter().sum());
    }
    t
}

fn conjugate(family: Family, prior: &Prior, bound: u64, values: &[f64]) -> f64 {
    let m = values.len() as f64;
    if values.is_empty() {
        return 0.0;
    }
    let s: f64 = values.iter().sum();
    let lbeta = |a: f64, b: f64| lgamma(a) + lgamma(b) - lgamma(a + b);
    match (family, *prior) {
        (Family::Exponential, Prior::Gamma { alpha, beta }) => {
            alpha * beta.ln() - lgamma(alpha) + lgamma(alpha + m) - (alpha + m) * (beta + s).ln()
        }
        (Family::Poisson, Prior::Gamma { alpha, beta }) => {
            alpha * beta.ln() - lgamma(alpha) + lgamma(alpha + s) - (alpha + s) * (beta + m).ln()
        }
        (Family::Geometric, Prior::Beta { alpha, beta }) => lbeta(alpha + m, beta + s) - lbeta(alpha, beta),
        (Family::Binomial, Prior::Beta { alpha, beta }) => {
            lbeta(alpha + s, beta + bound as f64 * m - s) - lbeta(alpha, beta)
        }
        (
            Family::Normal,
            Prior::NormalInvChi2 {
                mu0,
                kappa0,
                nu0,
                sigma0_sq,
            },
        ) => {
            let mean = s / m;
            let ss: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
            let kn = kappa0 + m;
            let nn = nu0 + m;
            let scatter = nu0 * sigma0_sq + ss + kappa0 * m * (mean - mu0).powi(2) / kn;
            lgamma(nn / 2.0) - lgamma(nu0 / 2.0) + 0.5 * (kappa0 / kn).ln() + 0.5 * nu0 * (nu0 * sigma0_sq).ln()
                - 0.5 * nn * scatter.ln()
                - 0.5 * m * PI.ln()
        }
        _ => panic!("prior does not match the family"),
    }
}
