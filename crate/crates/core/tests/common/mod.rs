//! Shared fixtures for integration tests.
#![allow(dead_code)]

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use wsbm::adjacency::AdjacencyModel;
use wsbm::channel::{ChannelSpec, FamilyKind};
use wsbm::graph::{GraphBuilder, WeightedGraph};
use wsbm::model::Model;
use wsbm::partition::HierarchicalPartition;

/// Random multigraph with a real channel `x` (signed), a positive channel `p`
/// and a count channel `k` in `0..=4`.
pub fn random_graph(seed: u64, n: usize, edges: usize, directed: bool, loops: bool) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = GraphBuilder::new(n, directed, vec!["x".into(), "p".into(), "k".into()]);
    for _ in 0..edges {
        let s = rng.random_range(0..n as u32);
        let mut t = rng.random_range(0..n as u32);
        if !loops && n > 1 {
            while t == s {
                t = rng.random_range(0..n as u32);
            }
        }
        let x: f64 = rng.random_range(-3.0..3.0);
        let p: f64 = rng.random_range(0.01..5.0);
        let k = rng.random_range(0..=4u32) as f64;
        b.add_edge(s, t, &[x, p, k]).unwrap();
    }
    b.build()
}

pub fn all_channel_specs() -> Vec<ChannelSpec> {
    vec![
        ChannelSpec::new("x", FamilyKind::NormalMicro),
        ChannelSpec::new("p", FamilyKind::ExponentialMicro),
        ChannelSpec::new("k", FamilyKind::GeometricMicro),
        ChannelSpec::new("k", FamilyKind::PoissonMicro),
        ChannelSpec::new("k", FamilyKind::BinomialMicro),
        ChannelSpec::new("x", FamilyKind::NormalConjugate),
        ChannelSpec::new("p", FamilyKind::ExponentialConjugate),
    ]
}

pub fn model(graph: WeightedGraph, specs: &[ChannelSpec], adjacency: AdjacencyModel) -> Arc<Model> {
    Arc::new(Model::from_specs(graph, specs, adjacency).unwrap())
}

/// Random hierarchy with `depth` levels and roughly halving group counts.
pub fn random_hierarchy(seed: u64, n: usize, depth: usize) -> HierarchicalPartition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut levels = Vec::new();
    let mut count = n;
    for l in 0..depth {
        if l + 1 == depth {
            levels.push(vec![0; count]);
        } else {
            let groups = (count / 2).max(1);
            levels.push((0..count).map(|_| rng.random_range(0..groups as u32)).collect());
            count = groups;
        }
    }
    HierarchicalPartition::new(levels).unwrap()
}

/// Labels `0..b` in contiguous blocks of equal size.
pub fn planted_labels(n: usize, b: usize) -> Vec<u32> {
    (0..n).map(|i| (i * b / n) as u32).collect()
}
