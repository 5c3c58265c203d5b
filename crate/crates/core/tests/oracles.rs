//! The incremental state against the from-scratch enumeration oracle, and the
//! single-value marginals against direct constrained sampling.

mod common;

use common::{all_channel_specs, model, random_graph};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wsbm::adjacency::AdjacencyModel;
use wsbm::channel::{ChannelSpec, Family, FamilyKind};
use wsbm::graph::GraphBuilder;
use wsbm::model::Model;
use wsbm::oracle::{
    chi_square_test, constrained_sample, enumerate_posterior, flat_log_joint, ConstrainedStats, OracleError,
};
use wsbm::partition::HierarchicalPartition;
use wsbm::state::BlockState;
use wsbm::weights::marginal::MicroMarginal;

const ADJACENCY: [AdjacencyModel; 3] = [
    AdjacencyModel::DegreeCorrectedMicro,
    AdjacencyModel::NonDegreeCorrectedMicro,
    AdjacencyModel::FixedCompleteGraph,
];

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn state_joint_matches_oracle(
        seed in 0u64..10_000,
        n in 1usize..8,
        edges in 0usize..14,
        directed: bool,
        loops: bool,
        adj in 0usize..3,
        spec in 0usize..8,
        labels_seed in 0u64..1000,
    ) {
        let g = random_graph(seed, n, edges, directed, loops);
        let specs = if spec == 7 { all_channel_specs() } else { vec![all_channel_specs()[spec].clone()] };
        let m = model(g, &specs, ADJACENCY[adj]);
        let mut rng = ChaCha8Rng::seed_from_u64(labels_seed);
        let labels: Vec<u32> = (0..n).map(|_| rand::RngExt::random_range(&mut rng, 0..n as u32)).collect();
        let state = BlockState::new(m.clone(), &HierarchicalPartition::flat(labels.clone())).unwrap();
        let oracle = flat_log_joint(&m, &labels);
        prop_assert!(close(state.log_joint(), oracle, 1e-9), "state {} oracle {}", state.log_joint(), oracle);
    }
}

#[test]
fn enumeration_is_normalised() {
    for seed in 0..6 {
        let g = random_graph(seed, 6, 9, seed % 2 == 0, false);
        let m = model(g, &all_channel_specs()[..2], AdjacencyModel::DegreeCorrectedMicro);
        let post = enumerate_posterior(&m).unwrap();
        assert_eq!(post.partitions.len(), 203);
        let total: f64 = post.probabilities.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn two_nodes_without_edges_follow_the_prior() {
    let g = GraphBuilder::new(2, false, vec![]).build();
    let m = Model::unweighted(g, AdjacencyModel::DegreeCorrectedMicro);
    let post = enumerate_posterior(&m).unwrap();
    assert_eq!(post.partitions, vec![vec![0, 0], vec![0, 1]]);
    // B=1: 1/2. B=2: (1/2!) C(1,1)^{-1} (1/2) for the bottom level, 1/2 for the top.
    let b1 = 0.5f64;
    let b2: f64 = 0.5 * 0.5 * 0.5;
    assert!((post.log_joints[0] - b1.ln()).abs() < 1e-12);
    assert!((post.log_joints[1] - b2.ln()).abs() < 1e-12);
    assert!((post.probabilities[0] - b1 / (b1 + b2)).abs() < 1e-12);
}

#[test]
fn permuting_nodes_permutes_probabilities() {
    let g = random_graph(11, 5, 8, false, true);
    let perm = [3u32, 0, 4, 1, 2];
    let mut b = GraphBuilder::new(5, false, g.channel_names().to_vec());
    let offsets = g.edge_offsets();
    for e in 0..g.edge_count() {
        let (s, t) = g.endpoints(e);
        for i in offsets[e]..offsets[e + 1] {
            let vals: Vec<f64> = (0..g.channel_count()).map(|c| g.channel_values(c)[i]).collect();
            b.add_edge(perm[s as usize], perm[t as usize], &vals).unwrap();
        }
    }
    let specs = all_channel_specs();
    let p1 = enumerate_posterior(&model(g, &specs, AdjacencyModel::DegreeCorrectedMicro)).unwrap();
    let p2 = enumerate_posterior(&model(b.build(), &specs, AdjacencyModel::DegreeCorrectedMicro)).unwrap();
    for (labels, &p) in p1.partitions.iter().zip(&p1.probabilities) {
        let mut moved = vec![0u32; 5];
        for (i, &l) in labels.iter().enumerate() {
            moved[perm[i] as usize] = l;
        }
        let q = p2.probabilities[p2.index_of(&moved).unwrap()];
        assert!((p - q).abs() < 1e-9 * p.max(1e-300).max(q), "{p} vs {q}");
    }
}

#[test]
fn enumeration_rejects_large_graphs() {
    let g = GraphBuilder::new(9, false, vec![]).build();
    let m = Model::unweighted(g, AdjacencyModel::DegreeCorrectedMicro);
    assert_eq!(
        enumerate_posterior(&m).unwrap_err(),
        OracleError::TooLarge { max: 8, found: 9 }
    );
}

#[test]
fn strong_weight_triangle_is_found_by_fit() {
    // Three heavy edges among nodes 0..3 and light ones to node 3..6.
    let mut b = GraphBuilder::new(6, false, vec!["w".into()]);
    for (s, t) in [(0, 1), (1, 2), (0, 2)] {
        b.add_edge(s, t, &[40.0]).unwrap();
    }
    for (s, t) in [(3, 4), (4, 5), (3, 5), (2, 3)] {
        b.add_edge(s, t, &[0.2]).unwrap();
    }
    let specs = [ChannelSpec::new("w", FamilyKind::ExponentialMicro)];
    let m = model(b.build(), &specs, AdjacencyModel::DegreeCorrectedMicro);
    let post = enumerate_posterior(&m).unwrap();
    let best = &post.partitions[post.argmax()];
    let cfg = wsbm::sampler::FitConfig {
        seed: 5,
        start: wsbm::sampler::Start::Agglomerative(wsbm::sampler::InitConfig {
            nested: false,
            ..Default::default()
        }),
        ..Default::default()
    };
    let fit = wsbm::sampler::fit_map(m.clone(), &cfg).unwrap();
    assert_eq!(
        post.index_of(&fit.partition.node_labels(0)),
        Some(post.argmax()),
        "best {best:?}"
    );
}

// ----- constrained samplers -----

const SAMPLES: usize = 100_000;

#[test]
fn exponential_pair_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs: Vec<f64> = constrained_sample(Family::Exponential, 2, ConstrainedStats::sum(2.0), SAMPLES, &mut rng)
        .unwrap()
        .into_iter()
        .map(|v| v[0])
        .collect();
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    // Kolmogorov–Smirnov distance against U(0, 2).
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = x / 2.0;
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // Asymptotic critical value at p = 0.01.
    assert!(d < 1.628 / n.sqrt(), "KS distance {d}");
}

#[test]
fn geometric_compositions_are_equiprobable() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut counts = [0u64; 4];
    for v in constrained_sample(Family::Geometric, 2, ConstrainedStats::sum(3.0), SAMPLES, &mut rng).unwrap() {
        counts[v[0] as usize] += 1;
    }
    let sigma = (SAMPLES as f64 * 0.25 * 0.75).sqrt();
    for c in counts {
        assert!((c as f64 - SAMPLES as f64 / 4.0).abs() < 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn sphere_slice_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let stats = ConstrainedStats {
        sum: 0.0,
        sumsq: 3.0,
        bound: 0,
    };
    let xs: Vec<f64> = constrained_sample(Family::Normal, 3, stats, SAMPLES, &mut rng)
        .unwrap()
        .into_iter()
        .map(|v| v[0])
        .collect();
    let n = xs.len() as f64;
    let m1 = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let sd1 = (m2 / n).sqrt();
    let sd2 = ((xs.iter().map(|x| x.powi(4)).sum::<f64>() / n - m2 * m2) / n).sqrt();
    assert!(m1.abs() < 3.0 * sd1, "mean {m1}");
    assert!((m2 - 1.0).abs() < 3.0 * sd2, "second moment {m2}");
}

/// Histogram of the first coordinate against the marginal, bin by bin,
/// within three multinomial standard deviations (with a small allowance for
/// the quadrature of each bin).
fn check_marginal(family: Family, n: usize, stats: ConstrainedStats, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = constrained_sample(family, n, stats, SAMPLES, &mut rng)
        .unwrap()
        .into_iter()
        .map(|v| v[0])
        .collect();
    let marginal = MicroMarginal::new(family, n as u64, stats.sum, stats.sumsq, stats.bound);
    let total = SAMPLES as f64;
    let cells: Vec<(f64, f64, f64)> = if family.is_discrete() {
        (0..=stats.sum as u64)
            .map(|k| (k as f64, k as f64, marginal.pdf(k as f64)))
            .collect()
    } else {
        let (lo, hi) = marginal.support();
        let bins = 20;
        let w = (hi - lo) / bins as f64;
        (0..bins)
            .map(|i| {
                let a = lo + i as f64 * w;
                let b = a + w;
                (a, b, wsbm::oracle::integrate(|x| marginal.pdf(x), a, b, 4))
            })
            .collect()
    };
    for &(a, b, p) in &cells {
        let observed = xs
            .iter()
            .filter(|&&x| if family.is_discrete() { x == a } else { x >= a && x < b })
            .count() as f64;
        let sigma = (total * p * (1.0 - p)).sqrt().max(1.0);
        assert!(
            (observed - total * p).abs() < 3.0 * sigma + 1e-6 * total,
            "{family:?} n={n} cell [{a}, {b}]: observed {observed}, expected {}",
            total * p
        );
    }
}

#[test]
fn marginals_match_constrained_sampling() {
    check_marginal(Family::Exponential, 4, ConstrainedStats::sum(3.0), 10);
    check_marginal(Family::Exponential, 7, ConstrainedStats::sum(1.5), 11);
    check_marginal(
        Family::Normal,
        5,
        ConstrainedStats {
            sum: 2.0,
            sumsq: 6.0,
            bound: 0,
        },
        12,
    );
    check_marginal(
        Family::Normal,
        8,
        ConstrainedStats {
            sum: -1.0,
            sumsq: 4.0,
            bound: 0,
        },
        13,
    );
    check_marginal(Family::Geometric, 3, ConstrainedStats::sum(6.0), 14);
    check_marginal(
        Family::Binomial,
        3,
        ConstrainedStats {
            sum: 4.0,
            sumsq: 0.0,
            bound: 2,
        },
        15,
    );
    check_marginal(Family::Poisson, 4, ConstrainedStats::sum(5.0), 16);
}

#[test]
fn sampled_population_frequencies_follow_the_joint() {
    // For discrete families the probability of a whole population is
    // exp(pair term + constant); the constrained sampler must agree.
    let cases = [
        (FamilyKind::GeometricMicro, 3u64, 0u64),
        (FamilyKind::BinomialMicro, 3, 2),
        (FamilyKind::PoissonMicro, 3, 0),
    ];
    for (kind, total, bound) in cases {
        let family = kind.family();
        let mut rng = ChaCha8Rng::seed_from_u64(total + bound);
        let stats = ConstrainedStats {
            sum: total as f64,
            sumsq: 0.0,
            bound,
        };
        let draws = constrained_sample(family, 3, stats, SAMPLES, &mut rng).unwrap();
        let mut keys: Vec<Vec<u64>> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for d in draws {
            let k: Vec<u64> = d.iter().map(|&x| x as u64).collect();
            match keys.iter().position(|x| *x == k) {
                Some(i) => counts[i] += 1,
                None => {
                    keys.push(k);
                    counts.push(1);
                }
            }
        }
        let probs: Vec<f64> = keys
            .iter()
            .map(|k| {
                // Three parallel edges between nodes 0 and 1 in one block.
                let mut b = GraphBuilder::new(2, false, vec!["k".into()]);
                for &x in k {
                    b.add_edge(0, 1, &[x as f64]).unwrap();
                }
                let mut spec = ChannelSpec::new("k", kind);
                if bound > 0 {
                    spec.bound = Some(bound);
                }
                let m = Model::from_specs(b.build(), &[spec], AdjacencyModel::FixedCompleteGraph).unwrap();
                let s = BlockState::new(m.into(), &HierarchicalPartition::trivial(2)).unwrap();
                s.channel_log_marginal(0).exp()
            })
            .collect();
        let covered: f64 = probs.iter().sum();
        assert!(covered > 0.999, "{kind:?} covered {covered}");
        let (_, p) = chi_square_test(&counts, &probs.iter().map(|p| p / covered).collect::<Vec<_>>());
        assert!(p > 0.01, "{kind:?} p = {p}");
    }
}
