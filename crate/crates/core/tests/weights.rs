//! Weight likelihood values checked against enumeration, Monte Carlo volume
//! estimates and numerical integration over the conjugate priors.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use wsbm::adjacency::AdjacencyModel;
use wsbm::channel::{ChannelSpec, FamilyKind, Prior};
use wsbm::evidence::combine_channels;
use wsbm::graph::GraphBuilder;
use wsbm::model::Model;
use wsbm::oracle::integrate;
use wsbm::partition::HierarchicalPartition;
use wsbm::state::BlockState;
use wsbm::weights::marginal::micro_marginal_pdf;

/// Log marginal of a single channel for `edges` (source, target, value)
/// under `partition`.
fn channel_ll(
    n: usize,
    edges: &[(u32, u32, f64)],
    kind: FamilyKind,
    bound: Option<u64>,
    partition: &HierarchicalPartition,
) -> f64 {
    let mut b = GraphBuilder::new(n, false, vec!["w".into()]);
    for &(s, t, x) in edges {
        b.add_edge(s, t, &[x]).unwrap();
    }
    let mut spec = ChannelSpec::new("w", kind);
    spec.bound = bound;
    let m = Model::from_specs(b.build(), &[spec], AdjacencyModel::FixedCompleteGraph).unwrap();
    let s = BlockState::new(Arc::new(m), partition).unwrap();
    s.channel_log_marginal(0)
}

/// One pair holding every value: two nodes, one group.
fn single_pair(values: &[f64], kind: FamilyKind, bound: Option<u64>) -> f64 {
    let edges: Vec<_> = values.iter().map(|&x| (0, 1, x)).collect();
    channel_ll(2, &edges, kind, bound, &HierarchicalPartition::trivial(2))
}

#[test]
fn exponential_pair_matches_simplex_volume() {
    let ll = single_pair(&[1.0, 2.0, 3.0], FamilyKind::ExponentialMicro, None);
    assert!((ll - (1.0f64 / 18.0).ln()).abs() < 1e-12);
    // Monte Carlo volume of {x ≥ 0, x1 + x2 ≤ 6}: the free coordinates of
    // the simplex Σx = 6 in three values.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 200_000;
    let inside = (0..draws)
        .filter(|_| rng.random_range(0.0..6.0) + rng.random_range(0.0..6.0) <= 6.0)
        .count() as f64;
    let volume = inside / draws as f64 * 36.0;
    let sigma = 36.0 * (0.25f64 / draws as f64).sqrt();
    assert!((volume - (-ll).exp()).abs() < 4.0 * sigma, "volume {volume}");
    assert_eq!(single_pair(&[2.5], FamilyKind::ExponentialMicro, None), 0.0);
}

#[test]
fn exponential_two_level_example() {
    // Level 0 pairs: (g0, g1) holding {1, 3} and (g2, g3) holding {1}. Level
    // 1 merges them into one pair of two pooled values {4, 1}.
    let edges = [(0, 1, 1.0), (0, 1, 3.0), (2, 3, 1.0)];
    let p = HierarchicalPartition::new(vec![vec![0, 1, 2, 3], vec![0, 1, 0, 1], vec![0, 0]]).unwrap();
    let ll = channel_ll(4, &edges, FamilyKind::ExponentialMicro, None, &p);
    let expected = (1.0f64 / 4.0).ln() + 0.0 + (1.0f64 / 5.0).ln();
    assert!((ll - expected).abs() < 1e-12, "{ll} vs {expected}");
}

#[test]
fn normal_pair_factor() {
    let ll = single_pair(&[-1.0, 1.0], FamilyKind::NormalMicro, None);
    assert!((ll - 2f64.ln()).abs() < 1e-12);
    // Equal values everywhere: every scaled variance is zero.
    assert_eq!(single_pair(&[0.7, 0.7, 0.7], FamilyKind::NormalMicro, None), 0.0);
}

/// All integer vectors of length `n` with entries in `0..=max` summing to `total`.
fn vectors(n: usize, max: u64, total: u64) -> Vec<Vec<u64>> {
    if n == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for x in 0..=max.min(total) {
        for mut rest in vectors(n - 1, max, total - x) {
            rest.insert(0, x);
            out.push(rest);
        }
    }
    out
}

fn choose(n: u64, k: u64) -> f64 {
    (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}

#[test]
fn discrete_pairs_match_enumeration() {
    // Compositions of 3 into two parts are equiprobable.
    let count = vectors(2, 3, 3).len() as f64;
    assert_eq!(count, 4.0);
    let ll = single_pair(&[1.0, 2.0], FamilyKind::GeometricMicro, None);
    assert!((ll + count.ln()).abs() < 1e-12);
    assert_eq!(single_pair(&[0.0, 0.0], FamilyKind::GeometricMicro, None), 0.0);
    assert_eq!(single_pair(&[7.0], FamilyKind::GeometricMicro, None), 0.0);

    // Two successes among four trials, split one per edge.
    let weight = |v: &Vec<u64>| v.iter().map(|&x| choose(2, x)).product::<f64>();
    let all: f64 = vectors(2, 2, 2).iter().map(weight).sum();
    let ll = single_pair(&[1.0, 1.0], FamilyKind::BinomialMicro, Some(2));
    assert!((ll - (weight(&vec![1, 1]) / all).ln()).abs() < 1e-12);
    assert!((ll - (2.0f64 / 3.0).ln()).abs() < 1e-12);
    // M = 1 collapses to choosing which edges succeed.
    let ll = single_pair(&[1.0, 0.0, 1.0], FamilyKind::BinomialMicro, Some(1));
    assert!((ll + choose(3, 2).ln()).abs() < 1e-12);
    assert_eq!(single_pair(&[0.0, 0.0], FamilyKind::BinomialMicro, Some(3)), 0.0);

    // Two events assigned to two edges: 4 equiprobable assignments, 2 give (1, 1).
    let ll = single_pair(&[1.0, 1.0], FamilyKind::PoissonMicro, None);
    assert!((ll - 0.5f64.ln()).abs() < 1e-12);
    assert!(single_pair(&[6.0], FamilyKind::PoissonMicro, None).abs() < 1e-12);
    assert_eq!(single_pair(&[0.0, 0.0], FamilyKind::PoissonMicro, None), 0.0);
}

/// `∫₀^∞ f` through the substitution `t = s/(1+s)`.
fn integrate_half_line(f: impl Fn(f64) -> f64) -> f64 {
    integrate(
        |t| {
            if t >= 1.0 {
                0.0
            } else {
                f(t / (1.0 - t)) / (1.0 - t).powi(2)
            }
        },
        0.0,
        1.0,
        8,
    )
}

#[test]
fn conjugate_values_match_prior_integrals() {
    let ll = single_pair(&[1.0], FamilyKind::ExponentialConjugate, None);
    let oracle = integrate_half_line(|l| l * (-l).exp() * (-l).exp());
    assert!((ll.exp() - 0.25).abs() < 1e-12);
    assert!((oracle - 0.25).abs() < 1e-10);

    let ll = single_pair(&[2.0], FamilyKind::GeometricConjugate, None);
    let oracle = integrate(|p| p * (1.0 - p).powi(2), 0.0, 1.0, 1);
    assert!((ll.exp() - oracle).abs() < 1e-12);
    assert!((oracle - 1.0 / 12.0).abs() < 1e-12);

    let ll = single_pair(&[2.0], FamilyKind::PoissonConjugate, None);
    let oracle = integrate_half_line(|l| l * l * (-l).exp() / 2.0 * (-l).exp());
    assert!((ll.exp() - oracle).abs() < 1e-10);
    assert!((oracle - 0.125).abs() < 1e-10);

    // Binomial with a uniform prior, M = 3, values {1, 2}.
    let ll = single_pair(&[1.0, 2.0], FamilyKind::BinomialConjugate, Some(3));
    let oracle = integrate(|p| 3.0 * p * (1.0 - p).powi(2) * 3.0 * p * p * (1.0 - p), 0.0, 1.0, 1);
    assert!((ll.exp() - oracle).abs() < 1e-12);
}

#[test]
fn normal_conjugate_matches_prior_integral() {
    // Default prior: μ | σ² ~ N(0, σ²), σ² ~ scaled-inv-χ²(1, 1). For one
    // value, integrating μ out leaves N(x | 0, 2σ²).
    let x = 0.8f64;
    let prior = |v: f64| (0.5f64).sqrt() / statrs::function::gamma::gamma(0.5) * v.powf(-1.5) * (-0.5 / v).exp();
    let lik = |v: f64| (-(x * x) / (4.0 * v)).exp() / (4.0 * std::f64::consts::PI * v).sqrt();
    let oracle = integrate_half_line(|v| if v == 0.0 { 0.0 } else { prior(v) * lik(v) });
    let ll = single_pair(&[x], FamilyKind::NormalConjugate, None);
    assert!((ll.exp() - oracle).abs() < 1e-9, "{} vs {oracle}", ll.exp());
}

#[test]
fn conjugate_prior_validation() {
    let mut b = GraphBuilder::new(2, false, vec!["w".into()]);
    b.add_edge(0, 1, &[1.0]).unwrap();
    let g = b.build();
    let mut spec = ChannelSpec::new("w", FamilyKind::ExponentialConjugate);
    spec.prior = Some(Prior::Gamma { alpha: -1.0, beta: 1.0 });
    assert!(Model::from_specs(g.clone(), &[spec.clone()], AdjacencyModel::default()).is_err());
    spec.prior = Some(Prior::Beta { alpha: 1.0, beta: 1.0 });
    assert!(Model::from_specs(g, &[spec], AdjacencyModel::default()).is_err());
}

#[test]
fn marginal_pdf_examples() {
    assert!((micro_marginal_pdf(wsbm::channel::Family::Exponential, 2, 2.0, 0.0, 0, 0.7) - 0.5).abs() < 1e-12);
    assert!((micro_marginal_pdf(wsbm::channel::Family::Geometric, 2, 3.0, 0.0, 0, 1.0) - 0.25).abs() < 1e-12);
    assert!((micro_marginal_pdf(wsbm::channel::Family::Binomial, 2, 2.0, 0.0, 2, 1.0) - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(
        micro_marginal_pdf(wsbm::channel::Family::Exponential, 3, 2.0, 0.0, 0, 2.5),
        0.0
    );
}

#[test]
fn channel_composition() {
    let mut b = GraphBuilder::new(3, false, vec!["w".into()]);
    for (s, t, x) in [(0, 1, 1.5), (1, 2, 0.5), (0, 2, 2.0), (0, 1, 0.1)] {
        b.add_edge(s, t, &[x]).unwrap();
    }
    let g = b.build();
    let one = ChannelSpec::new("w", FamilyKind::ExponentialMicro);
    let p = HierarchicalPartition::flat(vec![0, 1, 1]);
    let single = Model::from_specs(g.clone(), std::slice::from_ref(&one), AdjacencyModel::default()).unwrap();
    let double = Model::from_specs(g, &[one.clone(), one], AdjacencyModel::default()).unwrap();
    let e1 = BlockState::new(Arc::new(single), &p).unwrap().evidence();
    let e2 = BlockState::new(Arc::new(double), &p).unwrap().evidence();
    assert_eq!(combine_channels(&e2.channels), 2.0 * combine_channels(&e1.channels));
    assert_eq!(e1.adjacency, e2.adjacency);
}

#[test]
fn swapping_adjacency_leaves_weights_untouched() {
    let mut b = GraphBuilder::new(4, true, vec!["w".into()]);
    for (s, t, x) in [(0, 1, 1.5), (1, 2, 0.5), (3, 2, 2.0), (0, 1, 0.1), (2, 2, 4.0)] {
        b.add_edge(s, t, &[x]).unwrap();
    }
    let spec = ChannelSpec::new("w", FamilyKind::NormalMicro);
    let m = Model::from_specs(b.build(), &[spec], AdjacencyModel::DegreeCorrectedMicro).unwrap();
    let p = HierarchicalPartition::flat(vec![0, 1, 1, 0]);
    let base = BlockState::new(Arc::new(m.clone()), &p).unwrap().evidence();
    for adj in [
        AdjacencyModel::NonDegreeCorrectedMicro,
        AdjacencyModel::FixedCompleteGraph,
    ] {
        let e = BlockState::new(Arc::new(m.with_adjacency(adj)), &p).unwrap().evidence();
        assert_eq!(e.channels, base.channels);
        assert_eq!(e.partition_prior, base.partition_prior);
        if adj == AdjacencyModel::FixedCompleteGraph {
            assert_eq!(e.adjacency, 0.0);
        }
    }
}
