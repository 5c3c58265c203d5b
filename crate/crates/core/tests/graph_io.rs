//! Graph serialization, covariate transforms and synthetic generation.

mod common;

use common::random_graph;
use proptest::prelude::*;
use std::io::Write as _;
use wsbm::graph::{GraphError, GraphMeta, WeightedGraph};
use wsbm::synth::{shuffle_weights, synth_generate, SynthSpec, WeightDistribution};
use wsbm::transform::{apply_chain, invert_chain, Transform, TransformError};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_formats_round_trip(seed in 0u64..10_000, n in 1usize..30, e in 0usize..80, directed: bool) {
        let g = random_graph(seed, n, e, directed, true);
        let json = WeightedGraph::from_json(&g.to_json()).unwrap();
        prop_assert_eq!(&json, &g);
        let meta = GraphMeta { node_count: Some(n), directed, channels: vec![] };
        let tsv = WeightedGraph::from_tsv(&g.to_tsv(), Some(&meta)).unwrap();
        prop_assert_eq!(&tsv, &g);
        prop_assert_eq!(tsv.fingerprint(), g.fingerprint());
    }

    #[test]
    fn transform_chains_invert(x in 1e-6f64..0.999, scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let chain = [Transform::LogitUnit, Transform::Affine { scale, shift }];
        let (y, log_j) = apply_chain(&chain, x).unwrap();
        prop_assert!((invert_chain(&chain, y) - x).abs() < 1e-9);
        let (y1, j1) = Transform::LogitUnit.apply(x).unwrap();
        let (_, j2) = Transform::Affine { scale, shift }.apply(y1).unwrap();
        prop_assert_eq!(log_j, j1 + j2);
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let cases = [
        ("0 1 2.5\n1\n", 2),
        ("# source target w\n0 1 1.0\n\n2 x 1.0\n", 4),
        ("0 1 1.0\n1 2 nan\n", 2),
        ("0 1 1.0\n1 2\n", 2),
    ];
    for (text, line) in cases {
        match WeightedGraph::from_tsv(text, None) {
            Err(GraphError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    let meta = GraphMeta {
        node_count: Some(3),
        ..Default::default()
    };
    match WeightedGraph::from_tsv("0 1\n2 3\n", Some(&meta)) {
        Err(GraphError::EndpointOutOfRange {
            line: 2,
            node: 3,
            node_count: 3,
        }) => {}
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        WeightedGraph::from_json("{\"nodes\": 2"),
        Err(GraphError::Json(_))
    ));
}

#[test]
fn files_load_with_sidecar_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.tsv");
    std::fs::File::create(&path)
        .unwrap()
        .write_all(b"0 1 0.5\n1 0 2.0\n1 0 3.0\n")
        .unwrap();
    let undirected = WeightedGraph::load(&path).unwrap();
    assert_eq!(
        (
            undirected.node_count(),
            undirected.edge_count(),
            undirected.total_multiplicity()
        ),
        (2, 1, 3)
    );

    std::fs::write(
        GraphMeta::sidecar_path(&path),
        r#"{"node_count": 4, "directed": true, "channels": [{"name": "rate", "family": "exponential-micro"}]}"#,
    )
    .unwrap();
    let directed = WeightedGraph::load(&path).unwrap();
    assert!(directed.is_directed());
    assert_eq!((directed.node_count(), directed.edge_count()), (4, 2));
    assert_eq!(directed.channel_names(), ["rate"]);

    let json = dir.path().join("net.json");
    std::fs::write(&json, directed.to_json()).unwrap();
    assert_eq!(WeightedGraph::load(&json).unwrap(), directed);

    let missing = dir.path().join("absent.tsv");
    let err = WeightedGraph::load(&missing).unwrap_err();
    assert!(err.to_string().contains(&missing.display().to_string()));
}

#[test]
fn transform_reference_values() {
    let (y, j) = Transform::Log.apply(std::f64::consts::E).unwrap();
    assert!((y - 1.0).abs() < 1e-15 && (j + 1.0).abs() < 1e-15);
    let (y, j) = Transform::NegLogUnit.apply(1.0).unwrap();
    assert_eq!((y, j), (0.0, 0.0));
    let (y, j) = Transform::LogitUnit.apply(0.5).unwrap();
    assert_eq!(y, 0.0);
    assert!((j - 4f64.ln()).abs() < 1e-15);
    let (y, j) = Transform::ArctanhSym.apply(0.0).unwrap();
    assert_eq!((y, j), (0.0, std::f64::consts::LN_2));
    assert_eq!(
        Transform::Affine {
            scale: -2.0,
            shift: 1.0
        }
        .apply(3.0)
        .unwrap(),
        (-5.0, 2f64.ln())
    );
    assert!(matches!(
        Transform::Log.apply(0.0),
        Err(TransformError::Boundary { .. })
    ));
    assert!(matches!(
        Transform::LogitUnit.apply(1.5),
        Err(TransformError::OutOfDomain { .. })
    ));
    // Shrinking first moves boundary values inside the open domain.
    let chain = [
        Transform::Shrink {
            lo: 0.0,
            hi: 1.0,
            eps: 1e-6,
        },
        Transform::LogitUnit,
    ];
    assert!(apply_chain(&chain, 1.0).unwrap().0.is_finite());
    assert!((invert_chain(&chain, apply_chain(&chain, 0.25).unwrap().0) - 0.25).abs() < 1e-12);
}

#[test]
fn synth_edge_cases() {
    let empty = SynthSpec::planted(
        30,
        1,
        0.0,
        0.0,
        WeightDistribution::Constant { value: 1.0 },
        WeightDistribution::Constant { value: 1.0 },
    );
    assert_eq!(synth_generate(&empty, 0).unwrap().edge_count(), 0);

    let full = SynthSpec::planted(
        3,
        1,
        1.0,
        1.0,
        WeightDistribution::Constant { value: 2.0 },
        WeightDistribution::Constant { value: 2.0 },
    );
    let g = synth_generate(&full, 0).unwrap();
    assert_eq!(g.edge_count(), 3);
    assert_eq!(g.channel_values(0), [2.0; 3]);
    let mut directed = full.clone();
    directed.directed = true;
    assert_eq!(synth_generate(&directed, 0).unwrap().edge_count(), 6);

    let spec = SynthSpec::planted(
        40,
        2,
        0.3,
        0.1,
        WeightDistribution::Poisson { mean: 3.0 },
        WeightDistribution::Poisson { mean: 1.0 },
    );
    assert_eq!(synth_generate(&spec, 9).unwrap(), synth_generate(&spec, 9).unwrap());
    assert_ne!(synth_generate(&spec, 9).unwrap(), synth_generate(&spec, 10).unwrap());
}

#[test]
fn synth_weight_means_follow_the_blocks() {
    let spec = SynthSpec::planted(
        300,
        2,
        0.2,
        0.2,
        WeightDistribution::Exponential { mean: 5.0 },
        WeightDistribution::Exponential { mean: 1.0 },
    );
    let g = synth_generate(&spec, 4).unwrap();
    assert!(g.edge_count() >= 8_000);
    let (mut within, mut between) = ((0.0, 0usize), (0.0, 0usize));
    for e in 0..g.edge_count() {
        let (s, t) = g.endpoints(e);
        let w = g.edge_values(0, e)[0];
        let acc = if spec.labels[s as usize] == spec.labels[t as usize] {
            &mut within
        } else {
            &mut between
        };
        acc.0 += w;
        acc.1 += 1;
    }
    let ratio = (within.0 / within.1 as f64) / (between.0 / between.1 as f64);
    assert!((ratio - 5.0).abs() < 0.3, "ratio {ratio}");

    // Shuffling keeps structure and the multiset of values.
    let shuffled = shuffle_weights(&g, "weight", 1).unwrap();
    let mut a = g.channel_values(0).to_vec();
    let mut b = shuffled.channel_values(0).to_vec();
    assert_ne!(a, b);
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    assert_eq!(a, b);
    assert_eq!(shuffled.edge_offsets(), g.edge_offsets());
    assert!(shuffle_weights(&g, "nope", 1).is_err());
}
