//! End-to-end runs of the `wsbm` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use wsbm::adjacency::AdjacencyModel;
use wsbm::channel::{ChannelSpec, FamilyKind};
use wsbm::graph::{GraphBuilder, WeightedGraph};
use wsbm::model::Model;
use wsbm::oracle::{chi_square_test, enumerate_posterior};
use wsbm::partition::HierarchicalPartition;
use wsbm::synth::{synth_generate, SynthSpec, WeightDistribution};

fn wsbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsbm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = wsbm(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn failure(args: &[&str]) -> String {
    let out = wsbm(args);
    assert_eq!(out.status.code(), Some(1), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

const EXPONENTIAL: &str = r#"{"channels": [{"name": "weight", "family": "exponential-micro"}]}"#;

/// Two planted groups of 15 with distinct weight means.
fn planted_graph(dir: &Path) -> PathBuf {
    let spec = SynthSpec::planted(
        30,
        2,
        0.4,
        0.1,
        WeightDistribution::Exponential { mean: 8.0 },
        WeightDistribution::Exponential { mean: 1.0 },
    );
    write(dir, "planted.json", &synth_generate(&spec, 1).unwrap().to_json())
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn fit_writes_partition_evidence_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let graph = planted_graph(dir.path());
    let cfg = write(dir.path(), "cfg.json", EXPONENTIAL);
    let out = dir.path().join("out");
    let stdout = ok(&["fit", "-g", s(&graph), "-c", s(&cfg), "-o", s(&out), "--sweeps", "2"]);
    assert!(stdout.starts_with("ln P = "));

    let partition =
        HierarchicalPartition::from_json(&std::fs::read_to_string(out.join("partition.json")).unwrap()).unwrap();
    assert_eq!(partition.node_count(), 30);
    assert_eq!(partition.group_count(partition.depth() - 1), 1);
    let evidence: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("evidence.json")).unwrap()).unwrap();
    assert_eq!(evidence["channels"][0]["name"], "weight");
    for name in [
        "fit.json",
        "summary.json",
        "modularity.levels.csv",
        "blocks.level0.csv",
        "weight.curve.csv",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }
}

#[test]
fn equal_seeds_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let graph = planted_graph(dir.path());
    let cfg = write(dir.path(), "cfg.json", EXPONENTIAL);
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            ok(&[
                "fit",
                "-g",
                s(&graph),
                "-c",
                s(&cfg),
                "-o",
                s(&out),
                "--seed",
                "7",
                "--chains",
                "2",
                "--sweeps",
                "2",
            ]);
            read_dir_sorted(&out)
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn failures_exit_with_one_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("absent.tsv");
    let err = failure(&["fit", "-g", s(&missing), "-o", s(&out)]);
    assert!(err.contains(s(&missing)), "{err}");

    let graph = planted_graph(dir.path());
    let typo = write(dir.path(), "typo.json", r#"{"chanels": []}"#);
    let err = failure(&["fit", "-g", s(&graph), "-c", s(&typo), "-o", s(&out)]);
    assert!(err.contains("chanels") && err.contains(s(&typo)), "{err}");

    let family = write(
        dir.path(),
        "family.json",
        r#"{"channels": [{"name": "weight", "family": "exponentail-micro"}]}"#,
    );
    failure(&["fit", "-g", s(&graph), "-c", s(&family), "-o", s(&out)]);

    let channel = write(
        dir.path(),
        "channel.json",
        r#"{"channels": [{"name": "nope", "family": "exponential-micro"}]}"#,
    );
    let err = failure(&["fit", "-g", s(&graph), "-c", s(&channel), "-o", s(&out)]);
    assert!(err.contains("nope"), "{err}");

    let err = failure(&["fit", "-g", s(&graph), "-o", s(&out), "--beta-schedule", "1:2,0.5:2"]);
    assert!(err.contains("increasing"), "{err}");
}

#[test]
fn select_reports_zero_for_identical_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let graph = planted_graph(dir.path());
    let cfg = write(dir.path(), "cfg.json", EXPONENTIAL);
    let out = dir.path().join("sel");
    let stdout = ok(&[
        "select",
        "-g",
        s(&graph),
        "-c",
        s(&cfg),
        "-c",
        s(&cfg),
        "-o",
        s(&out),
        "--sweeps",
        "2",
    ]);
    assert!(stdout.contains("ln Λ = 0\n"), "{stdout}");
    let comparison: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(comparison["log_odds"], 0.0);
    assert!(comparison["winner"].is_null());
}

#[test]
fn select_rejects_candidates_on_different_data() {
    let dir = tempfile::tempdir().unwrap();
    let first = planted_graph(dir.path());
    let second = write(dir.path(), "other.tsv", "# source target weight\n0 1 1.0\n1 2 2.0\n");
    let cfg = write(dir.path(), "cfg.json", EXPONENTIAL);
    let out = dir.path().join("sel");
    let err = failure(&[
        "select",
        "-g",
        s(&first),
        "-g",
        s(&second),
        "-c",
        s(&cfg),
        "-c",
        s(&cfg),
        "-o",
        s(&out),
    ]);
    assert!(err.contains("data"), "{err}");
    failure(&["select", "-g", s(&first), "-c", s(&cfg), "-o", s(&out)]);
}

#[test]
fn select_prefers_the_log_normal_model_on_log_normal_weights() {
    let dir = tempfile::tempdir().unwrap();
    let w = WeightDistribution::LogNormal { mu: 0.0, sigma: 1.0 };
    let spec = SynthSpec::planted(80, 1, 0.08, 0.08, w.clone(), w);
    let graph = write(dir.path(), "g.json", &synth_generate(&spec, 0).unwrap().to_json());
    let exp = write(
        dir.path(),
        "exp.json",
        r#"{"label": "exponential", "channels": [{"name": "weight", "family": "exponential-micro"}]}"#,
    );
    let lognormal = write(
        dir.path(),
        "lognormal.json",
        r#"{"label": "log-normal", "channels": [{"name": "weight", "family": "normal-micro", "transforms": ["log"]}]}"#,
    );
    let out = dir.path().join("sel");
    let stdout = ok(&[
        "select",
        "-g",
        s(&graph),
        "-c",
        s(&exp),
        "-c",
        s(&lognormal),
        "-o",
        s(&out),
        "--sweeps",
        "2",
    ]);
    assert!(stdout.contains("winner: log-normal"), "{stdout}");
}

#[test]
fn synth_without_edges_writes_an_empty_edge_list() {
    let dir = tempfile::tempdir().unwrap();
    let c = WeightDistribution::Constant { value: 1.0 };
    let spec = SynthSpec::planted(12, 1, 0.0, 0.0, c.clone(), c);
    let cfg = write(dir.path(), "spec.json", &serde_json::to_string(&spec).unwrap());
    let out = dir.path().join("g.tsv");
    ok(&["synth", "-c", s(&cfg), "-o", s(&out), "--seed", "3"]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 0);
    let g = WeightedGraph::load(&out).unwrap();
    assert_eq!((g.node_count(), g.edge_count()), (12, 0));
}

#[test]
fn sample_frequencies_match_the_enumerated_posterior() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = GraphBuilder::new(4, false, vec!["weight".into()]);
    for (u, v, w) in [
        (0, 1, 3.0),
        (0, 1, 2.5),
        (1, 2, 0.4),
        (2, 3, 1.5),
        (0, 2, 0.7),
        (3, 3, 1.0),
    ] {
        b.add_edge(u, v, &[w]).unwrap();
    }
    let graph = b.build();
    let path = write(dir.path(), "g.json", &graph.to_json());
    let specs = [ChannelSpec::new("weight", FamilyKind::ExponentialMicro)];
    let model = Model::from_specs(graph, &specs, AdjacencyModel::DegreeCorrectedMicro).unwrap();
    let post = enumerate_posterior(&model).unwrap();

    let cfg = write(dir.path(), "cfg.json", EXPONENTIAL);
    let out = dir.path().join("s");
    ok(&[
        "sample",
        "-g",
        s(&path),
        "-c",
        s(&cfg),
        "-o",
        s(&out),
        "--seed",
        "5",
        "--sweeps",
        "401000",
        "--burn-in",
        "1000",
        "--thin",
        "20",
    ]);
    let mut counts = vec![0u64; post.partitions.len()];
    let text = std::fs::read_to_string(out.join("frequencies.csv")).unwrap();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let labels: Vec<u32> = fields[2].split(' ').map(|x| x.parse().unwrap()).collect();
        counts[post.index_of(&labels).unwrap()] += fields[0].parse::<u64>().unwrap();
    }
    assert_eq!(counts.iter().sum::<u64>(), 20_000);
    let (_, p) = chi_square_test(&counts, &post.probabilities);
    assert!(p > 0.01, "chi-square p = {p}");

    let marginals = std::fs::read_to_string(out.join("marginals.csv")).unwrap();
    assert_eq!(marginals.lines().count(), 5);
}

#[test]
fn analyze_gives_zero_modularity_for_one_group() {
    let dir = tempfile::tempdir().unwrap();
    let graph = planted_graph(dir.path());
    let cfg = write(dir.path(), "cfg.json", EXPONENTIAL);
    let partition = write(dir.path(), "p.json", &HierarchicalPartition::trivial(30).to_json());
    let out = dir.path().join("an");
    let stdout = ok(&[
        "analyze",
        "-g",
        s(&graph),
        "-c",
        s(&cfg),
        "-p",
        s(&partition),
        "-o",
        s(&out),
    ]);
    assert!(stdout.contains("level 0: B = 1, Q = 0.000000"), "{stdout}");
    let levels = std::fs::read_to_string(out.join("modularity.levels.csv")).unwrap();
    assert_eq!(levels.lines().nth(1), Some("0,1,0"));
}
