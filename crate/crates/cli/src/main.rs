//! Command-line driver: fit, sample, compare, generate and analyze weighted
//! nested block models.

mod config;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{parse_schedule, RunConfig};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use wsbm::adjacency::AdjacencyModel;
use wsbm::analysis::{export_fit_report, posterior_odds, ModelCandidate, ReportOptions, ReportSummary};
use wsbm::channel::ChannelSpec;
use wsbm::graph::{GraphMeta, WeightedGraph};
use wsbm::model::Model;
use wsbm::partition::{canonical_labels, HierarchicalPartition};
use wsbm::sampler::{default_schedule, fit_map, sample_posterior, FitConfig, FitResult, SampleConfig};
use wsbm::state::BlockState;
use wsbm::synth::{synth_generate, SynthSpec};

#[derive(Parser)]
#[command(
    name = "wsbm",
    version,
    about = "Nested stochastic block models for graphs with edge covariates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find the most probable hierarchical partition and write a report.
    Fit(RunArgs),
    /// Sample partitions from the posterior and write membership marginals.
    Sample(SampleArgs),
    /// Fit two candidate models to the same data and compare their evidence.
    Select(SelectArgs),
    /// Generate a planted-partition graph from a JSON specification.
    Synth(SynthArgs),
    /// Write modularity tables and fitted curves for a given partition.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    /// Sweeps per annealing stage (fit) or in total (sample).
    #[arg(long)]
    sweeps: Option<usize>,
    /// Independent chains, run concurrently.
    #[arg(long)]
    chains: Option<usize>,
    /// Annealing stages as `beta:sweeps` pairs, e.g. `1:10,2:10,4:20`.
    #[arg(long)]
    beta_schedule: Option<String>,
    /// degree-corrected-micro, non-degree-corrected-micro or fixed-complete-graph.
    #[arg(long)]
    adjacency_model: Option<AdjacencyModel>,
    /// Print progress to standard error.
    #[arg(long)]
    progress: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Edge list (`.tsv` with optional `.meta.json` sidecar) or JSON graph.
    #[arg(short, long)]
    graph: PathBuf,
    /// JSON run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Sweeps discarded before collecting samples; half the run by default.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Keep every n-th sweep.
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(Args)]
struct SelectArgs {
    /// One graph shared by both candidates, or one per candidate.
    #[arg(short, long, num_args = 1, required = true)]
    graph: Vec<PathBuf>,
    /// Exactly two candidate configurations.
    #[arg(short, long, num_args = 1, required = true)]
    config: Vec<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON planted-partition specification.
    #[arg(short, long)]
    config: PathBuf,
    /// Output graph: JSON when the name ends in `.json`, otherwise an edge
    /// list with a `.meta.json` sidecar.
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(short, long)]
    graph: PathBuf,
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Hierarchical partition JSON, as written by `fit`.
    #[arg(short, long)]
    partition: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    adjacency_model: Option<AdjacencyModel>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Sample(args) => cmd_sample(&args),
        Command::Select(args) => cmd_select(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Analyze(args) => cmd_analyze(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

/// The error and its causes on one line, skipping causes that the library
/// errors already spell out in their own message.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

/// Applies command-line overrides on top of a loaded configuration.
fn resolve(path: Option<&Path>, o: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load_or_default(path)?;
    cfg.seed = o.seed.or(cfg.seed);
    cfg.sweeps = o.sweeps.or(cfg.sweeps);
    cfg.chains = o.chains.or(cfg.chains);
    cfg.adjacency_model = o.adjacency_model.or(cfg.adjacency_model);
    if let Some(s) = &o.beta_schedule {
        cfg.beta_schedule = Some(parse_schedule(s)?);
    }
    Ok(cfg)
}

fn load_graph(path: &Path) -> Result<WeightedGraph> {
    WeightedGraph::load(path).with_context(|| format!("loading graph {}", path.display()))
}

/// Channels from the configuration, or those declared in the graph's sidecar.
fn channel_specs(graph_path: &Path, cfg: &RunConfig) -> Result<Vec<ChannelSpec>> {
    if !cfg.channels.is_empty() {
        return Ok(cfg.channels.clone());
    }
    let meta = GraphMeta::load_sidecar(graph_path)
        .with_context(|| format!("loading metadata for {}", graph_path.display()))?;
    Ok(meta.map(|m| m.channels).unwrap_or_default())
}

fn build_model(graph_path: &Path, cfg: &RunConfig) -> Result<(Arc<Model>, Vec<ChannelSpec>)> {
    let graph = load_graph(graph_path)?;
    let specs = channel_specs(graph_path, cfg)?;
    let adjacency = cfg.adjacency_model.unwrap_or_default();
    let model = Model::from_specs(graph, &specs, adjacency)
        .with_context(|| format!("configuring model for {}", graph_path.display()))?;
    Ok((Arc::new(model), specs))
}

fn fit_config(cfg: &RunConfig, progress: bool) -> FitConfig {
    let defaults = FitConfig::default();
    FitConfig {
        seed: cfg.seed.unwrap_or(defaults.seed),
        chains: cfg.chains.unwrap_or(defaults.chains),
        epsilon: cfg.epsilon.unwrap_or(defaults.epsilon),
        schedule: match (&cfg.beta_schedule, cfg.sweeps) {
            (Some(s), _) => s.clone(),
            (None, Some(sweeps)) => default_schedule(sweeps),
            (None, None) => defaults.schedule.clone(),
        },
        progress,
        ..defaults
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output structures always serialize") + "\n"
}

fn print_levels(summary: &ReportSummary) {
    for (l, b) in summary.groups_per_level.iter().enumerate() {
        match summary.modularity.iter().find(|m| m.level == l) {
            Some(m) => println!("level {l}: B = {b}, Q = {:.6}", m.q),
            None => println!("level {l}: B = {b}"),
        }
    }
}

#[derive(Serialize)]
struct FitRecord<'a> {
    log_joint: f64,
    chain_log_joints: &'a [f64],
    max_drift: f64,
    config: &'a RunConfig,
}

fn run_fit(graph: &Path, cfg: &RunConfig, progress: bool) -> Result<(FitResult, Vec<ChannelSpec>)> {
    let (model, specs) = build_model(graph, cfg)?;
    let fit = fit_map(model, &fit_config(cfg, progress)).context("fitting")?;
    Ok((fit, specs))
}

fn cmd_fit(args: &RunArgs) -> Result<()> {
    let cfg = resolve(args.config.as_deref(), &args.overrides)?;
    let (fit, _) = run_fit(&args.graph, &cfg, args.overrides.progress)?;
    create_dir(&args.out)?;
    write(&args.out.join("partition.json"), &(fit.partition.to_json() + "\n"))?;
    write(&args.out.join("evidence.json"), &(fit.evidence.to_json() + "\n"))?;
    let record = FitRecord {
        log_joint: fit.log_joint,
        chain_log_joints: &fit.chain_log_joints,
        max_drift: fit.max_drift,
        config: &cfg,
    };
    write(&args.out.join("fit.json"), &to_json(&record))?;
    let summary = export_fit_report(&fit.state, &args.out, &ReportOptions::default())?;
    println!("ln P = {:.6}", fit.log_joint);
    print_levels(&summary);
    Ok(())
}

#[derive(Serialize)]
struct SampleRecord<'a> {
    samples: usize,
    acceptance_rate: f64,
    max_drift: f64,
    /// Bottom-level labels that the marginal columns refer to.
    reference: &'a [u32],
    config: &'a RunConfig,
}

fn cmd_sample(args: &SampleArgs) -> Result<()> {
    let mut cfg = resolve(args.run.config.as_deref(), &args.run.overrides)?;
    cfg.burn_in = args.burn_in.or(cfg.burn_in);
    cfg.thin = args.thin.or(cfg.thin);
    let (model, _) = build_model(&args.run.graph, &cfg)?;
    let defaults = SampleConfig::default();
    let sample_cfg = SampleConfig {
        seed: cfg.seed.unwrap_or(defaults.seed),
        chains: cfg.chains.unwrap_or(defaults.chains),
        epsilon: cfg.epsilon.unwrap_or(defaults.epsilon),
        sweeps: cfg.sweeps.unwrap_or(defaults.sweeps),
        burn_in: cfg.burn_in,
        thin: cfg.thin.unwrap_or(defaults.thin),
        progress: args.run.overrides.progress,
        ..defaults
    };
    let samples = sample_posterior(model, &sample_cfg).context("sampling")?;
    let out = &args.run.out;
    create_dir(out)?;

    let groups = samples.marginals.first().map_or(0, Vec::len);
    let mut csv = String::from("node");
    for r in 0..groups {
        let _ = write!(csv, ",group{r}");
    }
    csv.push('\n');
    for (i, row) in samples.marginals.iter().enumerate() {
        let _ = write!(csv, "{i}");
        for p in row {
            let _ = write!(csv, ",{p}");
        }
        csv.push('\n');
    }
    write(&out.join("marginals.csv"), &csv)?;

    let mut counts: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    for p in &samples.partitions {
        *counts.entry(canonical_labels(&p.node_labels(0))).or_default() += 1;
    }
    let mut rows: Vec<_> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let total = samples.partitions.len() as f64;
    let mut freq = String::from("count,frequency,labels\n");
    for (labels, count) in rows {
        let labels: Vec<String> = labels.iter().map(u32::to_string).collect();
        let _ = writeln!(freq, "{count},{},{}", count as f64 / total, labels.join(" "));
    }
    write(&out.join("frequencies.csv"), &freq)?;

    let record = SampleRecord {
        samples: samples.partitions.len(),
        acceptance_rate: samples.acceptance_rate,
        max_drift: samples.max_drift,
        reference: &samples.reference,
        config: &cfg,
    };
    write(&out.join("samples.json"), &to_json(&record))?;
    println!(
        "{} samples, acceptance rate {:.3}, {} distinct bottom-level partitions",
        record.samples,
        record.acceptance_rate,
        freq.lines().count() - 1
    );
    Ok(())
}

#[derive(Serialize)]
struct Comparison<'a> {
    /// `ln Λ = ln P(first) − ln P(second)`.
    log_odds: f64,
    /// `None` when the evidence is equal.
    winner: Option<&'a str>,
    candidates: [&'a ModelCandidate; 2],
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    ensure!(
        args.config.len() == 2,
        "select needs exactly two configurations, got {}",
        args.config.len()
    );
    let graphs: Vec<&Path> = match args.graph.as_slice() {
        [g] => vec![g, g],
        [a, b] => vec![a, b],
        other => bail!(
            "select takes one shared graph or one per candidate, got {}",
            other.len()
        ),
    };
    let mut candidates = Vec::with_capacity(2);
    for (cfg_path, graph) in args.config.iter().zip(graphs) {
        let cfg = resolve(Some(cfg_path), &args.overrides)?;
        let label = cfg.label.clone().unwrap_or_else(|| {
            cfg_path
                .file_stem()
                .map_or_else(|| cfg_path.display().to_string(), |s| s.to_string_lossy().into_owned())
        });
        let (fit, specs) =
            run_fit(graph, &cfg, args.overrides.progress).with_context(|| format!("candidate {label}"))?;
        candidates.push(ModelCandidate::from_fit(label, specs, &fit));
    }
    let (a, b) = (&candidates[0], &candidates[1]);
    let log_odds = posterior_odds(a, b)?;
    let winner = if log_odds > 0.0 {
        Some(a.label.as_str())
    } else if log_odds < 0.0 {
        Some(b.label.as_str())
    } else {
        None
    };
    create_dir(&args.out)?;
    let comparison = Comparison {
        log_odds,
        winner,
        candidates: [a, b],
    };
    write(&args.out.join("comparison.json"), &to_json(&comparison))?;
    println!("ln Λ = {log_odds}");
    println!("winner: {}", winner.unwrap_or("none (equal evidence)"));
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let spec: SynthSpec =
        serde_json::from_str(&text).with_context(|| format!("invalid specification {}", args.config.display()))?;
    let graph = synth_generate(&spec, args.seed)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    if args.out.extension().is_some_and(|e| e == "json") {
        write(&args.out, &(graph.to_json() + "\n"))?;
    } else {
        write(&args.out, &graph.to_tsv())?;
        let meta = GraphMeta {
            node_count: Some(graph.node_count()),
            directed: graph.is_directed(),
            channels: Vec::new(),
        };
        write(&GraphMeta::sidecar_path(&args.out), &to_json(&meta))?;
    }
    println!("{} nodes, {} edges", graph.node_count(), graph.edge_count());
    Ok(())
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    cfg.adjacency_model = args.adjacency_model.or(cfg.adjacency_model);
    let (model, _) = build_model(&args.graph, &cfg)?;
    let text =
        std::fs::read_to_string(&args.partition).with_context(|| format!("reading {}", args.partition.display()))?;
    let partition = HierarchicalPartition::from_json(&text)
        .map_err(anyhow::Error::msg)
        .with_context(|| format!("invalid partition {}", args.partition.display()))?;
    let state =
        BlockState::new(model, &partition).with_context(|| format!("partition {}", args.partition.display()))?;
    let summary = export_fit_report(&state, &args.out, &ReportOptions::default())?;
    println!("ln P = {:.6}", summary.log_joint);
    print_levels(&summary);
    Ok(())
}
