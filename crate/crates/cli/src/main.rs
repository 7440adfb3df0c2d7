//! `causalfuzz` command line: data generation, SEM fitting, training,
//! unlearning, fuzzing, baselines and report diffs.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use causalfuzz::baselines::{demographic_parity_gap, summarize, ParityGap};
use causalfuzz::data::{load_csv, save_csv, CsvOptions, EncodingTable};
use causalfuzz::estimator::{run_causal_fuzz, ContrastPolicy, Subgroup};
use causalfuzz::graph::{parse_graph, CausalGraph};
use causalfuzz::predictor::{
    discover_remote, train_builtin, Hyper, LinearModel, PredictionServer, Predictor, RetryPolicy, ScoreKind,
    MODEL_URL_ENV,
};
use causalfuzz::report::{self, diff, render, Format, Verdict};
use causalfuzz::scm::{fit_sem, gen_failure_mode, parse_sem, Family};
use causalfuzz::unlearn::unlearn_feature_removal;
use causalfuzz::{Dataset, FittedSem, FuzzConfig};
use clap::{Args, Parser, Subcommand};

const EXIT_LEAK: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "causalfuzz", version, about = "Causal fuzzing for feature unlearning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a failure-mode fixture: data, graph, SEM, ground truth, oracle model.
    GenData(GenData),
    /// Fit a linear SEM to data along a causal graph.
    FitSem(FitSem),
    /// Train the builtin logistic model.
    Train(Train),
    /// Retrain without the target feature.
    Unlearn(Unlearn),
    /// Test a model for residual dependence on the target.
    Fuzz(Fuzz),
    /// Permutation importance, Shapley and demographic parity for the target.
    Baselines(Baselines),
    /// Compare two reports.
    Diff(DiffArgs),
    /// Serve a model file over the HTTP prediction protocol.
    Serve(Serve),
}

#[derive(Args)]
struct DataArgs {
    /// CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// JSON table `{column: {raw value: number}}` for categorical columns.
    #[arg(long)]
    encodings: Option<PathBuf>,
}

#[derive(Args)]
struct GenData {
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    strength: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitSem {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Train {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    outcome: String,
    /// Comma-separated feature columns.
    #[arg(long, value_delimiter = ',', required = true)]
    features: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Unlearn {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    target: String,
    #[arg(long)]
    outcome: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Fuzz {
    #[arg(long)]
    graph: PathBuf,
    /// Fitted SEM; fitted from the reference data when omitted.
    #[arg(long)]
    sem: Option<PathBuf>,
    /// Model JSON file or prediction server URL.
    #[arg(long, env = MODEL_URL_ENV)]
    model: String,
    /// Reference rows the effects are averaged over.
    #[command(flatten)]
    data: DataArgs,
    /// Defaults to the graph's target node.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    /// Number of mediated paths to test.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value = "probability")]
    score_kind: ScoreKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Predicate `<column><op><number>`, op one of < <= > >= ==; repeatable.
    #[arg(long)]
    subgroup: Vec<Subgroup>,
    /// `flip`, `marginal` or `delta:<x>`, optionally suffixed `x<count>`.
    #[arg(long)]
    contrast: Option<String>,
    /// Outcome column for permutation importance; defaults to the graph's outcome.
    #[arg(long)]
    outcome: Option<String>,
    /// Written to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct Baselines {
    /// Model JSON file or prediction server URL.
    #[arg(long, env = MODEL_URL_ENV)]
    model: String,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    target: String,
    /// Binary column for the demographic parity gap; defaults to the target.
    #[arg(long)]
    group: Option<String>,
    /// Binary label column for permutation importance.
    #[arg(long)]
    outcome: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DiffArgs {
    #[arg(long)]
    old: PathBuf,
    #[arg(long)]
    new: PathBuf,
}

#[derive(Args)]
struct Serve {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::FitSem(a) => fit(a),
        Command::Train(a) => train(a),
        Command::Unlearn(a) => unlearn(a),
        Command::Fuzz(a) => fuzz(a),
        Command::Baselines(a) => baselines(a),
        Command::Diff(a) => compare(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .config()
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .runtime()?;
    }
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .runtime()
}

fn load_graph(path: &Path) -> Result<CausalGraph, Failure> {
    parse_graph(&read(path)?)
        .with_context(|| format!("graph {}", path.display()))
        .config()
}

/// Loads a CSV, taking column kinds from `graph` when given.
fn load_data(args: &DataArgs, graph: Option<&CausalGraph>) -> Result<Dataset, Failure> {
    let mut options = CsvOptions::default();
    if let Some(g) = graph {
        options.kinds = g.nodes().iter().map(|n| (n.name.clone(), n.kind)).collect();
    }
    if let Some(path) = &args.encodings {
        options.encodings = EncodingTable::from_json(&read(path)?)
            .with_context(|| format!("encodings {}", path.display()))
            .config()?;
    }
    load_csv(&args.data, &options)
        .with_context(|| format!("data {}", args.data.display()))
        .config()
}

fn load_model(source: &str) -> Result<Box<dyn Predictor>, Failure> {
    if source.starts_with("http://") || source.starts_with("https://") {
        let remote = discover_remote(source, RetryPolicy::default())
            .with_context(|| format!("model server {source}"))
            .runtime()?;
        return Ok(Box::new(remote));
    }
    let model = LinearModel::load(source).with_context(|| format!("model {source}")).config()?;
    Ok(Box::new(model))
}

fn edge_set(graph: &CausalGraph) -> (BTreeSet<&str>, BTreeSet<(&str, &str)>) {
    (
        graph.nodes().iter().map(|n| n.name.as_str()).collect(),
        graph.edges().iter().map(|(s, d)| (s.as_str(), d.as_str())).collect(),
    )
}

fn gen_data(a: GenData) -> Result<u8, Failure> {
    let fx = gen_failure_mode(a.family, a.n, a.seed, a.strength).config()?;
    fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .runtime()?;
    let data = a.out.join("data.csv");
    save_csv(&fx.data, &data).context("writing data.csv").runtime()?;
    write(&a.out.join("graph.json"), &fx.graph.to_json())?;
    write(&a.out.join("sem.json"), &fx.sem.to_json())?;
    write(&a.out.join("truth.csv"), &fx.truth.to_csv())?;
    write(&a.out.join("oracle_model.json"), &fx.oracle_model.to_json())?;
    eprintln!(
        "family={} n={} seed={} strength={} out={}",
        a.family,
        a.n,
        a.seed,
        a.strength,
        a.out.display()
    );
    Ok(0)
}

fn fit(a: FitSem) -> Result<u8, Failure> {
    let graph = load_graph(&a.graph)?;
    let data = load_data(&a.data, Some(&graph))?;
    let sem: FittedSem = fit_sem(&graph, &data).config()?;
    write(&a.out, &sem.to_json())?;
    eprintln!("sem={}", a.out.display());
    Ok(0)
}

fn train(a: Train) -> Result<u8, Failure> {
    let data = load_data(&a.data, None)?;
    let features: Vec<&str> = a.features.iter().map(String::as_str).collect();
    let model = train_builtin(&data, &a.outcome, &features, Hyper::default(), a.seed).config()?;
    model.save(&a.out).context("writing model").runtime()?;
    eprintln!("model={} id={}", a.out.display(), model.model_id());
    Ok(0)
}

fn unlearn(a: Unlearn) -> Result<u8, Failure> {
    let data = load_data(&a.data, None)?;
    let model = unlearn_feature_removal(&data, &a.target, &a.outcome, Hyper::default(), a.seed).config()?;
    model.save(&a.out).context("writing model").runtime()?;
    eprintln!("model={} id={} removed={}", a.out.display(), model.model_id(), a.target);
    Ok(0)
}

fn fuzz(a: Fuzz) -> Result<u8, Failure> {
    let graph = load_graph(&a.graph)?;
    let data = load_data(&a.data, Some(&graph))?;
    let sem: FittedSem = match &a.sem {
        Some(path) => {
            let sem: FittedSem = parse_sem(&read(path)?)
                .with_context(|| format!("sem {}", path.display()))
                .config()?;
            if edge_set(sem.graph()) != edge_set(&graph) {
                return Err(Failure::Config(anyhow!("sem {} was fitted on a different graph", path.display())));
            }
            sem
        }
        None => fit_sem(&graph, &data).config()?,
    };
    let model = load_model(&a.model)?;
    let target = match a.target {
        Some(t) => t,
        None => graph
            .target()
            .map(str::to_string)
            .ok_or_else(|| Failure::Config(anyhow!("graph has no target node; pass --target")))?,
    };
    let mut config = FuzzConfig::new(&sem, model.as_ref(), &data, a.budget);
    config.contrast = match &a.contrast {
        Some(c) => c.parse::<ContrastPolicy>().config()?,
        None => ContrastPolicy::default_for(graph.node(&target).map(|n| n.kind).unwrap_or_default()),
    };
    config.target = target.clone();
    config.threshold = a.threshold;
    config.k = a.k;
    config.score_kind = a.score_kind;
    config.seed = a.seed;
    config.subgroups = a.subgroup;

    let mut report = run_causal_fuzz(&config).map_err(|e| {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    })?;
    let outcome = a.outcome.unwrap_or_else(|| graph.outcome().to_string());
    let labelled = data.column_index(&outcome).map(|_| outcome.as_str());
    report.baselines = summarize(model.as_ref(), &data, &target, labelled, a.seed).runtime()?;

    let text = render(&report, a.format);
    let destination = match &a.report {
        Some(path) => {
            write(path, &text)?;
            path.display().to_string()
        }
        None => {
            print!("{text}");
            "-".to_string()
        }
    };
    eprintln!(
        "seed={} budget_used={}/{} verdict={} report={}",
        report.header.seed,
        report.header.budget_used,
        report.header.budget,
        report.overall.verdict.as_str(),
        destination
    );
    Ok(if report.overall.verdict == Verdict::Leak { EXIT_LEAK } else { 0 })
}

fn baselines(a: Baselines) -> Result<u8, Failure> {
    let data = load_data(&a.data, None)?;
    let model = load_model(&a.model)?;
    let mut summary = summarize(model.as_ref(), &data, &a.target, a.outcome.as_deref(), a.seed).runtime()?;
    if let Some(group) = a.group {
        let gap = demographic_parity_gap(model.as_ref(), &data, &group, 0.5).config()?;
        summary.demographic_parity = Some(ParityGap {
            group,
            threshold: 0.5,
            gap,
        });
    }
    let json = serde_json::to_string_pretty(&summary).runtime()?;
    println!("{json}");
    eprintln!("seed={}", a.seed);
    Ok(0)
}

fn compare(a: DiffArgs) -> Result<u8, Failure> {
    let load = |path: &Path| {
        report::parse(&read(path)?)
            .with_context(|| format!("report {}", path.display()))
            .config()
    };
    let (old, new) = (load(&a.old)?, load(&a.new)?);
    let delta = diff(&old, &new).config()?;
    print!("{}", delta.render_text());
    Ok(if delta.is_worse() { EXIT_LEAK } else { 0 })
}

fn serve(a: Serve) -> Result<u8, Failure> {
    let model = LinearModel::load(&a.model)
        .with_context(|| format!("model {}", a.model.display()))
        .config()?;
    let server = PredictionServer::spawn(Arc::new(model), a.addr.as_str())
        .with_context(|| format!("binding {}", a.addr))
        .runtime()?;
    eprintln!("serving {} at {}", a.model.display(), server.url());
    server.join();
    Ok(0)
}
