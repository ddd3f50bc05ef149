//! The `recsample` command line: ingest, sample, svp, train, evaluate,
//! psi, synth, report.
//!
//! Every subcommand writes its artifacts plus a `provenance.json` capturing
//! the arguments, seeds, crate version, and input hashes, so any output can
//! be regenerated from its provenance alone. Wall-clock time appears only
//! in provenance, never in data artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::data::{
    export_csv, export_id_maps, filter_min_interactions, ingest_csv, split_leave_one_last,
    split_random, CsvSchema, Dataset, Scenario, SplitBundle,
};
use crate::error::{Error, Result};
use crate::eval::{
    config_from_toml, generate_synthetic, run_experiment, write_artifacts, PsiReport,
    SamplingStrategy, SyntheticConfig,
};
use crate::metrics::{mse, ranking_metrics, Metric, MetricValue};
use crate::models::{train, Model, ModelKind, TrainConfig};
use crate::rng::child_seed;
use crate::sampling::{sample_with_strategy, SampleResult, SampleSpec, StrategyParams};
use crate::svp::{
    importance_explicit, importance_implicit, importance_prop, svp_sample, train_proxy,
    Granularity, ImportanceTable, PropensityParams, ProxyKind,
};

#[derive(Parser)]
#[command(
    name = "recsample",
    version,
    about = "Subsample interaction datasets and measure how well samples preserve algorithm rankings"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a raw interaction CSV, validate it, and write the canonical form.
    Ingest(IngestArgs),
    /// Subsample a train set under one of the eight plain strategies.
    Sample(SampleArgs),
    /// Score interactions with a proxy model and subsample by importance.
    Svp(SvpArgs),
    /// Train one recommender and dump its checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    Evaluate(EvaluateArgs),
    /// Run a full sampling-fidelity experiment grid from a config file.
    Psi(PsiArgs),
    /// Generate a synthetic interaction dataset.
    Synth(SynthArgs),
    /// Regenerate plot-ready CSVs from an existing report.
    Report(ReportArgs),
}

#[derive(Args)]
struct CsvArgs {
    /// Field delimiter.
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// The file has no header row.
    #[arg(long)]
    no_header: bool,
    #[arg(long, default_value_t = 0)]
    user_col: usize,
    #[arg(long, default_value_t = 1)]
    item_col: usize,
    /// Column of the rating; omit with --no-rating (defaults every rating to 1).
    #[arg(long, default_value_t = 2)]
    rating_col: usize,
    #[arg(long)]
    no_rating: bool,
    /// Column of the timestamp; omit with --no-timestamp (row order is used).
    #[arg(long, default_value_t = 3)]
    timestamp_col: usize,
    #[arg(long)]
    no_timestamp: bool,
}

impl CsvArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            delimiter: self.delimiter as u8,
            has_header: !self.no_header,
            user_col: self.user_col,
            item_col: self.item_col,
            rating_col: (!self.no_rating).then_some(self.rating_col),
            timestamp_col: (!self.no_timestamp).then_some(self.timestamp_col),
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Input CSV of (user, item, rating, timestamp) rows.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for dataset.csv, users.csv, items.csv, stats.json.
    #[arg(long)]
    output: PathBuf,
    /// Drop users with fewer interactions than this before writing.
    #[arg(long)]
    min_interactions: Option<u32>,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Args)]
struct SampleArgs {
    /// The train set to subsample (canonical CSV).
    #[arg(long)]
    input: PathBuf,
    /// Strategy id, e.g. random-interaction, head-user, forest-fire.
    #[arg(long)]
    strategy: String,
    #[arg(long)]
    percent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Strategy tunables as key=value (restart-prob, burn-prob, damping,
    /// pagerank-tol, pagerank-max-iter).
    #[arg(long = "params", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Output directory for retained.csv and provenance.json.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Args)]
struct SvpArgs {
    /// The train set to score and subsample (canonical CSV).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_scenario, default_value = "implicit")]
    scenario: Scenario,
    /// Proxy model: bias-only or mf.
    #[arg(long, default_value = "mf")]
    proxy: String,
    /// Selection granularity: interaction or user.
    #[arg(long, default_value = "interaction")]
    granularity: String,
    /// Apply inverse-propensity correction.
    #[arg(long)]
    prop: bool,
    /// Propensity sigmoid scalars.
    #[arg(long, default_value_t = 0.55)]
    a: f64,
    #[arg(long, default_value_t = 1.5)]
    b: f64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 4)]
    n_neg: usize,
    #[arg(long, default_value_t = 8)]
    latent_dim: usize,
    #[arg(long, default_value_t = 0.006)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.01)]
    l2_reg: f64,
    #[arg(long)]
    percent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for importance.csv, retained.csv, provenance.json.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset CSV; the train split is derived internally.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_scenario)]
    scenario: Scenario,
    /// Seed of the 80/10/10 split (ignored for sequential).
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// poprec, bias-only, mf, or neumf.
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 8)]
    latent_dim: usize,
    #[arg(long, default_value_t = 0.006)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 0.01)]
    l2_reg: f64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 4)]
    n_neg: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint path (JSON).
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset CSV; the split is re-derived from --split-seed.
    #[arg(long)]
    input: PathBuf,
    /// Model checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value_t = 100)]
    recall_k: usize,
    #[arg(long, default_value_t = 10)]
    ndcg_k: usize,
    /// Metrics JSON output path.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Args)]
struct PsiArgs {
    /// Experiment description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Bound on parallel cells; overrides the config.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the config's output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    users: usize,
    #[arg(long, default_value_t = 100)]
    items: usize,
    #[arg(long, default_value_t = 2000)]
    interactions: usize,
    #[arg(long, default_value_t = 8)]
    latent_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    popularity_exponent: f64,
    #[arg(long, default_value_t = 0.8)]
    user_activity_exponent: f64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// A report.json produced by `psi`.
    #[arg(long)]
    report: PathBuf,
    /// Directory for the regenerated CSVs.
    #[arg(long)]
    output: PathBuf,
}

fn parse_scenario(s: &str) -> std::result::Result<Scenario, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parse argv and run; library errors become exit code 1, usage errors 2.
pub fn main_entry() -> std::process::ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message and distinguishes --help/--version
            let _ = e.print();
            return if e.use_stderr() {
                std::process::ExitCode::from(2)
            } else {
                std::process::ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}

/// Entry point for tests: parse an explicit argv and run.
pub fn run_from<I, T>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)
        .map_err(|e| Error::Parameter(format!("usage: {e}")))?;
    dispatch(cli)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Svp(args) => cmd_svp(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Psi(args) => cmd_psi(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Report(args) => cmd_report(args),
    }
}

#[derive(serde::Serialize)]
struct Provenance {
    command: String,
    version: String,
    config: serde_json::Value,
    input_hashes: BTreeMap<String, String>,
    created_unix: u64,
}

fn write_provenance(
    dir: &Path,
    command: &str,
    config: serde_json::Value,
    inputs: &[&Path],
) -> Result<()> {
    let mut input_hashes = BTreeMap::new();
    for path in inputs {
        let mut hasher = Sha256::new();
        hasher.update(std::fs::read(path)?);
        input_hashes.insert(path.display().to_string(), format!("{:x}", hasher.finalize()));
    }
    let provenance = Provenance {
        command: command.to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        config,
        input_hashes,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    std::fs::write(dir.join("provenance.json"), serde_json::to_vec_pretty(&provenance)?)?;
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let mut dataset = ingest_csv(&args.input, &args.csv.schema())?;
    if let Some(k) = args.min_interactions {
        dataset = filter_min_interactions(&dataset, k)?;
    }
    std::fs::create_dir_all(&args.output)?;
    export_csv(&dataset, &args.output.join("dataset.csv"))?;
    export_id_maps(&dataset, &args.output.join("users.csv"), &args.output.join("items.csv"))?;
    let stats = serde_json::json!({
        "interactions": dataset.len(),
        "users": dataset.num_users(),
        "items": dataset.num_items(),
    });
    std::fs::write(args.output.join("stats.json"), serde_json::to_vec_pretty(&stats)?)?;
    write_provenance(
        &args.output,
        "ingest",
        serde_json::json!({
            "input": args.input,
            "min_interactions": args.min_interactions,
        }),
        &[&args.input],
    )?;
    println!(
        "ingested {} interactions, {} users, {} items",
        dataset.len(),
        dataset.num_users(),
        dataset.num_items()
    );
    Ok(())
}

fn parse_strategy_params(pairs: &[String]) -> Result<StrategyParams> {
    let mut params = StrategyParams::default();
    for pair in pairs {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("expected key=value, got `{pair}`")))?;
        let parse = |v: &str| -> Result<f64> {
            v.parse().map_err(|e| Error::Parameter(format!("bad value for {key}: {e}")))
        };
        match key {
            "restart-prob" => params.restart_prob = parse(value)?,
            "burn-prob" => params.burn_prob = parse(value)?,
            "damping" => params.damping = parse(value)?,
            "pagerank-tol" => params.pagerank_tol = parse(value)?,
            "pagerank-max-iter" => {
                params.pagerank_max_iter = value
                    .parse()
                    .map_err(|e| Error::Parameter(format!("bad value for {key}: {e}")))?
            }
            other => return Err(Error::Parameter(format!("unknown strategy param `{other}`"))),
        }
    }
    Ok(params)
}

fn write_sample_outputs(dir: &Path, result: &SampleResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    export_csv(&result.retained, &dir.join("retained.csv"))?;
    std::fs::write(
        dir.join("sample.json"),
        serde_json::to_vec_pretty(&result.provenance)?,
    )?;
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    let strategy: SamplingStrategy = args.strategy.parse()?;
    let train_set = ingest_csv(&args.input, &args.csv.schema())?;
    let mut spec = SampleSpec::new(args.percent, args.seed);
    spec.params = parse_strategy_params(&args.params)?;
    let result = match strategy {
        SamplingStrategy::Base(base) => sample_with_strategy(&train_set, base, &spec)?,
        SamplingStrategy::Svp { .. } => {
            return Err(Error::Parameter(
                "proxy-based strategies run through the `svp` subcommand".into(),
            ))
        }
    };
    write_sample_outputs(&args.output, &result)?;
    write_provenance(
        &args.output,
        "sample",
        serde_json::json!({
            "input": args.input,
            "strategy": args.strategy,
            "percent": args.percent,
            "seed": args.seed,
            "params": spec.params,
        }),
        &[&args.input],
    )?;
    println!("retained {} of {} interactions", result.retained.len(), train_set.len());
    Ok(())
}

fn export_importance(table: &ImportanceTable, train_set: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    match table.granularity {
        Granularity::Interaction => {
            writer.write_record(["interaction", "user", "item", "importance", "propensity"])?;
            let maps = train_set.id_maps();
            for idx in 0..table.interaction.len() {
                let propensity = table
                    .propensities
                    .get(idx)
                    .map_or_else(|| "1".to_owned(), |p| p.to_string());
                writer.write_record([
                    idx.to_string(),
                    maps.users.label(table.users[idx]).unwrap_or_default().to_owned(),
                    maps.items.label(table.items[idx]).unwrap_or_default().to_owned(),
                    table.interaction[idx].to_string(),
                    propensity,
                ])?;
            }
        }
        Granularity::User => {
            writer.write_record(["user", "importance"])?;
            let maps = train_set.id_maps();
            for (user, value) in table.user.iter().enumerate() {
                writer.write_record([
                    maps.users.label(user as u32).unwrap_or_default().to_owned(),
                    value.to_string(),
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

fn cmd_svp(args: SvpArgs) -> Result<()> {
    let proxy: ProxyKind = args.proxy.parse()?;
    let granularity: Granularity = args.granularity.parse()?;
    let train_set = ingest_csv(&args.input, &args.csv.schema())?;
    let cfg = TrainConfig {
        latent_dim: args.latent_dim,
        learning_rate: args.learning_rate,
        dropout: 0.0,
        l2_reg: args.l2_reg,
        epochs: args.epochs,
        n_neg: args.n_neg,
        seed: child_seed(args.seed, "proxy"),
    };
    let trace = train_proxy(&train_set, proxy, args.scenario, &cfg)?;
    let mut table = match args.scenario {
        Scenario::Explicit => importance_explicit(&trace, granularity)?,
        _ => importance_implicit(&trace, granularity, 1.0)?,
    };
    if args.prop {
        let params = PropensityParams::from_train(&train_set, args.a, args.b)?;
        table = importance_prop(&table, &params)?.with_granularity(granularity);
    }
    let result = svp_sample(&train_set, &table, &SampleSpec::new(args.percent, args.seed))?;

    std::fs::create_dir_all(&args.output)?;
    export_importance(&table, &train_set, &args.output.join("importance.csv"))?;
    write_sample_outputs(&args.output, &result)?;
    write_provenance(
        &args.output,
        "svp",
        serde_json::json!({
            "input": args.input,
            "scenario": args.scenario,
            "proxy": args.proxy,
            "granularity": args.granularity,
            "prop": args.prop,
            "a": args.a,
            "b": args.b,
            "epochs": args.epochs,
            "n_neg": args.n_neg,
            "latent_dim": args.latent_dim,
            "learning_rate": args.learning_rate,
            "l2_reg": args.l2_reg,
            "percent": args.percent,
            "seed": args.seed,
        }),
        &[&args.input],
    )?;
    println!(
        "{}: retained {} of {} interactions",
        result.provenance.strategy,
        result.retained.len(),
        train_set.len()
    );
    Ok(())
}

fn load_split(dataset: &Dataset, scenario: Scenario, split_seed: u64) -> Result<SplitBundle> {
    match scenario {
        Scenario::Sequential => split_leave_one_last(dataset),
        _ => split_random(dataset, scenario, split_seed),
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Checkpoint {
    kind: ModelKind,
    scenario: Scenario,
    config: TrainConfig,
    split_seed: u64,
    model: Model,
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let kind: ModelKind = args.model.parse()?;
    let dataset = ingest_csv(&args.input, &args.csv.schema())?;
    let bundle = load_split(&dataset, args.scenario, args.split_seed)?;
    let config = TrainConfig {
        latent_dim: args.latent_dim,
        learning_rate: args.learning_rate,
        dropout: args.dropout,
        l2_reg: args.l2_reg,
        epochs: args.epochs,
        n_neg: args.n_neg,
        seed: args.seed,
    };
    let model = train(&bundle.train, kind, args.scenario, &config)?;
    let checkpoint =
        Checkpoint { kind, scenario: args.scenario, config, split_seed: args.split_seed, model };
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&args.output, serde_json::to_vec_pretty(&checkpoint)?)?;
    if let Some(dir) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        write_provenance(
            dir,
            "train",
            serde_json::json!({
                "input": args.input,
                "model": args.model,
                "scenario": args.scenario,
                "split_seed": args.split_seed,
                "config": checkpoint.config,
            }),
            &[&args.input],
        )?;
    }
    println!("trained {kind} on {} interactions", bundle.train.len());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let checkpoint: Checkpoint =
        serde_json::from_slice(&std::fs::read(&args.model)?)?;
    let dataset = ingest_csv(&args.input, &args.csv.schema())?;
    let bundle = load_split(&dataset, checkpoint.scenario, args.split_seed)?;

    let mut values: Vec<MetricValue> = Vec::new();
    match checkpoint.scenario {
        Scenario::Explicit => values.push(mse(&checkpoint.model, &bundle.test)?),
        _ => values.extend(ranking_metrics(
            &checkpoint.model,
            &bundle,
            &[Metric::Auc, Metric::RecallAt(args.recall_k), Metric::NdcgAt(args.ndcg_k)],
        )?),
    }

    let report = serde_json::json!({
        "scenario": checkpoint.scenario,
        "model": checkpoint.kind,
        "users": bundle.test.num_users(),
        "metrics": values,
    });
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&args.output, serde_json::to_vec_pretty(&report)?)?;
    for value in &values {
        println!("{} = {:.6}", value.metric.label(), value.value);
    }
    Ok(())
}

fn cmd_psi(args: PsiArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut config = config_from_toml(&text)?;
    if let Some(jobs) = args.jobs {
        config.jobs = Some(jobs);
    }
    if let Some(output) = &args.output {
        config.output_dir = Some(output.clone());
    }
    let report = run_experiment(&config)?;
    if let Some(dir) = &config.output_dir {
        write_provenance(
            dir,
            "psi",
            serde_json::json!({ "config": args.config, "jobs": config.jobs }),
            &[&args.config],
        )?;
    }
    for record in &report.psi_average {
        println!("psi[{}] = {:.4}", record.strategy, record.psi);
    }
    if report.partial {
        println!("warning: {} cell(s) failed; psi is partial", report.failures.len());
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        users: args.users,
        items: args.items,
        interactions: args.interactions,
        latent_dim: args.latent_dim,
        popularity_exponent: args.popularity_exponent,
        user_activity_exponent: args.user_activity_exponent,
        noise: args.noise,
        seed: args.seed,
        mnar: None,
    };
    let dataset = generate_synthetic(&cfg)?;
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    export_csv(&dataset, &args.output)?;
    if let Some(dir) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        write_provenance(dir, "synth", serde_json::to_value(&cfg)?, &[])?;
    }
    println!(
        "generated {} interactions over {} users and {} items",
        dataset.len(),
        dataset.num_users(),
        dataset.num_items()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let report: PsiReport = serde_json::from_slice(&std::fs::read(&args.report)?)?;
    write_artifacts(&report, &args.output)?;
    println!("wrote plot CSVs to {}", args.output.display());
    Ok(())
}
