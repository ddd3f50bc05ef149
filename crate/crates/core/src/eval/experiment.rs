//! The experiment grid: sample, train, evaluate, and aggregate.
//!
//! A run is a grid of cells. The full-data cell of each
//! `(dataset, scenario)` anchors the leaderboards; every
//! `(strategy, percent, seed)` cell subsamples only the train split, trains
//! the whole algorithm slate, evaluates on the untouched test split, and
//! contributes one Kendall tau per metric. Cells are independent,
//! individually seeded from the root seed, and cacheable on disk, so runs
//! are parallel, resumable, and bit-reproducible.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::data::{
    filter_min_interactions, ingest_csv, split_leave_one_last, split_random,
    CsvSchema, Dataset, Scenario, SplitBundle,
};
use crate::error::{Error, Result};
use crate::eval::{
    compute_psi, generate_synthetic, kendall_tau, metrics_for_scenario, Leaderboard,
    SamplingStrategy, SyntheticConfig, TauCell,
};
use crate::metrics::{mse, ranking_metrics, Metric};
use crate::models::{train_with, Model, ModelKind, PopularityModel, TrainConfig};
use crate::rng::child_seed;
use crate::sampling::{sample_with_strategy, SampleResult, SampleSpec};
use crate::svp::{
    importance_explicit, importance_implicit, importance_prop, svp_sample, train_proxy,
    Granularity, ImportanceTable, PropensityParams,
};

const DEFAULT_PERCENTS: [f64; 6] = [80.0, 60.0, 40.0, 20.0, 10.0, 1.0];

fn default_percents() -> Vec<f64> {
    DEFAULT_PERCENTS.to_vec()
}

fn default_scenarios() -> Vec<Scenario> {
    Scenario::ALL.to_vec()
}

fn default_sample_seeds() -> u32 {
    1
}

fn default_min_interactions() -> u32 {
    3
}

fn default_true() -> bool {
    true
}

fn default_latent_dims() -> Vec<usize> {
    vec![8]
}

fn default_learning_rates() -> Vec<f64> {
    vec![0.006]
}

fn default_dropouts() -> Vec<f64> {
    vec![0.0]
}

fn default_l2_regs() -> Vec<f64> {
    vec![0.01]
}

fn default_epochs() -> usize {
    10
}

fn default_n_neg() -> usize {
    4
}

fn default_eval_every() -> usize {
    1
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub root_seed: u64,
    #[serde(default = "default_percents")]
    pub percents: Vec<f64>,
    #[serde(default = "default_sample_seeds")]
    pub sample_seeds: u32,
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<Scenario>,
    pub strategies: Vec<String>,
    pub datasets: Vec<DatasetConfig>,
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default = "default_min_interactions")]
    pub min_interactions: u32,
    #[serde(default)]
    pub proxy: ProxySettings,
    #[serde(default)]
    pub propensity: PropensitySettings,
    #[serde(default)]
    pub allow_partial: bool,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub cache: bool,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic(SyntheticConfig),
    Csv(CsvSource),
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default)]
    pub delimiter: Option<char>,
    #[serde(default = "default_true")]
    pub has_header: bool,
}

/// One leaderboard entry of the slate, with its own small search grid.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AlgorithmConfig {
    pub id: String,
    pub kind: ModelKind,
    #[serde(default = "default_latent_dims")]
    pub latent_dims: Vec<usize>,
    #[serde(default = "default_learning_rates")]
    pub learning_rates: Vec<f64>,
    #[serde(default = "default_dropouts")]
    pub dropouts: Vec<f64>,
    #[serde(default = "default_l2_regs")]
    pub l2_regs: Vec<f64>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_n_neg")]
    pub n_neg: usize,
    /// Check the validation metric every this many epochs (and always at
    /// the final epoch); the best checkpoint wins.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

impl AlgorithmConfig {
    fn combos(&self, seed: u64) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &latent_dim in &self.latent_dims {
            for &learning_rate in &self.learning_rates {
                for &dropout in &self.dropouts {
                    for &l2_reg in &self.l2_regs {
                        out.push(TrainConfig {
                            latent_dim,
                            learning_rate,
                            dropout,
                            l2_reg,
                            epochs: self.epochs,
                            n_neg: self.n_neg,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ProxySettings {
    pub kind_latent_dim: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub epochs: usize,
    pub n_neg: usize,
    /// Laplace-style smoothing of the inverse sampled-AUC.
    pub smoothing: f64,
}

impl Default for ProxySettings {
    fn default() -> Self {
        Self {
            kind_latent_dim: 8,
            learning_rate: 0.006,
            l2_reg: 0.01,
            epochs: 10,
            n_neg: 4,
            smoothing: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PropensitySettings {
    pub a: f64,
    pub b: f64,
}

impl Default for PropensitySettings {
    fn default() -> Self {
        Self { a: 0.55, b: 1.5 }
    }
}

/// Metric values of every algorithm in one cell, keyed by metric label.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CellResult {
    pub metric_values: BTreeMap<String, Vec<(String, f64)>>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CellFailure {
    pub dataset: String,
    pub scenario: Scenario,
    pub strategy: String,
    pub percent: f64,
    pub seed_index: u32,
    pub error: String,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BoardRecord {
    pub dataset: String,
    pub strategy: String,
    pub percent: f64,
    pub seed_index: u32,
    pub board: Leaderboard,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PsiRecord {
    pub dataset: String,
    pub strategy: String,
    pub psi: f64,
    pub cells_present: usize,
    pub cells_expected: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StrategyPsi {
    pub strategy: String,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PMleRecord {
    pub algorithm: String,
    pub scenario: Scenario,
    pub percent: f64,
    pub value: f64,
    /// How many (dataset, strategy, metric, seed) terms were averaged.
    pub terms: usize,
}

/// Everything a run produces. Deliberately timestamp-free so reruns with
/// the same config are byte-identical.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PsiReport {
    pub config_hash: String,
    pub root_seed: u64,
    pub datasets: Vec<String>,
    pub scenarios: Vec<Scenario>,
    pub percents: Vec<f64>,
    pub sample_seeds: u32,
    pub strategies: Vec<String>,
    pub algorithms: Vec<String>,
    pub leaderboards: Vec<BoardRecord>,
    pub taus: Vec<TauCell>,
    pub psi: Vec<PsiRecord>,
    pub psi_average: Vec<StrategyPsi>,
    pub p_mle: Vec<PMleRecord>,
    pub failures: Vec<CellFailure>,
    pub partial: bool,
}

impl PsiReport {
    pub fn psi_of(&self, strategy: &str) -> Option<f64> {
        self.psi_average.iter().find(|s| s.strategy == strategy).map(|s| s.psi)
    }

    /// Mean tau at each percent, averaged over everything else, in the
    /// run's percent order.
    pub fn mean_tau_by_percent(&self) -> Vec<(f64, f64)> {
        self.percents
            .iter()
            .map(|&p| {
                let taus: Vec<f64> =
                    self.taus.iter().filter(|c| c.percent == p).map(|c| c.tau).collect();
                (p, taus.iter().sum::<f64>() / taus.len().max(1) as f64)
            })
            .collect()
    }
}

struct PreparedDataset {
    name: String,
    fingerprint: String,
    bundles: Vec<(Scenario, SplitBundle)>,
}

struct Cell {
    dataset_index: usize,
    scenario: Scenario,
    /// `None` marks the full-data anchor cell.
    strategy: Option<SamplingStrategy>,
    percent: f64,
    seed_index: u32,
}

impl Cell {
    fn strategy_id(&self) -> String {
        self.strategy.as_ref().map_or_else(|| "full".to_owned(), |s| s.id())
    }
}

/// Run the whole grid described by the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<PsiReport> {
    validate(config)?;
    let report = match config.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| run_inner(config))?
        }
        None => run_inner(config)?,
    };
    if let Some(dir) = &config.output_dir {
        write_artifacts(&report, dir)?;
    }
    Ok(report)
}

fn validate(config: &ExperimentConfig) -> Result<()> {
    if config.datasets.is_empty()
        || config.strategies.is_empty()
        || config.algorithms.is_empty()
        || config.percents.is_empty()
        || config.scenarios.is_empty()
        || config.sample_seeds == 0
    {
        return Err(Error::Config(
            "datasets, strategies, algorithms, percents, scenarios, and sample_seeds must all be non-empty"
                .into(),
        ));
    }
    for p in &config.percents {
        if !(*p > 0.0 && *p <= 100.0) {
            return Err(Error::Config(format!("percent {p} outside (0, 100]")));
        }
    }
    for s in &config.strategies {
        s.parse::<SamplingStrategy>()?;
    }
    let mut ids = std::collections::HashSet::new();
    for a in &config.algorithms {
        if !ids.insert(a.id.clone()) {
            return Err(Error::Config(format!("duplicate algorithm id `{}`", a.id)));
        }
        if a.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
    }
    Ok(())
}

fn run_inner(config: &ExperimentConfig) -> Result<PsiReport> {
    let config_hash = hash_of(&serde_json::to_vec(&HashableConfig::from(config))?);
    let strategies: Vec<SamplingStrategy> =
        config.strategies.iter().map(|s| s.parse()).collect::<Result<_>>()?;

    let datasets: Vec<PreparedDataset> = config
        .datasets
        .iter()
        .map(|d| prepare_dataset(config, d))
        .collect::<Result<_>>()?;

    // proxy-derived importance tables, keyed by everything that shapes them
    let tables = precompute_tables(config, &strategies, &datasets)?;

    let mut cells = Vec::new();
    for (dataset_index, _) in datasets.iter().enumerate() {
        for &scenario in &config.scenarios {
            cells.push(Cell { dataset_index, scenario, strategy: None, percent: 100.0, seed_index: 0 });
            for strategy in &strategies {
                for &percent in &config.percents {
                    for seed_index in 0..config.sample_seeds {
                        cells.push(Cell {
                            dataset_index,
                            scenario,
                            strategy: Some(*strategy),
                            percent,
                            seed_index,
                        });
                    }
                }
            }
        }
    }

    let cache_dir = config.output_dir.as_ref().filter(|_| config.cache).map(|d| d.join("cells"));
    if let Some(dir) = &cache_dir {
        std::fs::create_dir_all(dir)?;
    }

    let outcomes: Vec<(usize, std::result::Result<CellResult, String>)> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, cell)| {
            let outcome = run_cell(config, &config_hash, cell, &datasets, &tables, cache_dir.as_deref())
                .map_err(|e| e.to_string());
            (idx, outcome)
        })
        .collect();

    assemble_report(config, config_hash, &strategies, &datasets, &cells, outcomes)
}

/// The config fields that define results (paths to outputs excluded).
#[derive(serde::Serialize)]
struct HashableConfig<'a> {
    root_seed: u64,
    percents: &'a [f64],
    sample_seeds: u32,
    scenarios: &'a [Scenario],
    strategies: &'a [String],
    datasets: &'a [DatasetConfig],
    algorithms: &'a [AlgorithmConfig],
    min_interactions: u32,
    proxy: &'a ProxySettings,
    propensity: &'a PropensitySettings,
}

impl<'a> From<&'a ExperimentConfig> for HashableConfig<'a> {
    fn from(c: &'a ExperimentConfig) -> Self {
        Self {
            root_seed: c.root_seed,
            percents: &c.percents,
            sample_seeds: c.sample_seeds,
            scenarios: &c.scenarios,
            strategies: &c.strategies,
            datasets: &c.datasets,
            algorithms: &c.algorithms,
            min_interactions: c.min_interactions,
            proxy: &c.proxy,
            propensity: &c.propensity,
        }
    }
}

fn hash_of(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

fn prepare_dataset(config: &ExperimentConfig, dcfg: &DatasetConfig) -> Result<PreparedDataset> {
    let (raw, fingerprint) = match &dcfg.source {
        DatasetSource::Synthetic(scfg) => {
            let d = generate_synthetic(scfg)?;
            (d, hash_of(&serde_json::to_vec(scfg)?))
        }
        DatasetSource::Csv(csv) => {
            let schema = CsvSchema {
                delimiter: csv.delimiter.map(|c| c as u8).unwrap_or(b','),
                has_header: csv.has_header,
                ..CsvSchema::default()
            };
            let d = ingest_csv(&csv.path, &schema)?;
            (d, hash_of(&std::fs::read(&csv.path)?))
        }
    };
    let filtered = filter_min_interactions(&raw, config.min_interactions)?;
    let mut bundles = Vec::new();
    for &scenario in &config.scenarios {
        let bundle = match scenario {
            Scenario::Sequential => split_leave_one_last(&filtered)?,
            _ => split_random(
                &filtered,
                scenario,
                child_seed(config.root_seed, &format!("split/{}/{}", dcfg.name, scenario)),
            )?,
        };
        bundles.push((scenario, bundle));
    }
    Ok(PreparedDataset { name: dcfg.name.clone(), fingerprint, bundles })
}

type TableKey = (usize, Scenario, crate::svp::ProxyKind, bool, u32);

fn precompute_tables(
    config: &ExperimentConfig,
    strategies: &[SamplingStrategy],
    datasets: &[PreparedDataset],
) -> Result<BTreeMap<TableKey, ImportanceTable>> {
    let mut needed: Vec<(crate::svp::ProxyKind, bool)> = Vec::new();
    for s in strategies {
        if let SamplingStrategy::Svp { proxy, propensity, .. } = s {
            let key = (*proxy, *propensity);
            if !needed.contains(&key) {
                needed.push(key);
            }
        }
    }
    if needed.is_empty() {
        return Ok(BTreeMap::new());
    }

    // trained proxies are shared between the plain and corrected variants
    let mut work: Vec<TableKey> = Vec::new();
    for (dataset_index, prepared) in datasets.iter().enumerate() {
        for (scenario, _) in &prepared.bundles {
            for (proxy, propensity) in &needed {
                for seed_index in 0..config.sample_seeds {
                    work.push((dataset_index, *scenario, *proxy, *propensity, seed_index));
                }
            }
        }
    }

    let tables = Mutex::new(BTreeMap::new());
    let base_tables = Mutex::new(BTreeMap::<(usize, Scenario, crate::svp::ProxyKind, u32), ImportanceTable>::new());
    work.into_par_iter().try_for_each(|key| -> Result<()> {
        let (dataset_index, scenario, proxy, propensity, seed_index) = key;
        let prepared = &datasets[dataset_index];
        let bundle = &prepared
            .bundles
            .iter()
            .find(|(s, _)| *s == scenario)
            .expect("bundle exists for every configured scenario")
            .1;
        let base_key = (dataset_index, scenario, proxy, seed_index);
        let base = {
            let cached = base_tables.lock().unwrap().get(&base_key).cloned();
            match cached {
                Some(t) => t,
                None => {
                    let cfg = TrainConfig {
                        latent_dim: config.proxy.kind_latent_dim,
                        learning_rate: config.proxy.learning_rate,
                        dropout: 0.0,
                        l2_reg: config.proxy.l2_reg,
                        epochs: config.proxy.epochs,
                        n_neg: config.proxy.n_neg,
                        seed: child_seed(
                            config.root_seed,
                            &format!("proxy/{}/{}/{}/{}", prepared.name, scenario, proxy, seed_index),
                        ),
                    };
                    let trace = train_proxy(&bundle.train, proxy, scenario, &cfg)?;
                    let table = match scenario {
                        Scenario::Explicit => {
                            importance_explicit(&trace, Granularity::Interaction)?
                        }
                        _ => importance_implicit(
                            &trace,
                            Granularity::Interaction,
                            config.proxy.smoothing,
                        )?,
                    };
                    base_tables.lock().unwrap().insert(base_key, table.clone());
                    table
                }
            }
        };
        let table = if propensity {
            let params =
                PropensityParams::from_train(&bundle.train, config.propensity.a, config.propensity.b)?;
            importance_prop(&base, &params)?
        } else {
            base
        };
        tables.lock().unwrap().insert(key, table);
        Ok(())
    })?;
    Ok(tables.into_inner().unwrap())
}

fn run_cell(
    config: &ExperimentConfig,
    config_hash: &str,
    cell: &Cell,
    datasets: &[PreparedDataset],
    tables: &BTreeMap<TableKey, ImportanceTable>,
    cache_dir: Option<&Path>,
) -> Result<CellResult> {
    let prepared = &datasets[cell.dataset_index];
    let cache_key = cache_dir.map(|dir| {
        let key = hash_of(
            format!(
                "{config_hash}|{}|{}|{}|{}|{}|{}",
                prepared.name,
                prepared.fingerprint,
                cell.scenario,
                cell.strategy_id(),
                cell.percent,
                cell.seed_index
            )
            .as_bytes(),
        );
        dir.join(format!("{key}.json"))
    });
    if let Some(path) = &cache_key {
        if let Ok(bytes) = std::fs::read(path) {
            if let Ok(result) = serde_json::from_slice::<CellResult>(&bytes) {
                return Ok(result);
            }
        }
    }

    let bundle = &prepared
        .bundles
        .iter()
        .find(|(s, _)| *s == cell.scenario)
        .expect("bundle exists for every configured scenario")
        .1;

    let train_set: Dataset = match &cell.strategy {
        None => bundle.train.clone(),
        Some(strategy) => {
            let seed = child_seed(
                config.root_seed,
                &format!(
                    "sample/{}/{}/{}/{}/{}",
                    prepared.name,
                    cell.scenario,
                    cell.strategy_id(),
                    cell.percent,
                    cell.seed_index
                ),
            );
            let spec = SampleSpec::new(cell.percent, seed);
            let result: SampleResult = match strategy {
                SamplingStrategy::Base(base) => sample_with_strategy(&bundle.train, *base, &spec)?,
                SamplingStrategy::Svp { proxy, granularity, propensity } => {
                    let key =
                        (cell.dataset_index, cell.scenario, *proxy, *propensity, cell.seed_index);
                    let table =
                        tables.get(&key).expect("importance tables precomputed").clone();
                    svp_sample(&bundle.train, &table.with_granularity(*granularity), &spec)?
                }
            };
            result.retained
        }
    };
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("cell retained no training interactions".into()));
    }

    let result = evaluate_slate(config, cell, prepared, bundle, &train_set)?;
    if let Some(path) = &cache_key {
        std::fs::write(path, serde_json::to_vec_pretty(&result)?)?;
    }
    Ok(result)
}

fn evaluate_slate(
    config: &ExperimentConfig,
    cell: &Cell,
    prepared: &PreparedDataset,
    bundle: &SplitBundle,
    train_set: &Dataset,
) -> Result<CellResult> {
    let pertinent = metrics_for_scenario(cell.scenario);
    let mut metric_values: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();

    for algo in &config.algorithms {
        // the popularity baseline has no rating model
        if algo.kind == ModelKind::PopRec && cell.scenario == Scenario::Explicit {
            continue;
        }
        // the training pipeline is fixed per (dataset, scenario, algorithm);
        // only the data changes between cells. Identical train sets (the
        // p=100 case) therefore yield bit-identical models.
        let seed = child_seed(
            config.root_seed,
            &format!("train/{}/{}/{}", prepared.name, cell.scenario, algo.id),
        );
        let model = train_selected(train_set, bundle, algo, cell.scenario, seed)?;
        for metric in &pertinent {
            let value = match metric {
                Metric::Mse => mse(&model, &bundle.test)?.value,
                m => {
                    let eval_bundle = SplitBundle {
                        scenario: cell.scenario,
                        train: bundle.train.clone(),
                        validation: bundle.validation.clone(),
                        test: bundle.test.clone(),
                    };
                    ranking_metrics(&model, &eval_bundle, &[*m])?[0].value
                }
            };
            metric_values.entry(metric.label()).or_default().push((algo.id.clone(), value));
        }
    }
    Ok(CellResult { metric_values })
}

/// Grid-search one slate entry on the (possibly subsampled) train set,
/// selecting the best config and epoch on the original validation split.
pub fn train_selected(
    train_set: &Dataset,
    bundle: &SplitBundle,
    algo: &AlgorithmConfig,
    scenario: Scenario,
    seed: u64,
) -> Result<Model> {
    if algo.kind == ModelKind::PopRec {
        return Ok(Model::Popularity(PopularityModel::from_train(train_set)));
    }

    // validation plays the test role during selection; candidates exclude
    // only the user's original train items
    let selection_bundle = SplitBundle {
        scenario,
        train: bundle.train.clone(),
        validation: bundle.validation.subset(&[]),
        test: bundle.validation.clone(),
    };
    let lower_better = scenario == Scenario::Explicit;

    let mut best: Option<(f64, Model)> = None;
    for (combo_index, combo) in algo.combos(seed).into_iter().enumerate() {
        let mut cfg = combo;
        cfg.seed = child_seed(seed, &format!("combo/{combo_index}"));
        let mut combo_best: Option<(f64, crate::models::ModelParams)> = None;
        train_with(train_set, algo.kind, scenario, &cfg, |epoch, params| {
            if epoch % algo.eval_every != 0 && epoch != cfg.epochs {
                return Ok(());
            }
            let candidate = Model::Learned(params.clone());
            let value = if lower_better {
                mse(&candidate, &selection_bundle.test)?.value
            } else {
                ranking_metrics(&candidate, &selection_bundle, &[Metric::NdcgAt(10)])?[0].value
            };
            let better = match &combo_best {
                None => true,
                Some((b, _)) =>

                    if lower_better { value < *b } else { value > *b },
            };
            if better {
                if let Model::Learned(p) = candidate {
                    combo_best = Some((value, p));
                }
            }
            Ok(())
        })?;
        let (value, params) = combo_best.expect("at least the final epoch was evaluated");
        let better = match &best {
            None => true,
            Some((b, _)) => {
                if lower_better {
                    value < *b
                } else {
                    value > *b
                }
            }
        };
        if better {
            best = Some((value, Model::Learned(params)));
        }
    }
    Ok(best.expect("non-empty grid").1)
}

fn assemble_report(
    config: &ExperimentConfig,
    config_hash: String,
    strategies: &[SamplingStrategy],
    datasets: &[PreparedDataset],
    cells: &[Cell],
    outcomes: Vec<(usize, std::result::Result<CellResult, String>)>,
) -> Result<PsiReport> {
    let mut results: Vec<Option<CellResult>> = vec![None; cells.len()];
    let mut failures = Vec::new();
    for (idx, outcome) in outcomes {
        match outcome {
            Ok(result) => results[idx] = Some(result),
            Err(error) => failures.push(CellFailure {
                dataset: datasets[cells[idx].dataset_index].name.clone(),
                scenario: cells[idx].scenario,
                strategy: cells[idx].strategy_id(),
                percent: cells[idx].percent,
                seed_index: cells[idx].seed_index,
                error,
            }),
        }
    }

    // leaderboards for every successful cell
    let mut leaderboards = Vec::new();
    let mut boards_by_key: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, cell) in cells.iter().enumerate() {
        let Some(result) = &results[idx] else { continue };
        let dataset = &datasets[cell.dataset_index].name;
        for (metric_label, values) in &result.metric_values {
            let metric: Metric = metric_label.parse()?;
            let board = Leaderboard::from_values(
                cell.scenario,
                metric,
                &cell.strategy_id(),
                values,
            )?;
            let key = format!(
                "{dataset}|{}|{}|{}|{}|{metric_label}",
                cell.scenario,
                cell.strategy_id(),
                cell.percent,
                cell.seed_index
            );
            boards_by_key.insert(key, leaderboards.len());
            leaderboards.push(BoardRecord {
                dataset: dataset.clone(),
                strategy: cell.strategy_id(),
                percent: cell.percent,
                seed_index: cell.seed_index,
                board,
            });
        }
    }

    let board_of = |dataset: &str,
                    scenario: Scenario,
                    strategy: &str,
                    percent: f64,
                    seed_index: u32,
                    metric: &str|
     -> Option<&BoardRecord> {
        let key = format!("{dataset}|{scenario}|{strategy}|{percent}|{seed_index}|{metric}");
        boards_by_key.get(&key).map(|&i| &leaderboards[i])
    };

    // taus of every sampled board against its full-data anchor
    let mut taus = Vec::new();
    for prepared in datasets {
        for &scenario in &config.scenarios {
            for metric in metrics_for_scenario(scenario) {
                let label = metric.label();
                let Some(full) = board_of(&prepared.name, scenario, "full", 100.0, 0, &label)
                else {
                    continue;
                };
                let algorithms = full.board.algorithms();
                let full_ranks = full.board.ranks_aligned_with(&algorithms)?;
                for strategy in strategies {
                    for &percent in &config.percents {
                        for seed_index in 0..config.sample_seeds {
                            let Some(sampled) = board_of(
                                &prepared.name,
                                scenario,
                                &strategy.id(),
                                percent,
                                seed_index,
                                &label,
                            ) else {
                                continue;
                            };
                            let sampled_ranks =
                                sampled.board.ranks_aligned_with(&algorithms)?;
                            match kendall_tau(&full_ranks, &sampled_ranks) {
                                Ok(tau) => taus.push(TauCell {
                                    dataset: prepared.name.clone(),
                                    strategy: strategy.id(),
                                    scenario,
                                    metric: label.clone(),
                                    percent,
                                    seed_index,
                                    tau,
                                }),
                                Err(e) => failures.push(CellFailure {
                                    dataset: prepared.name.clone(),
                                    scenario,
                                    strategy: strategy.id(),
                                    percent,
                                    seed_index,
                                    error: format!("tau[{label}]: {e}"),
                                }),
                            }
                        }
                    }
                }
            }
        }
    }

    let allow_partial = config.allow_partial || !failures.is_empty();
    let mut psi = Vec::new();
    for prepared in datasets {
        for strategy in strategies {
            let cells_of: Vec<TauCell> = taus
                .iter()
                .filter(|c| c.dataset == prepared.name && c.strategy == strategy.id())
                .cloned()
                .collect();
            let value = compute_psi(
                &cells_of,
                &config.scenarios,
                &config.percents,
                config.sample_seeds,
                allow_partial,
            )?;
            psi.push(PsiRecord {
                dataset: prepared.name.clone(),
                strategy: strategy.id(),
                psi: value.psi,
                cells_present: value.cells_present,
                cells_expected: value.cells_expected,
            });
        }
    }
    let psi_average: Vec<StrategyPsi> = strategies
        .iter()
        .map(|strategy| {
            let values: Vec<f64> = psi
                .iter()
                .filter(|r| r.strategy == strategy.id())
                .map(|r| r.psi)
                .collect();
            StrategyPsi {
                strategy: strategy.id(),
                psi: values.iter().sum::<f64>() / values.len().max(1) as f64,
            }
        })
        .collect();

    // rank-movement grid over (algorithm, scenario, percent)
    let mut p_mle = Vec::new();
    for algo in &config.algorithms {
        for &scenario in &config.scenarios {
            if algo.kind == ModelKind::PopRec && scenario == Scenario::Explicit {
                continue;
            }
            for &percent in &config.percents {
                let mut sum = 0.0;
                let mut terms = 0usize;
                for prepared in datasets {
                    for metric in metrics_for_scenario(scenario) {
                        let label = metric.label();
                        let Some(full) =
                            board_of(&prepared.name, scenario, "full", 100.0, 0, &label)
                        else {
                            continue;
                        };
                        let n = full.board.entries.len();
                        let Some(full_rank) = full.board.rank_of(&algo.id) else { continue };
                        for strategy in strategies {
                            for seed_index in 0..config.sample_seeds {
                                let Some(sampled) = board_of(
                                    &prepared.name,
                                    scenario,
                                    &strategy.id(),
                                    percent,
                                    seed_index,
                                    &label,
                                ) else {
                                    continue;
                                };
                                if let Some(sampled_rank) = sampled.board.rank_of(&algo.id) {
                                    sum += crate::eval::p_mle_term(full_rank, sampled_rank, n)?;
                                    terms += 1;
                                }
                            }
                        }
                    }
                }
                if terms > 0 {
                    p_mle.push(PMleRecord {
                        algorithm: algo.id.clone(),
                        scenario,
                        percent,
                        value: sum / terms as f64,
                        terms,
                    });
                }
            }
        }
    }

    let partial = !failures.is_empty();
    Ok(PsiReport {
        config_hash,
        root_seed: config.root_seed,
        datasets: datasets.iter().map(|d| d.name.clone()).collect(),
        scenarios: config.scenarios.clone(),
        percents: config.percents.clone(),
        sample_seeds: config.sample_seeds,
        strategies: strategies.iter().map(|s| s.id()).collect(),
        algorithms: config.algorithms.iter().map(|a| a.id.clone()).collect(),
        leaderboards,
        taus,
        psi,
        psi_average,
        p_mle,
        failures,
        partial,
    })
}

/// Write `report.json` and the three plot-ready CSVs.
pub fn write_artifacts(report: &PsiReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_vec_pretty(report)?)?;

    // tau vs percent, averaged per strategy
    let mut w = csv::Writer::from_path(dir.join("tau_vs_percent.csv"))?;
    w.write_record(["strategy", "percent", "mean_tau"])?;
    for strategy in &report.strategies {
        for &percent in &report.percents {
            let taus: Vec<f64> = report
                .taus
                .iter()
                .filter(|c| &c.strategy == strategy && c.percent == percent)
                .map(|c| c.tau)
                .collect();
            if !taus.is_empty() {
                let mean = taus.iter().sum::<f64>() / taus.len() as f64;
                w.write_record([strategy, &percent.to_string(), &mean.to_string()])?;
            }
        }
    }
    w.flush()?;

    // tau per metric per strategy
    let mut w = csv::Writer::from_path(dir.join("tau_per_metric.csv"))?;
    w.write_record(["strategy", "metric", "percent", "mean_tau"])?;
    let mut metric_labels: Vec<String> =
        report.taus.iter().map(|c| c.metric.clone()).collect();
    metric_labels.sort();
    metric_labels.dedup();
    for strategy in &report.strategies {
        for metric in &metric_labels {
            for &percent in &report.percents {
                let taus: Vec<f64> = report
                    .taus
                    .iter()
                    .filter(|c| {
                        &c.strategy == strategy && &c.metric == metric && c.percent == percent
                    })
                    .map(|c| c.tau)
                    .collect();
                if !taus.is_empty() {
                    let mean = taus.iter().sum::<f64>() / taus.len() as f64;
                    w.write_record([strategy, metric, &percent.to_string(), &mean.to_string()])?;
                }
            }
        }
    }
    w.flush()?;

    // rank-movement heatmap grid
    let mut w = csv::Writer::from_path(dir.join("p_mle_grid.csv"))?;
    w.write_record(["algorithm", "scenario", "percent", "p_mle"])?;
    for record in &report.p_mle {
        w.write_record([
            &record.algorithm,
            record.scenario.as_str(),
            &record.percent.to_string(),
            &record.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Convenience: parse a TOML experiment config.
pub fn config_from_toml(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}
