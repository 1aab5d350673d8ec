//! Experiment runner: instance generation, best-of-seeds runs, aggregation
//! across graphs, noise sweeps, skewness studies and report files.
//!
//! JSON reports are the source of truth and contain no timing data, so a
//! rerun with the same configuration reproduces them byte for byte. Wall
//! times go to a separate `timings.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzSpec, MixerKind};
use crate::error::{Error, Result};
use crate::ising::{build_ising, cost_table, CostTable, IsingHamiltonian, TABLE_MAX_QUBITS};
use crate::metrics::{
    approximation_ratio, class_percentages, classify_all, mean_std, rank, top_states, true_percentage,
    ClassPercentages, StateProbability, DEFAULT_TOP_K,
};
use crate::optimizer::{layerwise_learning, ExactObjective, LLTrace, NoisyObjective, Objective, OptimizerConfig};
use crate::statevector::{expectation_cost, NoiseSpec};
use crate::tsp::{brute_force_solve, gen_random_graph, skewness, BitstringClass, Solution, TspGraph};

pub const DEFAULT_SHOTS: usize = 1024;
pub const NOISE_LEVELS: [f64; 4] = [5e-5, 1e-4, 5e-4, 1e-3];

const GRAPH_STREAM: u64 = 1;
const RUN_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent sub-seed for `(stream, index)` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)) ^ index)
}

pub fn graph_seed(master: u64, k: usize) -> u64 {
    derive_seed(master, GRAPH_STREAM, k as u64)
}

pub fn graph_id(cities: usize, k: usize) -> String {
    format!("n{cities}-g{k:02}")
}

/// The `count` random graphs of an experiment, keyed by id.
pub fn generate_graphs(cities: usize, count: usize, max_weight: u32, master: u64) -> Result<Vec<(String, TspGraph)>> {
    (0..count)
        .map(|k| {
            Ok((
                graph_id(cities, k),
                gen_random_graph(cities, max_weight, graph_seed(master, k))?,
            ))
        })
        .collect()
}

/// A graph with everything needed to score states on it.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: String,
    pub graph: TspGraph,
    pub lambda: f64,
    pub ham: Arc<IsingHamiltonian>,
    pub table: Arc<CostTable>,
    pub solution: Solution,
    pub true_set: Vec<usize>,
    pub classes: Arc<Vec<BitstringClass>>,
}

impl Instance {
    pub fn new(id: impl Into<String>, graph: TspGraph, lambda_factor: f64) -> Result<Self> {
        let lambda = lambda_factor * graph.max_weight();
        let ham = build_ising(&graph, lambda)?;
        let table = cost_table(&ham)?;
        let solution = brute_force_solve(&graph)?;
        let classes = classify_all(&graph, &solution)?;
        Ok(Instance {
            id: id.into(),
            true_set: solution.true_indices(),
            graph,
            lambda,
            ham: Arc::new(ham),
            table: Arc::new(table),
            solution,
            classes: Arc::new(classes),
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }
}

/// Quality of one output distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    pub expectation: f64,
    pub approximation_ratio: f64,
    pub true_percentage: f64,
    pub rank: usize,
    pub class_percentages: ClassPercentages,
}

pub fn state_metrics(instance: &Instance, probs: &[f64], expectation: f64) -> Result<StateMetrics> {
    Ok(StateMetrics {
        expectation,
        approximation_ratio: approximation_ratio(expectation, instance.solution.min_cost)?,
        true_percentage: true_percentage(probs, &instance.true_set)?,
        rank: rank(probs, &instance.true_set)?,
        class_percentages: class_percentages(probs, &instance.classes)?,
    })
}

/// A protocol step together with the metrics of its output state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub label: String,
    pub depth: usize,
    pub free_mask: Vec<bool>,
    pub cost: f64,
    pub params: Vec<f64>,
    pub evals: usize,
    pub accepted: bool,
    pub metrics: StateMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub final_cost: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub graph_id: String,
    pub n: usize,
    pub mixer: MixerKind,
    pub depth: usize,
    pub lambda: f64,
    pub optimal_cost: f64,
    /// Seed whose trace reached the lowest final cost.
    pub seed: u64,
    pub seed_results: Vec<SeedResult>,
    pub final_cost: f64,
    pub final_params: Vec<f64>,
    pub expectation: f64,
    pub approximation_ratio: f64,
    pub true_percentage: f64,
    pub rank: usize,
    pub class_percentages: ClassPercentages,
    pub top_states: Vec<StateProbability>,
    pub trace: Vec<StepSummary>,
    pub noise_p1: Option<f64>,
    pub shots: Option<usize>,
    pub optimizer: OptimizerConfig,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| w[1].cost <= w[0].cost)
    }

    pub fn step(&self, label: &str) -> Option<&StepSummary> {
        self.trace.iter().find(|s| s.label == label)
    }

    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.graph_id, self.mixer)
    }
}

/// Per-run settings shared by every graph and mixer of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub depth: usize,
    pub seeds: Vec<u64>,
    pub optimizer: OptimizerConfig,
    pub noise: Option<NoiseSpec>,
    pub shots: usize,
    pub top_k: usize,
}

enum Evaluator {
    Exact(ExactObjective),
    Noisy(NoisyObjective),
}

impl Evaluator {
    fn new(instance: &Instance, spec: AnsatzSpec, settings: &RunSettings, seed: u64) -> Result<Self> {
        Ok(match settings.noise {
            None => Evaluator::Exact(ExactObjective::new(spec, instance.table.clone())?),
            Some(noise) => Evaluator::Noisy(NoisyObjective::new(
                spec,
                instance.ham.clone(),
                instance.table.clone(),
                noise,
                settings.shots,
                derive_seed(seed, NOISE_STREAM, 0),
            )?),
        })
    }

    fn objective(&self) -> &dyn Objective {
        match self {
            Evaluator::Exact(o) => o,
            Evaluator::Noisy(o) => o,
        }
    }

    /// Output distribution and mean cost for the layers in `flat`.
    fn distribution(&self, flat: &[f64]) -> Result<(Vec<f64>, f64)> {
        match self {
            Evaluator::Exact(o) => {
                let state = o.evaluator().state(flat)?;
                let e = expectation_cost(&state, o.evaluator().table())?;
                Ok((state.probabilities(), e))
            }
            Evaluator::Noisy(o) => {
                let counts = o.counts(flat)?;
                let size = o.table().len();
                Ok((counts.probabilities(size), counts.mean_cost(o.table())))
            }
        }
    }
}

/// Runs the full protocol once per seed and reports the best seed.
///
/// Reported metrics come from exact final-state probabilities in noiseless
/// mode and from the trajectory histogram in noisy mode.
pub fn run_single(instance: &Instance, mixer: MixerKind, settings: &RunSettings) -> Result<RunReport> {
    if settings.seeds.is_empty() {
        return Err(Error::Config("need at least one seed".into()));
    }
    let start = Instant::now();
    let spec = AnsatzSpec::new(instance.n(), mixer, settings.depth)?;

    let traces: Vec<(u64, LLTrace)> = settings
        .seeds
        .par_iter()
        .map(|&seed| {
            let evaluator = Evaluator::new(instance, spec, settings, seed)?;
            let config = OptimizerConfig {
                seed,
                ..settings.optimizer.clone()
            };
            let trace = layerwise_learning(evaluator.objective(), settings.depth, &config)?;
            Ok((seed, trace))
        })
        .collect::<Result<_>>()?;

    let seed_results: Vec<SeedResult> = traces
        .iter()
        .map(|(seed, t)| SeedResult {
            seed: *seed,
            final_cost: t.final_cost().expect("non-empty trace"),
            evals: t.total_evals(),
        })
        .collect();
    let best = (0..traces.len())
        .min_by(|&a, &b| seed_results[a].final_cost.total_cmp(&seed_results[b].final_cost))
        .expect("non-empty");
    let (seed, trace) = &traces[best];
    if !trace.is_monotone() {
        return Err(Error::Optimizer(format!("non-monotone trace for seed {seed}")));
    }

    let evaluator = Evaluator::new(instance, spec, settings, *seed)?;
    let mut summaries = Vec::with_capacity(trace.steps.len());
    let mut final_probs = Vec::new();
    for step in &trace.steps {
        let (probs, expectation) = evaluator.distribution(&step.params[..2 * step.depth])?;
        summaries.push(StepSummary {
            label: step.label.clone(),
            depth: step.depth,
            free_mask: step.free_mask.clone(),
            cost: step.cost,
            params: step.params.clone(),
            evals: step.evals,
            accepted: step.accepted,
            metrics: state_metrics(instance, &probs, expectation)?,
        });
        final_probs = probs;
    }
    let last = summaries.last().expect("non-empty trace").clone();

    Ok(RunReport {
        graph_id: instance.id.clone(),
        n: instance.n(),
        mixer,
        depth: settings.depth,
        lambda: instance.lambda,
        optimal_cost: instance.solution.min_cost,
        seed: *seed,
        seed_results,
        final_cost: last.cost,
        final_params: last.params.clone(),
        expectation: last.metrics.expectation,
        approximation_ratio: last.metrics.approximation_ratio,
        true_percentage: last.metrics.true_percentage,
        rank: last.metrics.rank,
        class_percentages: last.metrics.class_percentages,
        top_states: top_states(
            &final_probs,
            settings.top_k,
            instance.n(),
            &instance.table,
            &instance.classes,
        ),
        trace: summaries,
        noise_p1: settings.noise.map(|n| n.p1),
        shots: settings.noise.map(|_| settings.shots),
        optimizer: settings.optimizer.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Mean and population standard deviation of one metric set across graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub mixer: MixerKind,
    /// Protocol step label, or `final`.
    pub step: String,
    pub graphs: usize,
    pub ar_mean: f64,
    pub ar_std: f64,
    pub true_mean: f64,
    pub true_std: f64,
    pub rank_mean: f64,
    pub rank_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub n: usize,
    pub depth: usize,
    pub graphs: usize,
    pub noise_p1: Option<f64>,
    pub rows: Vec<AggregateRow>,
}

impl AggregateReport {
    pub fn row(&self, mixer: MixerKind, step: &str) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.mixer == mixer && r.step == step)
    }

    pub const CSV_HEADER: &'static str =
        "n,depth,noise_p1,mixer,step,graphs,ar_mean,ar_std,true_mean,true_std,rank_mean,rank_std";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        let noise = self.noise_p1.map(|p| p.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                self.n,
                self.depth,
                noise,
                r.mixer,
                r.step,
                r.graphs,
                r.ar_mean,
                r.ar_std,
                r.true_mean,
                r.true_std,
                r.rank_mean,
                r.rank_std
            );
        }
        out
    }
}

/// Sorting before summing makes the statistics independent of graph order.
fn sorted_stats(mut values: Vec<f64>) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    mean_std(&values)
}

/// Aggregates runs per mixer and protocol step across graphs.
pub fn aggregate_runs(runs: &[RunReport]) -> Result<AggregateReport> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Config("no runs to aggregate".into()))?;
    if runs
        .iter()
        .any(|r| r.n != first.n || r.depth != first.depth || r.noise_p1 != first.noise_p1)
    {
        return Err(Error::Config("runs differ in city count, depth or noise level".into()));
    }
    let mut mixers: Vec<MixerKind> = runs.iter().map(|r| r.mixer).collect();
    mixers.sort();
    mixers.dedup();

    let mut rows = Vec::new();
    let mut graphs = 0;
    for mixer in mixers {
        let group: Vec<&RunReport> = runs.iter().filter(|r| r.mixer == mixer).collect();
        graphs = graphs.max(group.len());
        let mut labels: Vec<String> = group[0].trace.iter().map(|s| s.label.clone()).collect();
        labels.push("final".into());
        for label in labels {
            let metrics: Vec<&StateMetrics> = group
                .iter()
                .filter_map(|r| {
                    if label == "final" {
                        r.trace.last()
                    } else {
                        r.step(&label)
                    }
                })
                .map(|s| &s.metrics)
                .collect();
            let (ar_mean, ar_std) = sorted_stats(metrics.iter().map(|m| m.approximation_ratio).collect());
            let (true_mean, true_std) = sorted_stats(metrics.iter().map(|m| m.true_percentage).collect());
            let (rank_mean, rank_std) = sorted_stats(metrics.iter().map(|m| m.rank as f64).collect());
            rows.push(AggregateRow {
                mixer,
                step: label,
                graphs: metrics.len(),
                ar_mean,
                ar_std,
                true_mean,
                true_std,
                rank_mean,
                rank_std,
            });
        }
    }
    Ok(AggregateReport {
        n: first.n,
        depth: first.depth,
        graphs,
        noise_p1: first.noise_p1,
        rows,
    })
}

fn default_lambda_factor() -> f64 {
    2.0
}
fn default_evals_per_param() -> usize {
    OptimizerConfig::default().evals_per_param
}
fn default_initial_step() -> f64 {
    OptimizerConfig::default().initial_step
}
fn default_final_step() -> f64 {
    OptimizerConfig::default().final_step
}
fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

/// JSON experiment description.
///
/// Required: `cities`, `graphs`, `max_weight`, `mixers`, `depth`, `seeds`,
/// `master_seed`, `out_dir`; `noise_p1` and `shots` may be `null`. The rest
/// are optional with the defaults shown by [`ExperimentConfig::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub cities: usize,
    pub graphs: usize,
    pub max_weight: u32,
    #[serde(default = "default_lambda_factor")]
    pub lambda_factor: f64,
    pub mixers: Vec<MixerKind>,
    pub depth: usize,
    pub seeds: usize,
    #[serde(default)]
    pub noise_p1: Option<f64>,
    #[serde(default)]
    pub shots: Option<usize>,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    #[serde(default = "default_evals_per_param")]
    pub evals_per_param: usize,
    #[serde(default)]
    pub retrain_iterations: Option<usize>,
    #[serde(default = "default_initial_step")]
    pub initial_step: f64,
    #[serde(default = "default_final_step")]
    pub final_step: f64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

impl ExperimentConfig {
    pub fn new(cities: usize, graphs: usize, mixers: Vec<MixerKind>, depth: usize, seeds: usize) -> Self {
        ExperimentConfig {
            cities,
            graphs,
            max_weight: 20,
            lambda_factor: default_lambda_factor(),
            mixers,
            depth,
            seeds,
            noise_p1: None,
            shots: None,
            master_seed: 0,
            out_dir: PathBuf::from("results"),
            evals_per_param: default_evals_per_param(),
            retrain_iterations: None,
            initial_step: default_initial_step(),
            final_step: default_final_step(),
            top_k: default_top_k(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let max_cities = (1..)
            .take_while(|&n: &usize| (n - 1) * (n - 1) <= TABLE_MAX_QUBITS)
            .last()
            .unwrap_or(3);
        if !(3..=max_cities).contains(&self.cities) {
            return Err(Error::Config(format!(
                "cities must be in 3..={max_cities}, got {}",
                self.cities
            )));
        }
        for (name, v) in [("graphs", self.graphs), ("seeds", self.seeds), ("top_k", self.top_k)] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.max_weight == 0 {
            return Err(Error::Config("max_weight must be >= 1".into()));
        }
        if !(self.lambda_factor > 0.0) {
            return Err(Error::Config(format!(
                "lambda_factor must be positive, got {}",
                self.lambda_factor
            )));
        }
        if self.mixers.is_empty() {
            return Err(Error::Config("mixers must not be empty".into()));
        }
        if self.depth < 2 {
            return Err(Error::Config(format!("depth must be >= 2, got {}", self.depth)));
        }
        if let Some(p1) = self.noise_p1 {
            NoiseSpec::new(p1).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.shots == Some(0) {
            return Err(Error::Config("shots must be >= 1".into()));
        }
        self.optimizer_config().validate()
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            evals_per_param: self.evals_per_param,
            initial_step: self.initial_step,
            final_step: self.final_step,
            retrain_iterations: self.retrain_iterations,
            seed: 0,
        }
    }

    pub fn graph_seed(&self, k: usize) -> u64 {
        graph_seed(self.master_seed, k)
    }

    /// Optimization seeds of graph `k`; every mixer uses the same ones.
    pub fn run_seeds(&self, k: usize) -> Vec<u64> {
        (0..self.seeds)
            .map(|s| derive_seed(self.master_seed, RUN_STREAM, (k * 1_000_000 + s) as u64))
            .collect()
    }

    pub fn generate_graphs(&self) -> Result<Vec<(String, TspGraph)>> {
        generate_graphs(self.cities, self.graphs, self.max_weight, self.master_seed)
    }

    fn settings(&self, seeds: Vec<u64>) -> Result<RunSettings> {
        Ok(RunSettings {
            depth: self.depth,
            seeds,
            optimizer: self.optimizer_config(),
            noise: self.noise_p1.map(NoiseSpec::new).transpose()?,
            shots: self.shots.unwrap_or(DEFAULT_SHOTS),
            top_k: self.top_k,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub graphs: Vec<(String, TspGraph)>,
    pub runs: Vec<RunReport>,
    pub aggregate: AggregateReport,
}

/// Runs every (graph, mixer) pair of `graphs` without touching the filesystem.
pub fn execute_on(config: &ExperimentConfig, graphs: Vec<(String, TspGraph)>) -> Result<ExperimentOutput> {
    config.validate()?;
    if graphs.iter().any(|(_, g)| g.n() != config.cities) {
        return Err(Error::Config("graph size differs from configured city count".into()));
    }
    let instances: Vec<Instance> = graphs
        .iter()
        .map(|(id, g)| Instance::new(id.clone(), g.clone(), config.lambda_factor))
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, MixerKind)> = (0..instances.len())
        .flat_map(|k| config.mixers.iter().map(move |&m| (k, m)))
        .collect();
    let runs: Vec<RunReport> = tasks
        .par_iter()
        .map(|&(k, mixer)| run_single(&instances[k], mixer, &config.settings(config.run_seeds(k))?))
        .collect::<Result<_>>()?;
    let aggregate = aggregate_runs(&runs)?;
    Ok(ExperimentOutput {
        config: config.clone(),
        graphs,
        runs,
        aggregate,
    })
}

/// Generates the configured graphs and runs them.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    execute_on(config, config.generate_graphs()?)
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, contents: &str, errors: &mut Vec<Error>) {
    let result = path
        .parent()
        .map_or(Ok(()), fs::create_dir_all)
        .and_then(|_| fs::write(path, contents));
    if let Err(e) = result {
        errors.push(io_error(path, e));
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub const STEPS_CSV_HEADER: &str =
    "graph_id,mixer,step,depth,cost,expectation,approximation_ratio,true_percentage,rank,true,false,invalid,accepted,evals";

pub fn steps_csv(runs: &[RunReport]) -> String {
    let mut out = String::from(STEPS_CSV_HEADER);
    out.push('\n');
    for r in runs {
        for s in &r.trace {
            let m = &s.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.graph_id,
                r.mixer,
                s.label,
                s.depth,
                s.cost,
                m.expectation,
                m.approximation_ratio,
                m.true_percentage,
                m.rank,
                m.class_percentages.true_,
                m.class_percentages.false_,
                m.class_percentages.invalid,
                s.accepted,
                s.evals
            );
        }
    }
    out
}

/// Writes all artifacts under `dir`; failures are collected per file.
///
/// Layout: `config.json`, `graphs/<id>.json`, `runs/<id>_<mixer>.json`,
/// `aggregate.json`, `aggregate.csv`, `steps.csv`, `timings.csv`.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Vec<Error> {
    let mut errors = Vec::new();
    write_file(&dir.join("config.json"), &to_json(&output.config), &mut errors);
    for (id, g) in &output.graphs {
        write_file(&dir.join("graphs").join(format!("{id}.json")), &to_json(g), &mut errors);
    }
    for r in &output.runs {
        write_file(
            &dir.join("runs").join(format!("{}.json", r.file_stem())),
            &to_json(r),
            &mut errors,
        );
    }
    write_file(&dir.join("aggregate.json"), &to_json(&output.aggregate), &mut errors);
    write_file(&dir.join("aggregate.csv"), &output.aggregate.to_csv(), &mut errors);
    write_file(&dir.join("steps.csv"), &steps_csv(&output.runs), &mut errors);
    let mut timings = String::from("graph_id,mixer,wall_time_s\n");
    for r in &output.runs {
        let _ = writeln!(timings, "{},{},{:.3}", r.graph_id, r.mixer, r.wall_time_s);
    }
    write_file(&dir.join("timings.csv"), &timings, &mut errors);
    errors
}

/// [`execute`] followed by [`write_outputs`] into the configured directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(ExperimentOutput, Vec<Error>)> {
    let output = execute(config)?;
    let errors = write_outputs(&output, &config.out_dir);
    Ok((output, errors))
}

/// Loads every `runs/*.json` report under `dir`, sorted by file name.
pub fn load_run_reports(dir: &Path) -> Result<Vec<RunReport>> {
    let runs_dir = if dir.join("runs").is_dir() {
        dir.join("runs")
    } else {
        dir.to_path_buf()
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(&runs_dir)
        .map_err(|e| io_error(&runs_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            serde_json::from_str(&text).map_err(|e| io_error(p, e))
        })
        .collect()
}

/// Labels of the checkpoints reported per noise level.
pub fn noise_checkpoints(depth: usize, iterations: usize) -> Vec<String> {
    let mut labels = vec!["A2".to_string()];
    if depth > 2 {
        labels.push(format!("A{depth}"));
    }
    if iterations > 0 {
        labels.push(format!("B{iterations}"));
    }
    labels
}

#[derive(Debug, Clone)]
pub struct NoiseLevelOutput {
    pub p1: f64,
    pub output: ExperimentOutput,
    /// Aggregate rows restricted to the checkpoints.
    pub checkpoints: Vec<AggregateRow>,
}

pub const NOISE_CSV_HEADER: &str = "p1,p2,mixer,step,graphs,ar_mean,ar_std,true_mean,true_std,rank_mean,rank_std";

pub fn noise_sweep_csv(levels: &[NoiseLevelOutput]) -> String {
    let mut out = String::from(NOISE_CSV_HEADER);
    out.push('\n');
    for level in levels {
        for r in &level.checkpoints {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                level.p1,
                10.0 * level.p1,
                r.mixer,
                r.step,
                r.graphs,
                r.ar_mean,
                r.ar_std,
                r.true_mean,
                r.true_std,
                r.rank_mean,
                r.rank_std
            );
        }
    }
    out
}

/// Repeats the experiment at each single-qubit error rate on the same graphs.
///
/// A level of zero still runs the sampled trajectory objective, so it differs
/// from the exact noiseless experiment only by shot noise.
pub fn noise_sweep(config: &ExperimentConfig, levels: &[f64]) -> Result<Vec<NoiseLevelOutput>> {
    config.validate()?;
    if levels.is_empty() {
        return Err(Error::Config("no noise levels given".into()));
    }
    if let Some(m) = config.mixers.iter().find(|m| **m == MixerKind::X) {
        return Err(Error::Config(format!(
            "noise sweeps support the XY and RS mixers, got {m}"
        )));
    }
    let graphs = config.generate_graphs()?;
    let labels = noise_checkpoints(config.depth, config.optimizer_config().iterations(config.depth));
    levels
        .iter()
        .map(|&p1| {
            let level_config = ExperimentConfig {
                noise_p1: Some(p1),
                shots: Some(config.shots.unwrap_or(DEFAULT_SHOTS)),
                out_dir: config.out_dir.join(format!("p1_{p1:e}")),
                ..config.clone()
            };
            let output = execute_on(&level_config, graphs.clone())?;
            let checkpoints = output
                .aggregate
                .rows
                .iter()
                .filter(|r| labels.contains(&r.step))
                .cloned()
                .collect();
            Ok(NoiseLevelOutput {
                p1,
                output,
                checkpoints,
            })
        })
        .collect()
}

/// Writes each level's full outputs plus `noise_sweep.csv` and `noise_sweep.json`.
pub fn write_noise_sweep(levels: &[NoiseLevelOutput], dir: &Path) -> Vec<Error> {
    let mut errors = Vec::new();
    for level in levels {
        errors.extend(write_outputs(&level.output, &dir.join(format!("p1_{:e}", level.p1))));
    }
    let summary: Vec<(f64, &Vec<AggregateRow>)> = levels.iter().map(|l| (l.p1, &l.checkpoints)).collect();
    write_file(&dir.join("noise_sweep.json"), &to_json(&summary), &mut errors);
    write_file(&dir.join("noise_sweep.csv"), &noise_sweep_csv(levels), &mut errors);
    errors
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewRow {
    pub graph_id: String,
    pub mixer: MixerKind,
    pub skewness: f64,
    pub approximation_ratio: f64,
    pub true_percentage: f64,
}

pub const SKEW_CSV_HEADER: &str = "graph_id,mixer,skewness,approximation_ratio,true_percentage";

pub fn skew_csv(rows: &[SkewRow]) -> String {
    let mut out = String::from(SKEW_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.graph_id, r.mixer, r.skewness, r.approximation_ratio, r.true_percentage
        );
    }
    out
}

/// Writes the study's full outputs plus `skewness.csv` and `skewness.json`.
pub fn write_skewness_study(output: &ExperimentOutput, rows: &[SkewRow], dir: &Path) -> Vec<Error> {
    let mut errors = write_outputs(output, dir);
    write_file(&dir.join("skewness.json"), &to_json(&rows), &mut errors);
    write_file(&dir.join("skewness.csv"), &skew_csv(rows), &mut errors);
    errors
}

/// A graph whose edges all weigh `ceil(max_weight / 2)`.
pub fn uniform_graph(n: usize, max_weight: u32) -> Result<TspGraph> {
    let w = f64::from(max_weight.div_ceil(2).max(1));
    let edges: Vec<(usize, usize, f64)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, w))).collect();
    TspGraph::from_edges(n, &edges)
}

/// Final AR against edge-weight skewness for every (graph, mixer) pair.
///
/// `extra` graphs are appended to the generated ones.
pub fn skewness_study(
    config: &ExperimentConfig,
    extra: &[(String, TspGraph)],
) -> Result<(ExperimentOutput, Vec<SkewRow>)> {
    config.validate()?;
    let mut graphs = config.generate_graphs()?;
    graphs.extend(extra.iter().cloned());
    let output = execute_on(config, graphs)?;
    let rows = output
        .runs
        .iter()
        .map(|r| {
            let (_, g) = output
                .graphs
                .iter()
                .find(|(id, _)| *id == r.graph_id)
                .expect("run belongs to a graph");
            SkewRow {
                graph_id: r.graph_id.clone(),
                mixer: r.mixer,
                skewness: skewness(g).g,
                approximation_ratio: r.approximation_ratio,
                true_percentage: r.true_percentage,
            }
        })
        .collect();
    Ok((output, rows))
}
