//! Campaign execution: expands the configured (method x seed) grid into
//! cells, runs them (optionally in parallel), and writes per-cell metric
//! CSVs, a cross-seed summary, and optional charts.
//!
//! Every cell's randomness is derived from the master seed, the method name,
//! and the seed's index and value, so adding a method or appending a seed
//! never perturbs existing results.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use actgen_core::blackbox::{evaluate, oracle_posterior, NoisyChannel, OraclePosterior};
use actgen_core::metrics::{
    batch_diversity, hits_from_logs, kl_to_oracle, precision_recall_performance, simple_regret,
};
use actgen_core::rng::Stream;
use actgen_core::seq::{LabeledDataset, Sequence, Token};
use actgen_core::strategies::{
    run_campaign, CampaignResult, Method, StrategyConfig, ThresholdSchedule,
};
use actgen_core::vi::ViConfig;

use crate::chart::line_chart;
use crate::config::RunConfig;
use crate::landscape::{build_problem, Problem};
use crate::report::{metrics_csv, summary_csv, trace_csv, write_atomic, MetricRow};

pub struct RunOutcome {
    pub cells_ok: usize,
    pub cells_failed: usize,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.cells_failed > 0 {
            2
        } else {
            0
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Landscape(crate::landscape::LandscapeError),
    Core(actgen_core::Error),
    Io(io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Landscape(e) => write!(f, "landscape: {e}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<actgen_core::Error> for RunError {
    fn from(e: actgen_core::Error) -> Self {
        RunError::Core(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

struct MetricContext {
    tau: Option<f64>,
    super_level_size: Option<usize>,
    y_star: f64,
    oracle: Option<OraclePosterior>,
}

/// Default schedule when the config leaves it out: a fixed threshold at the
/// landscape's 0.99 fitness quantile for tabulated problems, the annealed
/// quantile schedule otherwise.
fn default_schedule(problem: &Problem) -> ThresholdSchedule {
    match &problem.table {
        Some(table) => {
            let tau = table.fitness_quantile(0.99).unwrap_or(0.0);
            ThresholdSchedule::Fixed(tau)
        }
        None => ThresholdSchedule::annealed(0.5, 0.87).expect("valid constants"),
    }
}

fn metric_context(
    config: &RunConfig,
    problem: &Problem,
    schedule: &ThresholdSchedule,
) -> Result<MetricContext, RunError> {
    let tau = config.hit_threshold.or(match schedule {
        ThresholdSchedule::Fixed(t) => Some(*t),
        _ => None,
    });
    let super_level_size = match (&problem.table, tau) {
        (Some(table), Some(tau)) => Some(table.super_level_count(tau)),
        _ => None,
    };
    let oracle = if config.kl_oracle && config.noise_std > 0.0 {
        match (&problem.table, tau) {
            (Some(table), Some(tau)) => Some(oracle_posterior(
                table,
                &NoisyChannel::new(config.noise_std)?,
                tau,
                None,
            )?),
            _ => None,
        }
    } else {
        None
    };
    Ok(MetricContext { tau, super_level_size, y_star: problem.y_star, oracle })
}

/// Uniform random initial dataset, shared by every method at a given seed.
fn initial_dataset(
    config: &RunConfig,
    problem: &Problem,
    seed: u64,
) -> Result<LabeledDataset, RunError> {
    let mut rng = Stream::new(config.master_seed).derive(b"init").derive_u64(seed);
    let f = problem.fitness.as_ref();
    let mut batch = Vec::with_capacity(config.init_size);
    for _ in 0..config.init_size {
        let tokens: Vec<Token> =
            (0..f.seq_len()).map(|_| rng.below(f.vocab_size()) as Token).collect();
        batch.push(Sequence::new(tokens));
    }
    let channel = NoisyChannel::new(config.noise_std)?;
    let ys = evaluate(f, &channel, &batch, &mut rng)?;
    let mut ds = LabeledDataset::empty();
    for (x, y) in batch.into_iter().zip(ys) {
        ds.push(x, y)?;
    }
    Ok(ds)
}

fn strategy_config(
    config: &RunConfig,
    schedule: &ThresholdSchedule,
    method: Method,
    cell_seed: u64,
) -> StrategyConfig {
    let mut sc = StrategyConfig::new(method, schedule.clone());
    sc.backend = config.backend;
    sc.family = config.family;
    sc.batch_size = config.batch_size;
    sc.rounds = config.rounds;
    sc.seed = cell_seed;
    sc.prior = config.prior;
    sc.vi = ViConfig {
        samples_per_step: config.vi.samples,
        iterations: config.vi.iterations,
        learning_rate: config.vi.learning_rate,
        baseline_decay: config.vi.baseline_decay,
        closed_form_kl: true,
    };
    sc.cpe.arch = config.cpe.arch;
    sc.cpe.train.iterations = config.cpe.iterations;
    sc.cpe.train.learning_rate = config.cpe.learning_rate;
    sc.cpe.train.clamp = config.cpe.clamp;
    sc.gp.scale = config.gp.scale;
    sc.gp.lengthscale = config.gp.lengthscale;
    sc.gp.noise_var = config.gp.noise_var;
    sc.gp.noisy_pi = config.gp.noisy_pi;
    sc.gp.grid_search = config.gp.grid_search;
    sc.weighted_steps = config.weighted_steps;
    sc.record_trace = config.trace;
    sc
}

fn cell_seed(master: u64, method: Method, seed_index: usize, seed: u64) -> u64 {
    let mut stream = Stream::new(master)
        .derive(b"cell")
        .derive(method.name().as_bytes())
        .derive_u64(seed_index as u64)
        .derive_u64(seed);
    stream.next_u64()
}

/// Turn a finished campaign into output rows.
fn metric_rows(
    result: &CampaignResult,
    ctx: &MetricContext,
    batch_size: usize,
    rounds: usize,
) -> Result<Vec<MetricRow>, RunError> {
    let logs = &result.rounds;
    let prp = match (ctx.tau, ctx.super_level_size) {
        (Some(tau), Some(s)) if s > 0 => {
            Some(precision_recall_performance(logs, tau, s, batch_size, rounds)?)
        }
        _ => None,
    };
    let regret = simple_regret(logs, ctx.y_star);
    let hits = hits_from_logs(logs);
    let mut rows = Vec::with_capacity(logs.len());
    for (i, log) in logs.iter().enumerate() {
        let diversity = if log.batch.len() >= 2 { batch_diversity(&log.batch)? } else { 0.0 };
        let kl = match &ctx.oracle {
            Some(oracle) => Some(kl_to_oracle(&log.q_snapshot, oracle)?),
            None => None,
        };
        rows.push(MetricRow {
            round: log.round,
            precision: prp.as_ref().map(|v| v[i].0),
            recall: prp.as_ref().map(|v| v[i].1),
            performance: prp.as_ref().map(|v| v[i].2),
            regret: regret[i],
            diversity,
            hits: hits[i],
            kl_oracle: kl,
        });
    }
    Ok(rows)
}

struct CellOutput {
    method: Method,
    seed: u64,
    rows: Vec<MetricRow>,
    traces: Vec<(usize, String)>,
    snapshot: Option<String>,
}

pub fn run(config: &RunConfig, jobs: usize) -> Result<RunOutcome, RunError> {
    let problem = build_problem(&config.landscape).map_err(RunError::Landscape)?;
    let schedule = config.schedule.clone().unwrap_or_else(|| default_schedule(&problem));
    let ctx = metric_context(config, &problem, &schedule)?;
    fs::create_dir_all(&config.out_dir)?;

    struct Cell {
        method: Method,
        seed_index: usize,
        seed: u64,
    }
    let cells: Vec<Cell> = config
        .methods
        .iter()
        .flat_map(|&method| {
            config
                .seeds
                .iter()
                .enumerate()
                .map(move |(seed_index, &seed)| Cell { method, seed_index, seed })
        })
        .collect();

    let results: Mutex<Vec<Option<Result<CellOutput, String>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    let cursor = AtomicUsize::new(0);
    let workers = jobs.max(1).min(cells.len().max(1));

    let run_cell = |cell: &Cell| -> Result<CellOutput, String> {
        let initial =
            initial_dataset(config, &problem, cell.seed).map_err(|e| e.to_string())?;
        let seed = cell_seed(config.master_seed, cell.method, cell.seed_index, cell.seed);
        let sc = strategy_config(config, &schedule, cell.method, seed);
        let provenance = format!(
            "master={}/method={}/seed_index={}/seed={}",
            config.master_seed,
            cell.method.name(),
            cell.seed_index,
            cell.seed
        );
        let channel = NoisyChannel::new(config.noise_std).map_err(|e| e.to_string())?;
        let result =
            run_campaign(sc, initial, problem.fitness.as_ref(), channel, provenance)
                .map_err(|e| e.to_string())?;
        let rows = metric_rows(&result, &ctx, config.batch_size, config.rounds)
            .map_err(|e| e.to_string())?;
        let traces = if config.trace {
            result
                .rounds
                .iter()
                .map(|log| (log.round, trace_csv(&log.vi_trace)))
                .collect()
        } else {
            Vec::new()
        };
        let snapshot = config.snapshots.then(|| result.final_q.to_snapshot());
        Ok(CellOutput { method: cell.method, seed: cell.seed, rows, traces, snapshot })
    };

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let out = run_cell(&cells[i]);
                results.lock().expect("poisoned results").as_mut_slice()[i] = Some(out);
            });
        }
    });

    let results = results.into_inner().expect("poisoned results");
    let mut failures: Vec<String> = Vec::new();
    let mut per_method: Vec<(String, Vec<Vec<MetricRow>>)> = config
        .methods
        .iter()
        .map(|m| (m.name().to_string(), Vec::new()))
        .collect();
    let mut cells_ok = 0usize;
    for (cell, outcome) in cells.iter().zip(results) {
        let outcome = outcome.expect("all cells visited");
        match outcome {
            Ok(output) => {
                let file = config
                    .out_dir
                    .join(format!("{}_seed{}.csv", output.method.name(), output.seed));
                write_atomic(&file, &metrics_csv(&output.rows))?;
                for (round, text) in &output.traces {
                    let file = config.out_dir.join(format!(
                        "{}_seed{}_round{round}_trace.csv",
                        output.method.name(),
                        output.seed
                    ));
                    write_atomic(&file, text)?;
                }
                if let Some(snapshot) = &output.snapshot {
                    let file = config.out_dir.join(format!(
                        "{}_seed{}_final_q.txt",
                        output.method.name(),
                        output.seed
                    ));
                    write_atomic(&file, snapshot)?;
                }
                for (name, rows) in per_method.iter_mut() {
                    if name == output.method.name() {
                        rows.push(output.rows.clone());
                    }
                }
                cells_ok += 1;
            }
            Err(message) => {
                failures.push(format!(
                    "method={} seed={}: {message}",
                    cell.method.name(),
                    cell.seed
                ));
            }
        }
    }

    write_atomic(&config.out_dir.join("summary.csv"), &summary_csv(&per_method))?;

    if config.charts {
        write_charts(&config.out_dir, &per_method)?;
    }

    if !failures.is_empty() {
        let mut log = String::new();
        for f in &failures {
            let _ = writeln!(log, "{f}");
        }
        write_atomic(&config.out_dir.join("errors.log"), &log)?;
    }

    Ok(RunOutcome {
        cells_ok,
        cells_failed: failures.len(),
        out_dir: config.out_dir.clone(),
    })
}

fn write_charts(
    out_dir: &Path,
    per_method: &[(String, Vec<Vec<MetricRow>>)],
) -> io::Result<()> {
    let series_of = |extract: &dyn Fn(&MetricRow) -> Option<f64>| -> Vec<(String, Vec<f64>)> {
        per_method
            .iter()
            .filter(|(_, cells)| !cells.is_empty())
            .map(|(name, cells)| {
                let rounds = cells.iter().map(|c| c.len()).min().unwrap_or(0);
                let mut means = Vec::with_capacity(rounds);
                for r in 0..rounds {
                    let vals: Vec<f64> =
                        cells.iter().filter_map(|c| extract(&c[r])).collect();
                    if vals.len() == cells.len() {
                        means.push(vals.iter().sum::<f64>() / vals.len() as f64);
                    }
                }
                (name.clone(), means)
            })
            .filter(|(_, ys)| !ys.is_empty())
            .collect()
    };
    let recall = series_of(&|r| r.recall);
    if !recall.is_empty() {
        write_atomic(&out_dir.join("chart_recall.svg"), &line_chart("recall", &recall))?;
    }
    let regret = series_of(&|r| Some(r.regret));
    if !regret.is_empty() {
        write_atomic(&out_dir.join("chart_regret.svg"), &line_chart("simple regret", &regret))?;
    }
    Ok(())
}
