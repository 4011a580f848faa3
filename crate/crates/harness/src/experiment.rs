//! Seeded Monte Carlo sweeps over SNR × estimator.
//!
//! Every `(snr, trial)` pair gets one scenario, drawn from a seed derived
//! from the root seed, and every estimator runs on that same scenario.
//! Pairs run on worker threads; results are placed by key, so the thread
//! count never changes the output.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use msgamp::metrics::{self, aggregate_nmse_db, bootstrap_mean, median, MeanCi, NmseAveraging};
use msgamp::scenario::synthesize;
use msgamp::{Estimator, Scenario64, SystemConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentSpec;
use crate::error::{HarnessError, Result};

/// Version of the CSV/JSON layout written by [`write_results`].
pub const SCHEMA_VERSION: u32 = 1;

pub const TRIALS_FILE: &str = "trials.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const STOPPING_FILE: &str = "stopping.csv";
pub const METADATA_FILE: &str = "metadata.json";

fn hash_u64(tag: &str, parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub const TRIAL_SEED_RULE: &str =
    "first 8 bytes (LE) of SHA-256(\"msgamp/trial\" || len||root_seed u64 LE || len||snr_index u64 LE || len||trial u64 LE)";

/// Scenario seed of trial `trial` at grid position `snr_index`.
pub fn trial_seed(root: u64, snr_index: usize, trial: usize) -> u64 {
    hash_u64(
        "msgamp/trial",
        &[&root.to_le_bytes(), &(snr_index as u64).to_le_bytes(), &(trial as u64).to_le_bytes()],
    )
}

fn bootstrap_seed(root: u64, estimator: Estimator, snr_index: usize, metric: &str) -> u64 {
    hash_u64(
        "msgamp/bootstrap",
        &[&root.to_le_bytes(), estimator.name().as_bytes(), &(snr_index as u64).to_le_bytes(), metric.as_bytes()],
    )
}

/// The scenario configuration of one `(snr, trial)` pair.
pub fn trial_config(spec: &ExperimentSpec, snr_index: usize, trial: usize) -> SystemConfig {
    SystemConfig {
        snr_db: spec.snr_grid_db[snr_index],
        seed: trial_seed(spec.base.seed, snr_index, trial),
        ..spec.base.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

/// One raw result. Linear NMSE ratios are kept next to the dB values so the
/// aggregates can be recomputed from this table alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub estimator: Estimator,
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub scenario_hash: String,
    pub status: Status,
    pub aer: Option<f64>,
    pub nmse_active_db: Option<f64>,
    pub nmse_all_db: Option<f64>,
    pub nmse_active: Option<f64>,
    pub nmse_all: Option<f64>,
    pub iterations: Option<usize>,
    pub msg_updates: Option<u64>,
    pub converged: Option<bool>,
    pub regularized: Option<bool>,
    pub detected: Option<usize>,
    pub true_active: usize,
    pub error: String,
    /// `nmse_all_db` after each iteration.
    #[serde(skip)]
    pub trace: Vec<Option<f64>>,
}

impl TrialRow {
    fn pending(estimator: Estimator, snr_db: f64, trial: usize, seed: u64, scenario_hash: String) -> Self {
        Self {
            estimator,
            snr_db,
            trial,
            seed,
            scenario_hash,
            status: Status::Ok,
            aer: None,
            nmse_active_db: None,
            nmse_all_db: None,
            nmse_active: None,
            nmse_all: None,
            iterations: None,
            msg_updates: None,
            converged: None,
            regularized: None,
            detected: None,
            true_active: 0,
            error: String::new(),
            trace: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub estimator: Estimator,
    pub snr_db: f64,
    pub trials: usize,
    pub failed: usize,
    pub aer_mean: Option<f64>,
    pub aer_lo: Option<f64>,
    pub aer_hi: Option<f64>,
    pub nmse_active_db: Option<f64>,
    pub nmse_active_lo: Option<f64>,
    pub nmse_active_hi: Option<f64>,
    pub nmse_all_db: Option<f64>,
    pub nmse_all_lo: Option<f64>,
    pub nmse_all_hi: Option<f64>,
    pub iterations_mean: Option<f64>,
    pub msg_updates_mean: Option<f64>,
}

/// Mean `nmse_all_db` across trials at one iteration; runs that stopped
/// earlier contribute their final value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub estimator: Estimator,
    pub snr_db: f64,
    pub iter: usize,
    pub nmse_all_db: Option<f64>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingRow {
    pub estimator: Estimator,
    pub snr_db: f64,
    pub trials: usize,
    pub median_iterations: Option<f64>,
    pub mean_iterations: Option<f64>,
    pub min_iterations: Option<usize>,
    pub max_iterations: Option<usize>,
    pub converged_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// Ordered by SNR index, then trial, then the spec's estimator order.
    pub rows: Vec<TrialRow>,
    /// Ordered by estimator (spec order), then SNR.
    pub aggregates: Vec<AggregateRow>,
    pub convergence: Vec<ConvergenceRow>,
    pub stopping: Vec<StoppingRow>,
}

impl ResultTable {
    pub fn aggregate(&self, estimator: Estimator, snr_db: f64) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.estimator == estimator && a.snr_db == snr_db)
    }

    pub fn stopping(&self, estimator: Estimator, snr_db: f64) -> Option<&StoppingRow> {
        self.stopping.iter().find(|a| a.estimator == estimator && a.snr_db == snr_db)
    }
}

/// Runs every estimator on one scenario.
pub fn run_trial(
    scenario: &Scenario64,
    config: &SystemConfig,
    estimators: &[Estimator],
    snr_db: f64,
    trial: usize,
) -> Vec<TrialRow> {
    let hash = scenario.fingerprint();
    estimators
        .iter()
        .map(|&est| {
            let mut row = TrialRow::pending(est, snr_db, trial, config.seed, hash.clone());
            row.true_active = scenario.active_count();
            match est.run(scenario, config) {
                Ok(r) => {
                    row.aer = Some(metrics::activity_error_rate(&scenario.xi, &r.active_hat));
                    row.nmse_active = metrics::nmse_active(&scenario.h, &r.h_hat, &scenario.xi);
                    row.nmse_all = metrics::nmse_all(&scenario.h, &r.h_hat);
                    row.nmse_active_db = row.nmse_active.map(metrics::to_db);
                    row.nmse_all_db = row.nmse_all.map(metrics::to_db);
                    row.iterations = Some(r.iterations);
                    row.msg_updates = Some(r.msg_updates);
                    row.converged = Some(r.converged);
                    row.regularized = Some(r.regularized);
                    row.detected = Some(r.active_hat.iter().filter(|&&a| a).count());
                    row.trace = r.trace.iter().map(|t| t.nmse_all_db).collect();
                }
                Err(e) => {
                    row.status = Status::Error;
                    row.error = e.to_string();
                }
            }
            row
        })
        .collect()
}

fn run_pair(spec: &ExperimentSpec, snr_index: usize, trial: usize) -> Vec<TrialRow> {
    let cfg = trial_config(spec, snr_index, trial);
    let snr = spec.snr_grid_db[snr_index];
    match synthesize::<f64>(&cfg) {
        Ok(scenario) => run_trial(&scenario, &cfg, &spec.estimators, snr, trial),
        // cannot happen for a validated spec; still recorded, never dropped
        Err(e) => spec
            .estimators
            .iter()
            .map(|&est| TrialRow {
                status: Status::Error,
                error: e.to_string(),
                ..TrialRow::pending(est, snr, trial, cfg.seed, String::new())
            })
            .collect(),
    }
}

fn worker_count(spec: &ExperimentSpec, jobs: usize) -> usize {
    let auto = std::thread::available_parallelism().map_or(1, |n| n.get());
    let t = if spec.threads == 0 { auto } else { spec.threads };
    t.clamp(1, jobs.max(1))
}

/// Runs the sweep. `progress` is called after each finished `(snr, trial)`
/// pair with the number done so far and the total.
pub fn run_experiment_with(spec: &ExperimentSpec, progress: impl Fn(usize, usize) + Sync) -> Result<ResultTable> {
    spec.validate().map_err(|(_, _, message)| HarnessError::Usage(message))?;
    let jobs: Vec<(usize, usize)> = (0..spec.snr_grid_db.len())
        .flat_map(|s| (0..spec.trials).map(move |t| (s, t)))
        .collect();
    let slots: Vec<Mutex<Option<Vec<TrialRow>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..worker_count(spec, jobs.len()) {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(s, t)) = jobs.get(j) else { break };
                let rows = run_pair(spec, s, t);
                *slots[j].lock().expect("slot") = Some(rows);
                progress(done.fetch_add(1, Ordering::Relaxed) + 1, jobs.len());
            });
        }
    });
    let rows: Vec<TrialRow> = slots
        .into_iter()
        .flat_map(|m| m.into_inner().expect("slot").expect("every job ran"))
        .collect();
    Ok(summarize(spec, rows))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    run_experiment_with(spec, |_, _| {})
}

fn ci_parts(ci: Option<MeanCi>) -> (Option<f64>, Option<f64>, Option<f64>) {
    ci.map_or((None, None, None), |c| (Some(c.mean), Some(c.lo), Some(c.hi)))
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Recomputes aggregates, convergence curves and stopping statistics from
/// raw rows.
pub fn summarize(spec: &ExperimentSpec, rows: Vec<TrialRow>) -> ResultTable {
    let root = spec.base.seed;
    let mut aggregates = Vec::new();
    let mut convergence = Vec::new();
    let mut stopping = Vec::new();
    for &est in &spec.estimators {
        for (si, &snr) in spec.snr_grid_db.iter().enumerate() {
            let group: Vec<&TrialRow> = rows.iter().filter(|r| r.estimator == est && r.snr_db == snr).collect();
            let ok: Vec<&TrialRow> = group.iter().copied().filter(|r| r.status == Status::Ok).collect();
            let collect = |f: &dyn Fn(&TrialRow) -> Option<f64>| ok.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
            let aer = collect(&|r| r.aer);
            let nmse_active = collect(&|r| r.nmse_active);
            let nmse_all = collect(&|r| r.nmse_all);
            let iters = collect(&|r| r.iterations.map(|v| v as f64));
            let updates = collect(&|r| r.msg_updates.map(|v| v as f64));

            let (aer_mean, aer_lo, aer_hi) = ci_parts(bootstrap_mean(&aer, bootstrap_seed(root, est, si, "aer")));
            let (na, na_lo, na_hi) = ci_parts(aggregate_nmse_db(
                &nmse_active,
                spec.nmse_average,
                bootstrap_seed(root, est, si, "nmse_active"),
            ));
            let (nl, nl_lo, nl_hi) =
                ci_parts(aggregate_nmse_db(&nmse_all, spec.nmse_average, bootstrap_seed(root, est, si, "nmse_all")));
            aggregates.push(AggregateRow {
                estimator: est,
                snr_db: snr,
                trials: group.len(),
                failed: group.len() - ok.len(),
                aer_mean,
                aer_lo,
                aer_hi,
                nmse_active_db: na,
                nmse_active_lo: na_lo,
                nmse_active_hi: na_hi,
                nmse_all_db: nl,
                nmse_all_lo: nl_lo,
                nmse_all_hi: nl_hi,
                iterations_mean: mean(&iters),
                msg_updates_mean: mean(&updates),
            });

            if !est.is_iterative() {
                continue;
            }
            let converged = collect(&|r| r.converged.map(|c| if c { 1.0 } else { 0.0 }));
            stopping.push(StoppingRow {
                estimator: est,
                snr_db: snr,
                trials: ok.len(),
                median_iterations: median(&iters),
                mean_iterations: mean(&iters),
                min_iterations: ok.iter().filter_map(|r| r.iterations).min(),
                max_iterations: ok.iter().filter_map(|r| r.iterations).max(),
                converged_fraction: mean(&converged),
            });
            if spec.emit_traces {
                for it in 0..spec.base.max_iters {
                    let values: Vec<f64> = ok
                        .iter()
                        .filter_map(|r| padded(&r.trace, it))
                        .map(|db| match spec.nmse_average {
                            NmseAveraging::Linear => 10f64.powf(db / 10.0),
                            NmseAveraging::Db => db,
                        })
                        .collect();
                    let avg = mean(&values).map(|v| match spec.nmse_average {
                        NmseAveraging::Linear => metrics::to_db(v),
                        NmseAveraging::Db => v,
                    });
                    convergence.push(ConvergenceRow {
                        estimator: est,
                        snr_db: snr,
                        iter: it + 1,
                        nmse_all_db: avg,
                        trials: values.len(),
                    });
                }
            }
        }
    }
    ResultTable {
        rows,
        aggregates,
        convergence,
        stopping,
    }
}

/// Value at iteration index `it`, holding the last value after the run
/// stopped.
fn padded(trace: &[Option<f64>], it: usize) -> Option<f64> {
    if trace.is_empty() {
        return None;
    }
    trace[it.min(trace.len() - 1)]
}

#[derive(Serialize)]
struct FileSchema {
    name: &'static str,
    columns: Vec<String>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    schema_version: u32,
    generator: &'static str,
    harness_version: &'static str,
    core_version: &'static str,
    root_seed: u64,
    trial_seed_rule: &'static str,
    nmse_averaging: NmseAveraging,
    nmse_floor_db: f64,
    bootstrap_resamples: usize,
    bootstrap_confidence: f64,
    config: &'a ExperimentSpec,
    files: Vec<FileSchema>,
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(HarnessError::io(path))
}

/// Column names as the CSV writer emits them for `R`.
fn header_of<R: Serialize>(sample: &R) -> Vec<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(sample).expect("row serializes");
    let bytes = w.into_inner().expect("in-memory writer");
    let text = String::from_utf8(bytes).expect("utf-8");
    text.lines().next().unwrap_or("").split(',').map(str::to_string).collect()
}

fn write_table<R: Serialize>(dir: &Path, name: &'static str, rows: &[R], out: &mut Vec<PathBuf>, files: &mut Vec<FileSchema>) -> Result<()> {
    let p = dir.join(name);
    write_csv(&p, rows)?;
    out.push(p);
    files.push(FileSchema { name, columns: rows.first().map(header_of).unwrap_or_default() });
    Ok(())
}

/// Writes the result files into `dir` and returns their paths.
pub fn write_results(spec: &ExperimentSpec, table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    let mut written = Vec::new();
    let mut files = Vec::new();
    write_table(dir, TRIALS_FILE, &table.rows, &mut written, &mut files)?;
    write_table(dir, AGGREGATE_FILE, &table.aggregates, &mut written, &mut files)?;
    write_table(dir, STOPPING_FILE, &table.stopping, &mut written, &mut files)?;
    if spec.emit_traces {
        write_table(dir, CONVERGENCE_FILE, &table.convergence, &mut written, &mut files)?;
    }

    let meta = Metadata {
        schema_version: SCHEMA_VERSION,
        generator: "msgamp-harness",
        harness_version: env!("CARGO_PKG_VERSION"),
        core_version: msgamp::VERSION,
        root_seed: spec.base.seed,
        trial_seed_rule: TRIAL_SEED_RULE,
        nmse_averaging: spec.nmse_average,
        nmse_floor_db: metrics::NMSE_FLOOR_DB,
        bootstrap_resamples: metrics::BOOTSTRAP_RESAMPLES,
        bootstrap_confidence: 0.95,
        config: spec,
        files,
    };
    let p = dir.join(METADATA_FILE);
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    fs::write(&p, text).map_err(HarnessError::io(&p))?;
    written.push(p);
    Ok(written)
}
