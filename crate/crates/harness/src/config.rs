//! Experiment files.
//!
//! An experiment is one TOML file with two optional sections:
//!
//! ```toml
//! [system]          # scenario and algorithm constants; `seed` is the root seed
//! n = 128
//! m = 32
//! l = 64
//! seed = 1
//!
//! [experiment]
//! snr_grid_db = [5, 10, 15, 20]
//! estimators = ["hygamp", "msgamp-grbpp"]
//! trials = 100
//! emit_traces = true
//! nmse_average = "linear"   # or "db"
//! out_dir = "results"
//! ```
//!
//! Every key is optional. `snr_db` in `[system]` is ignored by `run`, which
//! sweeps `snr_grid_db` instead.

use std::path::{Path, PathBuf};

use msgamp::metrics::NmseAveraging;
use msgamp::{Estimator, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MSGAMP_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "msgamp-results";

/// A fully resolved Monte Carlo sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    #[serde(rename = "system")]
    pub base: SystemConfig,
    pub snr_grid_db: Vec<f64>,
    pub estimators: Vec<Estimator>,
    pub trials: usize,
    pub emit_traces: bool,
    pub nmse_average: NmseAveraging,
    /// Not part of the recorded configuration: results do not depend on it.
    #[serde(skip)]
    pub out_dir: PathBuf,
    /// Worker threads; 0 picks the available parallelism. Never changes the
    /// output.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            base: SystemConfig::default(),
            snr_grid_db: vec![5.0, 10.0, 15.0, 20.0],
            estimators: Estimator::ALL.to_vec(),
            trials: 100,
            emit_traces: true,
            nmse_average: NmseAveraging::Linear,
            out_dir: default_out_dir(),
            threads: 0,
        }
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExperimentSection {
    snr_grid_db: Option<Vec<f64>>,
    estimators: Option<Vec<Estimator>>,
    trials: Option<usize>,
    emit_traces: Option<bool>,
    nmse_average: Option<NmseAveraging>,
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileLayout {
    system: SystemConfig,
    experiment: ExperimentSection,
}

/// Command-line values that replace file values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub l: Option<usize>,
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub tol_eps: Option<f64>,
    pub activity_threshold: Option<f64>,
    pub rho_range: Option<[f64; 2]>,
    pub snr_grid_db: Option<Vec<f64>>,
    pub estimators: Option<Vec<Estimator>>,
    pub trials: Option<usize>,
    pub emit_traces: Option<bool>,
    pub nmse_average: Option<NmseAveraging>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, spec: &mut ExperimentSpec) {
        let b = &mut spec.base;
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(b.n, self.n);
        set!(b.m, self.m);
        set!(b.l, self.l);
        set!(b.seed, self.seed);
        set!(b.max_iters, self.max_iters);
        set!(b.tol_eps, self.tol_eps);
        set!(b.activity_threshold, self.activity_threshold);
        set!(b.rho_range, self.rho_range);
        set!(spec.snr_grid_db, self.snr_grid_db);
        set!(spec.estimators, self.estimators);
        set!(spec.trials, self.trials);
        set!(spec.emit_traces, self.emit_traces);
        set!(spec.nmse_average, self.nmse_average);
        set!(spec.out_dir, self.out_dir);
        set!(spec.threads, self.threads);
    }
}

/// 1-based line and column of byte `offset` in `text`.
fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, col)
}

/// Where `key` is assigned inside `[section]`, if it is.
fn locate_key(text: &str, section: &str, key: &str) -> Option<(usize, usize)> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_start();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.split(']').next().unwrap_or("").trim().to_string();
            continue;
        }
        if current != section {
            continue;
        }
        if let Some((lhs, _)) = line.split_once('=') {
            if lhs.trim().trim_matches('"') == key {
                return Some((i + 1, raw.len() - line.len() + 1));
            }
        }
    }
    None
}

/// Parses an experiment file. Values are not validated yet; see
/// [`ExperimentSpec::validate`].
pub fn parse(text: &str, path: &Path) -> Result<ExperimentSpec> {
    let layout: FileLayout = toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => {
                let (l, c) = position(text, span.start);
                (Some(l), Some(c))
            }
            None => (None, None),
        };
        HarnessError::Config {
            path: path.to_path_buf(),
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    let d = ExperimentSpec::default();
    let x = layout.experiment;
    Ok(ExperimentSpec {
        base: layout.system,
        snr_grid_db: x.snr_grid_db.unwrap_or(d.snr_grid_db),
        estimators: x.estimators.unwrap_or(d.estimators),
        trials: x.trials.unwrap_or(d.trials),
        emit_traces: x.emit_traces.unwrap_or(d.emit_traces),
        nmse_average: x.nmse_average.unwrap_or(d.nmse_average),
        out_dir: x.out_dir.unwrap_or(d.out_dir),
        threads: 0,
    })
}

/// Reads, overrides and validates an experiment file. Validation errors
/// point at the offending key when it appears in the file.
pub fn load(path: &Path, overrides: &Overrides) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
    let mut spec = parse(&text, path)?;
    overrides.apply(&mut spec);
    spec.validate().map_err(|(section, field, message)| {
        let pos = locate_key(&text, section, field);
        HarnessError::Config {
            path: path.to_path_buf(),
            line: pos.map(|p| p.0),
            column: pos.map(|p| p.1),
            message,
        }
    })?;
    Ok(spec)
}

impl ExperimentSpec {
    /// Checks every invariant. On failure returns the file section, the key
    /// and a message.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, &'static str, String)> {
        let exp = |field: &'static str, msg: &str| Err(("experiment", field, format!("`{field}`: {msg}")));
        if self.trials == 0 {
            return exp("trials", "must be >= 1");
        }
        if self.snr_grid_db.is_empty() {
            return exp("snr_grid_db", "must not be empty");
        }
        if self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return exp("snr_grid_db", "entries must be finite");
        }
        if self.estimators.is_empty() {
            return exp("estimators", "must not be empty");
        }
        for (i, e) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(e) {
                return exp("estimators", &format!("`{e}` listed twice"));
            }
        }
        match self.base.validate() {
            Err(msgamp::Error::Config { field, reason }) => {
                Err(("system", field, format!("`{field}`: {reason}")))
            }
            Err(other) => Err(("system", "", other.to_string())),
            Ok(()) => Ok(()),
        }
    }
}
