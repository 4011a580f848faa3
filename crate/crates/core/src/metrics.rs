//! Activity error rate, NMSE and Monte Carlo aggregation.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::{Real, C};

/// NMSE reported for exact recovery instead of `-inf`.
pub const NMSE_FLOOR_DB: f64 = -120.0;

/// Per-trial summary of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub aer: f64,
    pub nmse_active_db: Option<f64>,
    pub nmse_all_db: Option<f64>,
    pub iterations: usize,
    pub msg_updates: u64,
    pub tol_trace: Vec<(usize, f64)>,
    pub nmse_trace: Vec<(usize, f64)>,
}

/// `(false alarms + missed detections) / N`.
pub fn activity_error_rate(truth: &[bool], estimate: &[bool]) -> f64 {
    assert_eq!(truth.len(), estimate.len(), "activity vectors differ in length");
    if truth.is_empty() {
        return 0.0;
    }
    let errors = truth.iter().zip(estimate).filter(|(a, b)| a != b).count();
    errors as f64 / truth.len() as f64
}

pub fn to_db(ratio: f64) -> f64 {
    if ratio <= 0.0 {
        NMSE_FLOOR_DB
    } else {
        (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
    }
}

fn error_ratio<T: Real>(
    truth: &Array2<C<T>>,
    estimate: &Array2<C<T>>,
    keep: impl Fn(usize) -> bool,
) -> Option<f64> {
    assert_eq!(truth.dim(), estimate.dim(), "channel matrices differ in shape");
    let mut err = 0.0;
    let mut energy = 0.0;
    for (n, (t, e)) in truth.rows().into_iter().zip(estimate.rows()).enumerate() {
        if !keep(n) {
            continue;
        }
        for (a, b) in t.iter().zip(e.iter()) {
            err += (*b - *a).norm_sqr().as_f64();
            energy += a.norm_sqr().as_f64();
        }
    }
    (energy > 0.0).then(|| err / energy)
}

/// Linear NMSE over the truly active rows; `None` without active devices.
pub fn nmse_active<T: Real>(truth: &Array2<C<T>>, estimate: &Array2<C<T>>, xi: &[bool]) -> Option<f64> {
    error_ratio(truth, estimate, |n| xi[n])
}

/// Linear NMSE over all rows; `None` when the truth is all zero.
pub fn nmse_all<T: Real>(truth: &Array2<C<T>>, estimate: &Array2<C<T>>) -> Option<f64> {
    error_ratio(truth, estimate, |_| true)
}

/// `10 log₁₀(‖Ĥ_A − H_A‖²_F / ‖H_A‖²_F)` over the truly active rows `A`.
pub fn nmse_active_db<T: Real>(truth: &Array2<C<T>>, estimate: &Array2<C<T>>, xi: &[bool]) -> Option<f64> {
    nmse_active(truth, estimate, xi).map(to_db)
}

pub fn nmse_all_db<T: Real>(truth: &Array2<C<T>>, estimate: &Array2<C<T>>) -> Option<f64> {
    nmse_all(truth, estimate).map(to_db)
}

/// How per-trial NMSE values are averaged across trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NmseAveraging {
    /// Average the linear error ratios, then convert to dB.
    #[default]
    Linear,
    /// Average the per-trial dB values.
    Db,
}

/// Mean with a percentile-bootstrap 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl MeanCi {
    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            mean: f(self.mean),
            lo: f(self.lo),
            hi: f(self.hi),
            count: self.count,
        }
    }
}

pub const BOOTSTRAP_RESAMPLES: usize = 2000;

/// Sample mean and 95% percentile-bootstrap interval. The resampling RNG is
/// seeded from `seed`, so the result is reproducible. `None` on empty input.
pub fn bootstrap_mean(values: &[f64], seed: u64) -> Option<MeanCi> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(|a, b| a.total_cmp(b));
    let pick = |q: f64| means[((q * (BOOTSTRAP_RESAMPLES - 1) as f64).round() as usize).min(BOOTSTRAP_RESAMPLES - 1)];
    Some(MeanCi {
        mean,
        lo: pick(0.025),
        hi: pick(0.975),
        count: n,
    })
}

/// Aggregates linear NMSE ratios into dB under the chosen averaging rule.
pub fn aggregate_nmse_db(linear: &[f64], averaging: NmseAveraging, seed: u64) -> Option<MeanCi> {
    match averaging {
        NmseAveraging::Linear => bootstrap_mean(linear, seed).map(|ci| ci.map(to_db)),
        NmseAveraging::Db => {
            let db: Vec<f64> = linear.iter().map(|&v| to_db(v)).collect();
            bootstrap_mean(&db, seed)
        }
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { (v[mid - 1] + v[mid]) / 2.0 } else { v[mid] })
}
