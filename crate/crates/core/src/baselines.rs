//! Reference estimators and the estimator registry.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::denoisers::{logistic, slab_llr, VARIANCE_FLOOR};
use crate::engine::{Engine, EngineOptions, IterationRecord};
use crate::error::Result;
use crate::linalg::{factor_regularized, herm_mul, mul};
use crate::scalar::{Real, C};
use crate::scenario::{Scenario, SystemConfig};
use crate::scheduling::Policy;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult<T: Real> {
    pub h_hat: Array2<C<T>>,
    pub active_hat: Vec<bool>,
    /// 0 for the closed-form estimators.
    pub iterations: usize,
    pub msg_updates: u64,
    pub converged: bool,
    /// A ridge had to be added to the linear system.
    pub regularized: bool,
    pub trace: Vec<IterationRecord>,
}

/// Linear MMSE per antenna under the Gaussian relaxation `h ~ CN(0, diag(ρβ))`:
/// `ĥₘ = C Φᴴ (Φ C Φᴴ + σ² I)⁻¹ yₘ`.
///
/// Activity: each device's estimate is de-biased by its own LMMSE gain
/// `wₙ = [C Φᴴ Σ⁻¹ Φ]ₙₙ`, which leaves `ĥₙ/wₙ = hₙ + CN(0, τₙ)` with
/// `τₙ = ρₙβₙ(1 − wₙ)/wₙ` under the same relaxation. The antenna-aggregated
/// activity LLR of that observation is then thresholded like the message
/// passing estimators.
pub fn mmse_estimate<T: Real>(scenario: &Scenario<T>, activity_threshold: f64) -> EstimatorResult<T> {
    let (l, n) = scenario.phi.dim();
    let phi = &scenario.phi;
    let sigma = scenario.sigma_w2;
    let cdiag: Vec<T> = scenario
        .rho
        .iter()
        .zip(scenario.beta.iter())
        .map(|(&r, &b)| (r * b).max(T::of(VARIANCE_FLOOR)))
        .collect();

    // W = C Φᴴ Σ⁻¹, applied to Y and to Φ
    let (h_hat, w_phi, regularized) = if n <= l {
        // (ΦᴴΦ + σ² C⁻¹) X = Φᴴ [Y Φ]
        let mut g = herm_mul(phi, phi);
        for i in 0..n {
            g[[i, i]] = g[[i, i]] + C::new(sigma / cdiag[i], T::zero());
        }
        let (chol, reg) = factor_regularized(&g);
        (chol.solve(&herm_mul(phi, &scenario.y)), chol.solve(&herm_mul(phi, phi)), reg)
    } else {
        // Σ = Φ C Φᴴ + σ² I, solve Σ X = [Y Φ]
        let mut sc = phi.clone();
        for (mut col, &cv) in sc.columns_mut().into_iter().zip(&cdiag) {
            col.mapv_inplace(|z| z * cv);
        }
        let mut big = Array2::from_elem((l, l), C::new(T::zero(), T::zero()));
        for i in 0..l {
            for j in 0..=i {
                let mut s = C::new(T::zero(), T::zero());
                for k in 0..n {
                    s = s + sc[[i, k]] * phi[[j, k]].conj();
                }
                big[[i, j]] = s;
                big[[j, i]] = s.conj();
            }
            big[[i, i]] = big[[i, i]] + C::new(sigma, T::zero());
        }
        let (chol, reg) = factor_regularized(&big);
        let xy = chol.solve(&scenario.y);
        let xp = chol.solve(phi);
        let scale = |mut a: Array2<C<T>>| {
            for (mut row, &cv) in a.rows_mut().into_iter().zip(&cdiag) {
                row.mapv_inplace(|z| z * cv);
            }
            a
        };
        (scale(herm_mul(phi, &xy)), scale(herm_mul(phi, &xp)), reg)
    };

    let active_hat = (0..n)
        .map(|dev| {
            let w = w_phi[[dev, dev]].re.max(T::of(VARIANCE_FLOOR)).min(T::one());
            let tau = (cdiag[dev] * (T::one() - w) / w).max(T::of(VARIANCE_FLOOR));
            let beta = scenario.beta[dev];
            let rho = scenario.rho[dev];
            let mut llr = (rho / (T::one() - rho)).ln();
            for z in h_hat.row(dev) {
                llr = llr + slab_llr(*z / w, tau, beta);
            }
            logistic(llr) > T::of(activity_threshold)
        })
        .collect();

    EstimatorResult {
        h_hat,
        active_hat,
        iterations: 0,
        msg_updates: 0,
        converged: true,
        regularized,
        trace: Vec::new(),
    }
}

/// LMMSE restricted to the true active set `A`:
/// `ĥ_A = (Φ_Aᴴ Φ_A + σ² B_A⁻¹)⁻¹ Φ_Aᴴ Y`, inactive rows zero.
pub fn oracle_mmse_estimate<T: Real>(scenario: &Scenario<T>) -> EstimatorResult<T> {
    let (l, n) = scenario.phi.dim();
    let m = scenario.m();
    let active: Vec<usize> = (0..n).filter(|&i| scenario.xi[i]).collect();
    let mut h_hat = Array2::from_elem((n, m), C::new(T::zero(), T::zero()));
    let mut regularized = false;
    if !active.is_empty() {
        let phi_a = Array2::from_shape_fn((l, active.len()), |(r, k)| scenario.phi[[r, active[k]]]);
        let mut g = herm_mul(&phi_a, &phi_a);
        for (k, &dev) in active.iter().enumerate() {
            g[[k, k]] = g[[k, k]] + C::new(scenario.sigma_w2 / scenario.beta[dev], T::zero());
        }
        let (chol, reg) = factor_regularized(&g);
        regularized = reg;
        let est = chol.solve(&herm_mul(&phi_a, &scenario.y));
        for (k, &dev) in active.iter().enumerate() {
            h_hat.row_mut(dev).assign(&est.row(k));
        }
    }
    EstimatorResult {
        h_hat,
        active_hat: scenario.xi.clone(),
        iterations: 0,
        msg_updates: 0,
        converged: true,
        regularized,
        trace: Vec::new(),
    }
}

fn from_engine<T: Real>(scenario: &Scenario<T>, options: EngineOptions) -> Result<EstimatorResult<T>> {
    let mut engine = Engine::new(scenario, options)?;
    let out = engine.run()?;
    Ok(EstimatorResult {
        h_hat: out.h_hat,
        active_hat: out.active_hat,
        iterations: out.iterations,
        msg_updates: out.msg_updates,
        converged: out.converged,
        regularized: false,
        trace: out.trace,
    })
}

/// Flooding GAMP with the activity prior pinned to `ρₙ`. Activity is decided
/// from the antenna-aggregated LLRs, which are computed but never fed back.
pub fn plain_gamp<T: Real>(scenario: &Scenario<T>, config: &SystemConfig) -> Result<EstimatorResult<T>> {
    from_engine(scenario, EngineOptions::plain_gamp(config))
}

/// Flooding schedule with sparsity-rate feedback.
pub fn hygamp<T: Real>(scenario: &Scenario<T>, config: &SystemConfig) -> Result<EstimatorResult<T>> {
    from_engine(scenario, EngineOptions::from_config(config, Policy::Full))
}

pub fn msgamp<T: Real>(scenario: &Scenario<T>, config: &SystemConfig, policy: Policy) -> Result<EstimatorResult<T>> {
    from_engine(scenario, EngineOptions::from_config(config, policy))
}

/// `Φᴴ Y`, for comparisons only.
pub fn matched_filter<T: Real>(scenario: &Scenario<T>) -> Array2<C<T>> {
    herm_mul(&scenario.phi, &scenario.y)
}

/// `Φ Ĥ`.
pub fn reconstruct<T: Real>(scenario: &Scenario<T>, h_hat: &Array2<C<T>>) -> Array2<C<T>> {
    mul(&scenario.phi, h_hat)
}

/// Every estimator the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Mmse,
    OracleMmse,
    Gamp,
    Hygamp,
    MsgampRbp,
    MsgampGrbp,
    MsgampGrbpp,
}

impl Estimator {
    pub const ALL: [Estimator; 7] = [
        Estimator::Mmse,
        Estimator::OracleMmse,
        Estimator::Gamp,
        Estimator::Hygamp,
        Estimator::MsgampRbp,
        Estimator::MsgampGrbp,
        Estimator::MsgampGrbpp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mmse => "mmse",
            Estimator::OracleMmse => "oracle-mmse",
            Estimator::Gamp => "gamp",
            Estimator::Hygamp => "hygamp",
            Estimator::MsgampRbp => "msgamp-rbp",
            Estimator::MsgampGrbp => "msgamp-grbp",
            Estimator::MsgampGrbpp => "msgamp-grbpp",
        }
    }

    pub fn is_iterative(self) -> bool {
        !matches!(self, Estimator::Mmse | Estimator::OracleMmse)
    }

    /// Engine configuration for the iterative estimators.
    pub fn engine_options(self, config: &SystemConfig) -> Option<EngineOptions> {
        let policy = match self {
            Estimator::Mmse | Estimator::OracleMmse => return None,
            Estimator::Gamp => return Some(EngineOptions::plain_gamp(config)),
            Estimator::Hygamp => Policy::Full,
            Estimator::MsgampRbp => Policy::Rbp,
            Estimator::MsgampGrbp => Policy::Grbp,
            Estimator::MsgampGrbpp => Policy::Grbpp,
        };
        Some(EngineOptions::from_config(config, policy))
    }

    pub fn run<T: Real>(self, scenario: &Scenario<T>, config: &SystemConfig) -> Result<EstimatorResult<T>> {
        match self.engine_options(config) {
            Some(opts) => from_engine(scenario, opts),
            None if self == Estimator::Mmse => Ok(mmse_estimate(scenario, config.activity_threshold)),
            None => Ok(oracle_mmse_estimate(scenario)),
        }
    }

    /// Runs with caller-adjusted engine options (ignored by closed-form
    /// estimators).
    pub fn run_with_options<T: Real>(
        self,
        scenario: &Scenario<T>,
        config: &SystemConfig,
        adjust: impl FnOnce(&mut EngineOptions),
    ) -> Result<EstimatorResult<T>> {
        match self.engine_options(config) {
            Some(mut opts) => {
                adjust(&mut opts);
                from_engine(scenario, opts)
            }
            None => self.run(scenario, config),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Estimator::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Estimator::ALL.iter().map(|e| e.name()).collect();
            format!("unknown estimator `{s}`; valid names: {}", names.join(", "))
        })
    }
}
