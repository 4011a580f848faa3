//! Schedule-restricted hybrid GAMP.
//!
//! Each iteration runs, for the devices in the current schedule `S`:
//!
//! 1. the input denoiser at the previous pseudo-prior (`ĥ`, `Qʰ`);
//! 2. the output stage for every pilot symbol and antenna, with the mixing
//!    sums taken over all `N` devices using their latest stored `ĥ`, `Qʰ`;
//! 3. the pseudo-prior refresh (`Qʳ`, `r̂`);
//! 4. the sparsity-rate update: per-edge activity LLRs and the extrinsic
//!    activity estimates `ρ̂ₙₘ`;
//!
//! then averages `ρ̂ₙₘ` over antennas, forms the belief of every updated
//! device from its refreshed pseudo-prior, updates residuals and picks the
//! next schedule. Devices outside `S` keep every per-device array untouched.
//!
//! The belief `b` of a device is the posterior mean under its newest
//! pseudo-prior; it is the channel estimate the engine reports and the
//! quantity the stopping rule and the residuals are measured on.

use ndarray::{s, Array1, Array2, Array3};

use crate::denoisers::{input_denoise, logistic, output_denoise, scaled_residual, slab_llr, PseudoPrior};
use crate::error::{dimension, Error, Result};
use crate::metrics;
use crate::scalar::{Real, C};
use crate::scenario::{Scenario, SystemConfig};
use crate::scheduling::{GroupSize, Policy, ResidualMetric, ResidualVector, ScheduleSet, Scheduler};

/// LLRs are clamped to `[-LLR_CLAMP, LLR_CLAMP]` before exponentiation.
pub const LLR_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    pub policy: Policy,
    pub group: GroupSize,
    pub residual_metric: ResidualMetric,
    /// Which activity probability the input denoiser uses.
    pub denoiser_activity: DenoiserActivity,
    pub onsager: OnsagerMode,
    pub start: Start,
    pub max_iters: usize,
    pub tol_eps: f64,
    pub activity_threshold: f64,
}

impl EngineOptions {
    pub fn from_config(config: &SystemConfig, policy: Policy) -> Self {
        Self {
            policy,
            group: GroupSize::Detected,
            residual_metric: ResidualMetric::Mean,
            denoiser_activity: DenoiserActivity::Aggregated,
            onsager: OnsagerMode::Repeated,
            start: Start::PriorMoments,
            max_iters: config.max_iters,
            tol_eps: config.tol_eps,
            activity_threshold: config.activity_threshold,
        }
    }

    pub fn plain_gamp(config: &SystemConfig) -> Self {
        Self {
            denoiser_activity: DenoiserActivity::Configured,
            ..Self::from_config(config, Policy::Full)
        }
    }
}

/// Activity probability fed to the input denoiser of edge `(n, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenoiserActivity {
    /// The configured `ρₙ`; the activity estimates are never fed back (plain
    /// GAMP). LLRs are still computed so that activity can be decided.
    Configured,
    /// The antenna average `ρ̂ₙ`.
    Aggregated,
    /// The extrinsic per-edge estimate `ρ̂ₙₘ`.
    PerEdge,
}

/// How the Onsager correction in `p = Φĥ − (…)` treats devices outside the
/// schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnsagerMode {
    /// Every device contributes `|Φₗₙ|² Qʰₙₘ ŝₗₘ` with the `ŝ` its current `ĥ`
    /// was derived from, so an unscheduled device repeats its whole message.
    Repeated,
    /// `Qᵖₗₘ ŝₗₘ⁽ⁱ⁻¹⁾` for every device, whether or not it was refreshed.
    Current,
}

/// Input of the very first input-denoiser pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    /// `ĥ = E[h] = 0`, `Qʰ = Var[h] = ρₙβₙ`: the first pass sees no
    /// pseudo-observation.
    PriorMoments,
    /// The first pass denoises the initial pseudo-prior `r̂ = 0`, `Qʳ = 1`,
    /// which shrinks `Qʰ` below the prior variance.
    Literal,
}

/// All per-iteration arrays. Device arrays are `N × M`, pilot-symbol arrays
/// are `L × M`.
#[derive(Debug, Clone, PartialEq)]
pub struct GampState<T: Real> {
    pub h_hat: Array2<C<T>>,
    pub q_h: Array2<T>,
    pub r_hat: Array2<C<T>>,
    pub q_r: Array2<T>,
    pub p: Array2<C<T>>,
    pub q_p: Array2<T>,
    pub z_tilde: Array2<C<T>>,
    pub q_z: Array2<T>,
    pub s_hat: Array2<C<T>>,
    pub q_s: Array2<T>,
    /// Incoming per-edge activity LLRs `LLR_{n←nm}`.
    pub llr_in: Array2<T>,
    pub rho_nm: Array2<T>,
    pub rho_n: Array1<T>,
    /// Posterior mean and variance under the newest pseudo-prior.
    pub belief: Array2<C<T>>,
    pub belief_var: Array2<T>,
    /// `Σₙ Φ_{ln} ĥ_{nm}`.
    pub z_mix: Array2<C<T>>,
    /// `Σₙ |Φ_{ln}|² Qʰ_{nm} ŝ_{lm}` with each device's own `ŝ` reference.
    pub onsager: Array2<C<T>>,
    /// Per device (`N × L × M`): the `ŝ` behind its current `ĥ`.
    pub s_ref_h: Array3<C<T>>,
    /// Per device: the `ŝ` used at its latest `r̂` refresh.
    pub s_ref_r: Array3<C<T>>,
    /// Completed iterations.
    pub iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub tol: f64,
    /// The set swept in this iteration.
    pub swept: ScheduleSet,
    pub msg_updates: u64,
    /// `None` when the true channel is all zero.
    pub nmse_all_db: Option<f64>,
    pub detected: usize,
}

impl IterationRecord {
    pub const CSV_HEADER: &'static str = "iter,tol,set_size,msg_updates,nmse_all_db,detected";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6e},{},{},{},{}",
            self.iter,
            self.tol,
            self.swept.len(),
            self.msg_updates,
            self.nmse_all_db.map(|v| format!("{v:.6}")).unwrap_or_default(),
            self.detected
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome<T: Real> {
    pub h_hat: Array2<C<T>>,
    pub rho_n: Array1<T>,
    pub active_hat: Vec<bool>,
    pub iterations: usize,
    pub msg_updates: u64,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
}

/// `(1/M) Σₘ ‖ĥₘ⁽ⁱ⁾ − ĥₘ⁽ⁱ⁻¹⁾‖ / ‖ĥₘ⁽ⁱ⁾‖` over antenna columns. A column whose
/// current estimate is zero contributes 0 if it did not change, else 1.
pub fn stopping_tol<T: Real>(prev: &Array2<C<T>>, cur: &Array2<C<T>>) -> Result<T> {
    if prev.dim() != cur.dim() {
        return Err(dimension("stopping_tol", format!("{:?}", cur.dim()), format!("{:?}", prev.dim())));
    }
    let m = cur.ncols();
    if m == 0 {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for (a, b) in cur.columns().into_iter().zip(prev.columns()) {
        let norm: T = a.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        let diff: T = a.iter().zip(b.iter()).map(|(x, y)| (*x - *y).norm_sqr()).sum::<T>().sqrt();
        total = total
            + if norm > T::zero() {
                diff / norm
            } else if diff > T::zero() {
                T::one()
            } else {
                T::zero()
            };
    }
    Ok(total / T::of(m as f64))
}

#[inline]
fn clamp_llr<T: Real>(x: T) -> T {
    let c = T::of(LLR_CLAMP);
    x.max(-c).min(c)
}

#[inline]
fn axpy<T: Real>(acc: &mut [C<T>], a: C<T>, x: &[C<T>]) {
    for (o, v) in acc.iter_mut().zip(x) {
        *o = *o + a * *v;
    }
}

#[inline]
fn axpy_real<T: Real>(acc: &mut [T], a: T, x: &[T]) {
    for (o, v) in acc.iter_mut().zip(x) {
        *o = *o + a * *v;
    }
}

fn check_options(opts: &EngineOptions) -> Result<()> {
    if opts.max_iters == 0 {
        return Err(Error::Config { field: "max_iters", reason: "must be >= 1".into() });
    }
    if !(opts.tol_eps > 0.0) {
        return Err(Error::Config { field: "tol_eps", reason: "must be positive".into() });
    }
    if !(opts.activity_threshold > 0.0 && opts.activity_threshold < 1.0) {
        return Err(Error::Config { field: "activity_threshold", reason: "must lie in (0, 1)".into() });
    }
    Ok(())
}

/// One estimator run over one scenario.
#[derive(Debug, Clone)]
pub struct Engine<'s, T: Real> {
    scenario: &'s Scenario<T>,
    options: EngineOptions,
    scheduler: Scheduler,
    state: GampState<T>,
    schedule: ScheduleSet,
    residuals: ResidualVector<T>,
    msg_updates: u64,
    /// Edge messages `(r̂ₙₘ, Qʳₙₘ)` refreshed since the last iteration record.
    sweep_updates: u64,
    /// `Φᵀ`, `N × L`
    phi_t: Array2<C<T>>,
    /// `|Φ|²`, `L × N`
    abs2: Array2<T>,
    /// `|Φ|²ᵀ`, `N × L`
    abs2_t: Array2<T>,
    prior_logit: Array1<T>,
}

impl<'s, T: Real> Engine<'s, T> {
    /// Builds the engine and its initial state: `ŝ = 0`, `r̂ = 0`, `Qʳ = 1`,
    /// `ρ̂ₙₘ = ρₙ`, `S = [0, …, N-1]`, and one input-denoiser pass at that
    /// pseudo-prior for `ĥ`, `Qʰ`.
    pub fn new(scenario: &'s Scenario<T>, options: EngineOptions) -> Result<Self> {
        check_options(&options)?;
        let (l, n, m) = (scenario.l(), scenario.n(), scenario.m());
        if n == 0 || l == 0 || m == 0 {
            return Err(dimension("Engine::new", "nonempty scenario", format!("L={l} N={n} M={m}")));
        }
        if scenario.rho.iter().any(|r| !(*r >= T::zero() && *r <= T::one())) {
            return Err(Error::Domain { op: "Engine::new", detail: "rho outside [0,1]".into() });
        }
        let phi_t = scenario.phi.t().to_owned();
        let abs2 = scenario.phi.mapv(|z| z.norm_sqr());
        let abs2_t = abs2.t().to_owned();
        let prior_logit = scenario.rho.mapv(|r| clamp_llr((r / (T::one() - r)).ln()));
        let mut state = init_state(scenario, &abs2)?;
        if options.start == Start::PriorMoments {
            state.h_hat.fill(C::new(T::zero(), T::zero()));
            for (dev, mut row) in state.q_h.rows_mut().into_iter().enumerate() {
                row.fill(scenario.rho[dev] * scenario.beta[dev]);
            }
            state.belief.assign(&state.h_hat);
            state.belief_var.assign(&state.q_h);
            mix(&scenario.phi, &abs2, &state.h_hat, &state.q_h, &mut state.z_mix, &mut state.q_p);
        }
        Ok(Self {
            scenario,
            scheduler: Scheduler::new(options.policy, n).with_group(options.group),
            options,
            state,
            schedule: ScheduleSet::full(n),
            residuals: ResidualVector::zeros(n),
            msg_updates: 0,
            sweep_updates: 0,
            phi_t,
            abs2,
            abs2_t,
            prior_logit,
        })
    }

    pub fn state(&self) -> &GampState<T> {
        &self.state
    }

    pub fn scenario(&self) -> &Scenario<T> {
        self.scenario
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    /// The set the next iteration will sweep.
    pub fn schedule(&self) -> &ScheduleSet {
        &self.schedule
    }

    pub fn residuals(&self) -> &ResidualVector<T> {
        &self.residuals
    }

    pub fn msg_updates(&self) -> u64 {
        self.msg_updates
    }

    /// Replaces the set the next iteration sweeps.
    pub fn set_schedule(&mut self, set: ScheduleSet) -> Result<()> {
        if !set.is_valid(self.scenario.n()) {
            return Err(dimension("set_schedule", "distinct indices < N", format!("{:?}", set.indices)));
        }
        self.schedule = set;
        Ok(())
    }

    fn denoiser_prior(&self, n: usize, k: usize) -> T {
        match self.options.denoiser_activity {
            DenoiserActivity::Configured => self.scenario.rho[n],
            DenoiserActivity::Aggregated => self.state.rho_n[n],
            DenoiserActivity::PerEdge => self.state.rho_nm[[n, k]],
        }
    }

    /// GAMP approximation stage for the devices in `set`.
    pub fn gamp_sweep(&mut self, set: &ScheduleSet) -> Result<()> {
        if set.is_empty() {
            return Err(Error::EmptySchedule("gamp_sweep"));
        }
        let (l, n_dev, m) = (self.scenario.l(), self.scenario.n(), self.scenario.m());
        let full = set.len() == n_dev;
        let sigma_w2 = self.scenario.sigma_w2;

        // input denoiser at the previous pseudo-prior
        let mut old_h = vec![C::new(T::zero(), T::zero()); m];
        let mut old_qh = vec![T::zero(); m];
        // under a prior-moment start `ĥ`, `Qʰ` already hold the first pass
        let fresh_start = self.state.iter == 0 && self.options.start == Start::PriorMoments;
        for &n in &set.indices {
            let beta = self.scenario.beta[n];
            for k in 0..m {
                if fresh_start {
                    break;
                }
                let prior = self.denoiser_prior(n, k);
                old_h[k] = self.state.h_hat[[n, k]];
                old_qh[k] = self.state.q_h[[n, k]];
                let (post, _) = input_denoise(&PseudoPrior {
                    r_hat: self.state.r_hat[[n, k]],
                    q_r: self.state.q_r[[n, k]],
                    rho_hat: prior,
                    beta,
                })?;
                self.state.h_hat[[n, k]] = post.mean;
                self.state.q_h[[n, k]] = post.var;
            }
            let repeated = self.options.onsager == OnsagerMode::Repeated;
            if !full {
                // rank-one correction of the mixing sums for this device
                let dh: Vec<C<T>> = (0..m).map(|k| self.state.h_hat[[n, k]] - old_h[k]).collect();
                let dq: Vec<T> = (0..m).map(|k| self.state.q_h[[n, k]] - old_qh[k]).collect();
                let zm = self.state.z_mix.as_slice_mut().expect("standard layout");
                let qp = self.state.q_p.as_slice_mut().expect("standard layout");
                for row in 0..l {
                    axpy(&mut zm[row * m..(row + 1) * m], self.phi_t[[n, row]], &dh);
                    axpy_real(&mut qp[row * m..(row + 1) * m], self.abs2_t[[n, row]], &dq);
                }
                if repeated {
                    for row in 0..l {
                        let a = self.abs2_t[[n, row]];
                        for k in 0..m {
                            let old = self.state.s_ref_h[[n, row, k]] * (a * old_qh[k]);
                            let new = self.state.s_ref_r[[n, row, k]] * (a * self.state.q_h[[n, k]]);
                            self.state.onsager[[row, k]] = self.state.onsager[[row, k]] - old + new;
                        }
                    }
                }
            }
            if repeated {
                let fresh = self.state.s_ref_r.slice(s![n, .., ..]).to_owned();
                self.state.s_ref_h.slice_mut(s![n, .., ..]).assign(&fresh);
            }
        }
        if full {
            mix(&self.scenario.phi, &self.abs2, &self.state.h_hat, &self.state.q_h, &mut self.state.z_mix, &mut self.state.q_p);
            if self.options.onsager == OnsagerMode::Repeated {
                onsager_sum(&self.abs2, &self.state.q_h, &self.state.s_ref_h, &mut self.state.onsager);
            }
        }

        // output stage, all pilot symbols and antennas
        for row in 0..l {
            for k in 0..m {
                let q_p = self.state.q_p[[row, k]];
                let correction = match self.options.onsager {
                    OnsagerMode::Repeated => self.state.onsager[[row, k]],
                    OnsagerMode::Current => self.state.s_hat[[row, k]] * q_p,
                };
                let p = self.state.z_mix[[row, k]] - correction;
                let (z, q_z) = output_denoise(self.scenario.y[[row, k]], p, q_p, sigma_w2)?;
                let (s, q_s) = scaled_residual(z, p, q_p, q_z)?;
                self.state.p[[row, k]] = p;
                self.state.z_tilde[[row, k]] = z;
                self.state.q_z[[row, k]] = q_z;
                self.state.s_hat[[row, k]] = s;
                self.state.q_s[[row, k]] = q_s;
            }
        }

        if self.options.onsager == OnsagerMode::Repeated {
            for &n in &set.indices {
                self.state.s_ref_r.slice_mut(s![n, .., ..]).assign(&self.state.s_hat);
            }
        }

        // pseudo-prior refresh
        let s_hat = self.state.s_hat.as_slice().expect("standard layout");
        let q_s = self.state.q_s.as_slice().expect("standard layout");
        let mut acc_s = vec![C::new(T::zero(), T::zero()); m];
        let mut acc_q = vec![T::zero(); m];
        for &n in &set.indices {
            acc_s.iter_mut().for_each(|v| *v = C::new(T::zero(), T::zero()));
            acc_q.iter_mut().for_each(|v| *v = T::zero());
            for row in 0..l {
                axpy(&mut acc_s, self.phi_t[[n, row]].conj(), &s_hat[row * m..(row + 1) * m]);
                axpy_real(&mut acc_q, self.abs2_t[[n, row]], &q_s[row * m..(row + 1) * m]);
            }
            for k in 0..m {
                let q_r = T::one() / acc_q[k].max(T::min_positive_value());
                self.state.q_r[[n, k]] = q_r;
                self.state.r_hat[[n, k]] = self.state.h_hat[[n, k]] + acc_s[k] * q_r;
                self.sweep_updates += 1;
            }
        }
        Ok(())
    }

    /// Sparsity-rate update for the devices in `set`.
    pub fn sparsity_update(&mut self, set: &ScheduleSet) {
        let m = self.scenario.m();
        for &n in &set.indices {
            let beta = self.scenario.beta[n];
            let mut total = T::zero();
            for k in 0..m {
                let llr = clamp_llr(slab_llr(self.state.r_hat[[n, k]], self.state.q_r[[n, k]], beta));
                self.state.llr_in[[n, k]] = llr;
                total = total + llr;
            }
            for k in 0..m {
                let out = clamp_llr(self.prior_logit[n] + (total - self.state.llr_in[[n, k]]));
                self.state.rho_nm[[n, k]] = logistic(out);
            }
        }
    }

    /// `ρ̂ₙ = Σₘ ρ̂ₙₘ / M` for every device.
    pub fn aggregate_activity(&mut self) -> &Array1<T> {
        let m = T::of(self.scenario.m() as f64);
        for (dst, row) in self.state.rho_n.iter_mut().zip(self.state.rho_nm.rows()) {
            *dst = row.iter().copied().sum::<T>() / m;
        }
        &self.state.rho_n
    }

    /// Devices whose activity estimate exceeds the threshold.
    pub fn detected(&self) -> Vec<bool> {
        detect(&self.state.rho_n, self.options.activity_threshold)
    }

    fn refresh_beliefs(&mut self, set: &ScheduleSet) -> Result<()> {
        let m = self.scenario.m();
        for &n in &set.indices {
            let beta = self.scenario.beta[n];
            for k in 0..m {
                let prior = self.denoiser_prior(n, k);
                let (post, _) = input_denoise(&PseudoPrior {
                    r_hat: self.state.r_hat[[n, k]],
                    q_r: self.state.q_r[[n, k]],
                    rho_hat: prior,
                    beta,
                })?;
                self.state.belief[[n, k]] = post.mean;
                self.state.belief_var[[n, k]] = post.var;
            }
        }
        Ok(())
    }

    /// Runs one iteration over the current schedule and selects the next one.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let set = std::mem::replace(&mut self.schedule, ScheduleSet::empty(self.options.policy));
        let prev_belief = self.state.belief.clone();
        let prev_rho = self.state.rho_nm.clone();

        self.gamp_sweep(&set)?;
        self.sparsity_update(&set);
        self.aggregate_activity();
        self.refresh_beliefs(&set)?;
        self.residuals.refresh(
            self.options.residual_metric,
            self.state.belief.view(),
            prev_belief.view(),
            self.state.rho_nm.view(),
            prev_rho.view(),
            &set.indices,
        );
        let tol = stopping_tol(&prev_belief, &self.state.belief)?;

        // counted edge by edge during the sweep
        let cost = std::mem::take(&mut self.sweep_updates);
        self.msg_updates += cost;
        self.state.iter += 1;
        let detected = self.detected().iter().filter(|&&a| a).count();
        self.schedule = self.scheduler.next(&set, &self.residuals, detected);
        Ok(IterationRecord {
            iter: self.state.iter,
            tol: tol.as_f64(),
            swept: set,
            msg_updates: cost,
            nmse_all_db: metrics::nmse_all_db(&self.scenario.h, &self.state.belief),
            detected,
        })
    }

    /// Iterates until `tol < tol_eps` or `max_iters` iterations have run.
    pub fn run(&mut self) -> Result<RunOutcome<T>> {
        self.run_with(|_| {})
    }

    /// Like [`Engine::run`], handing every iteration record to `sink`.
    pub fn run_with(&mut self, mut sink: impl FnMut(&IterationRecord)) -> Result<RunOutcome<T>> {
        let mut trace = Vec::new();
        let mut converged = false;
        while self.state.iter < self.options.max_iters {
            let record = self.step()?;
            sink(&record);
            let done = record.tol < self.options.tol_eps;
            trace.push(record);
            if done {
                converged = true;
                break;
            }
        }
        Ok(RunOutcome {
            h_hat: self.state.belief.clone(),
            rho_n: self.state.rho_n.clone(),
            active_hat: self.detected(),
            iterations: self.state.iter,
            msg_updates: self.msg_updates,
            converged,
            trace,
        })
    }
}

pub fn detect<T: Real>(rho_n: &Array1<T>, threshold: f64) -> Vec<bool> {
    let t = T::of(threshold);
    rho_n.iter().map(|&r| r > t).collect()
}

/// `z_mix = Φ ĥ`, `q_p = |Φ|² Qʰ`.
fn mix<T: Real>(
    phi: &Array2<C<T>>,
    abs2: &Array2<T>,
    h_hat: &Array2<C<T>>,
    q_h: &Array2<T>,
    z_mix: &mut Array2<C<T>>,
    q_p: &mut Array2<T>,
) {
    let (l, n) = phi.dim();
    let m = h_hat.ncols();
    let h = h_hat.as_slice().expect("standard layout");
    let qh = q_h.as_slice().expect("standard layout");
    let zm = z_mix.as_slice_mut().expect("standard layout");
    let qp = q_p.as_slice_mut().expect("standard layout");
    zm.iter_mut().for_each(|v| *v = C::new(T::zero(), T::zero()));
    qp.iter_mut().for_each(|v| *v = T::zero());
    for row in 0..l {
        let zrow = &mut zm[row * m..(row + 1) * m];
        for dev in 0..n {
            axpy(zrow, phi[[row, dev]], &h[dev * m..(dev + 1) * m]);
        }
        let qrow = &mut qp[row * m..(row + 1) * m];
        for dev in 0..n {
            axpy_real(qrow, abs2[[row, dev]], &qh[dev * m..(dev + 1) * m]);
        }
    }
}

/// `Σₙ |Φ_{ln}|² Qʰ_{nm} s_ref[n, l, m]`.
fn onsager_sum<T: Real>(abs2: &Array2<T>, q_h: &Array2<T>, s_ref: &Array3<C<T>>, out: &mut Array2<C<T>>) {
    let (l, n) = abs2.dim();
    let m = q_h.ncols();
    out.fill(C::new(T::zero(), T::zero()));
    for row in 0..l {
        for dev in 0..n {
            let a = abs2[[row, dev]];
            for k in 0..m {
                out[[row, k]] = out[[row, k]] + s_ref[[dev, row, k]] * (a * q_h[[dev, k]]);
            }
        }
    }
}

/// Initial state for `scenario`; see [`Engine::new`]. Output-side arrays
/// other than `ŝ` are placeholders overwritten in the first sweep.
pub fn init_state<T: Real>(scenario: &Scenario<T>, abs2: &Array2<T>) -> Result<GampState<T>> {
    let (l, n, m) = (scenario.l(), scenario.n(), scenario.m());
    if abs2.dim() != (l, n) {
        return Err(dimension("init_state", format!("{l}x{n}"), format!("{:?}", abs2.dim())));
    }
    let zero = C::new(T::zero(), T::zero());
    let r_hat = Array2::from_elem((n, m), zero);
    let q_r = Array2::from_elem((n, m), T::one());
    let mut rho_nm = Array2::from_elem((n, m), T::zero());
    for (mut row, &r) in rho_nm.rows_mut().into_iter().zip(scenario.rho.iter()) {
        row.fill(r);
    }
    let mut h_hat = Array2::from_elem((n, m), zero);
    let mut q_h = Array2::from_elem((n, m), T::zero());
    for dev in 0..n {
        for k in 0..m {
            let (post, _) = input_denoise(&PseudoPrior {
                r_hat: zero,
                q_r: T::one(),
                rho_hat: scenario.rho[dev],
                beta: scenario.beta[dev],
            })?;
            h_hat[[dev, k]] = post.mean;
            q_h[[dev, k]] = post.var;
        }
    }
    let mut z_mix = Array2::from_elem((l, m), zero);
    let mut q_p = Array2::from_elem((l, m), T::zero());
    mix(&scenario.phi, abs2, &h_hat, &q_h, &mut z_mix, &mut q_p);
    Ok(GampState {
        belief: h_hat.clone(),
        belief_var: q_h.clone(),
        h_hat,
        q_h,
        r_hat,
        q_r,
        p: z_mix.clone(),
        q_p,
        z_tilde: Array2::from_elem((l, m), zero),
        q_z: Array2::from_elem((l, m), T::one()),
        s_hat: Array2::from_elem((l, m), zero),
        q_s: Array2::from_elem((l, m), T::one()),
        llr_in: Array2::from_elem((n, m), T::zero()),
        rho_n: scenario.rho.clone(),
        rho_nm,
        z_mix,
        onsager: Array2::from_elem((l, m), zero),
        s_ref_h: Array3::from_elem((n, l, m), zero),
        s_ref_r: Array3::from_elem((n, l, m), zero),
        iter: 0,
    })
}
