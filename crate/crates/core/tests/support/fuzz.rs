//! Randomized engine runs checked against the schedule rules and the
//! message-update cost model.

use msgamp::scheduling::{top_k, ScheduleSet};
use msgamp::{Engine, EngineOptions, Policy, Scheduler, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Default, Clone)]
pub struct FuzzReport {
    pub runs: usize,
    pub iterations: usize,
    pub violations: Vec<String>,
    /// Message-update counts that differ from `M·|S|`.
    pub cost_violations: Vec<String>,
}

pub fn random_config(rng: &mut ChaCha8Rng) -> SystemConfig {
    let lo = rng.gen_range(0.02..0.4);
    SystemConfig {
        n: rng.gen_range(4..=24),
        m: rng.gen_range(1..=4),
        l: rng.gen_range(3..=16),
        snr_db: rng.gen_range(0.0..30.0),
        rho_range: [lo, (lo + rng.gen_range(0.0..0.3)).min(0.9)],
        seed: rng.gen(),
        max_iters: rng.gen_range(2..=16),
        ..SystemConfig::default()
    }
}

/// Checks, for one run with `policy`, every transition between consecutive
/// swept sets.
fn check_run(cfg: &SystemConfig, policy: Policy, report: &mut FuzzReport) {
    let scenario = msgamp::scenario::synthesize::<f64>(cfg).expect("config");
    let n = cfg.n;
    let opts = EngineOptions::from_config(cfg, policy);
    let mut engine = Engine::new(&scenario, opts).expect("engine");
    let mut found = Vec::new();
    let mut cost = Vec::new();
    let mut bad = |what: String| found.push(format!("{policy} seed={} {what}", cfg.seed));

    let mut prev: Option<(ScheduleSet, usize)> = None;
    let mut iterations = 0;
    let mut expected_total = 0u64;
    for _ in 0..cfg.max_iters {
        let residuals = engine.residuals().clone();
        let rec = engine.step().expect("step");
        let set = &rec.swept;
        let i = rec.iter;
        iterations += 1;
        if !set.is_valid(n) || set.is_empty() {
            bad(format!("iter {i}: invalid set {:?}", set.indices));
        }
        if rec.msg_updates != (cfg.m * set.len()) as u64 {
            cost.push(format!("{policy} seed={} iter {i}: {} updates for |S|={}", cfg.seed, rec.msg_updates, set.len()));
        }
        expected_total += (cfg.m * set.len()) as u64;
        match &prev {
            None => {
                if set.indices != (0..n).collect::<Vec<_>>() {
                    bad("first sweep is not [0..N)".into());
                }
            }
            Some((p, detected)) => {
                let group = (*detected).max(1).min(n);
                let fresh = top_k(&residuals, group);
                match policy {
                    Policy::Full => {
                        if set.len() != n {
                            bad(format!("iter {i}: full policy swept {}", set.len()));
                        }
                    }
                    Policy::Rbp => {
                        if set.indices != top_k(&residuals, 1) {
                            bad(format!("iter {i}: rbp swept {:?}", set.indices));
                        }
                    }
                    Policy::Grbp | Policy::Grbpp => {
                        let exhausted = p.len() == 1 && !p.is_full_refresh();
                        if policy == Policy::Grbpp && exhausted {
                            // the group ran out: previous S was empty
                            if !(set.is_full_refresh() && set.len() == n) {
                                bad(format!("iter {i}: no full refresh after exhausted group"));
                            }
                        } else if exhausted || p.is_full_refresh() {
                            if set.is_full_refresh() || set.indices != fresh {
                                bad(format!("iter {i}: new group {:?}, expected {:?}", set.indices, fresh));
                            }
                        } else if set.indices != p.indices[1..] || set.is_full_refresh() {
                            bad(format!("iter {i}: group {:?} does not shrink {:?} by one", set.indices, p.indices));
                        }
                        if set.is_full_refresh() && !(policy == Policy::Grbpp && exhausted) {
                            bad(format!("iter {i}: unexpected full refresh"));
                        }
                    }
                }
            }
        }
        prev = Some((set.clone(), rec.detected));
    }
    if engine.msg_updates() != expected_total {
        cost.push(format!("{policy} seed={} total updates {} != {expected_total}", cfg.seed, engine.msg_updates()));
    }
    report.iterations += iterations;
    report.violations.extend(found);
    report.cost_violations.extend(cost);
}

/// Drives the raw update rule (without the empty-set resolution of
/// [`Scheduler::next`]) through group exhaustion.
fn check_update_rule(rng: &mut ChaCha8Rng, report: &mut FuzzReport) {
    let n = rng.gen_range(2..=32);
    let residuals = msgamp::ResidualVector {
        res: (0..n).map(|_| rng.gen::<f64>()).collect(),
    };
    let detected = rng.gen_range(0..=n);
    for policy in [Policy::Grbp, Policy::Grbpp] {
        let sched = Scheduler::new(policy, n);
        let mut set = ScheduleSet::full(n);
        let mut sizes = Vec::new();
        for _ in 0..(3 * n + 3) {
            let next = sched.update(&set, &residuals, detected);
            let want_full = policy == Policy::Grbpp && set.is_empty();
            if want_full != (next.is_full_refresh() && next.len() == n) {
                report.violations.push(format!("{policy} n={n}: full refresh after {:?}", set.indices));
            }
            if !set.is_empty() && !set.is_full_refresh() && next.len() + 1 != set.len() {
                report.violations.push(format!("{policy} n={n}: {} -> {}", set.len(), next.len()));
            }
            if (set.is_empty() || set.is_full_refresh()) && !want_full && next.len() != detected.max(1) {
                report.violations.push(format!("{policy} n={n}: group of {} for detected {detected}", next.len()));
            }
            sizes.push(next.len());
            set = next;
        }
        if !sizes.contains(&0) {
            report.violations.push(format!("{policy} n={n}: group never exhausted"));
        }
    }
}

pub fn fuzz(runs: usize, seed: u64) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FuzzReport::default();
    let policies = [Policy::Rbp, Policy::Grbp, Policy::Grbpp, Policy::Full];
    for r in 0..runs {
        let cfg = random_config(&mut rng);
        check_run(&cfg, policies[r % policies.len()], &mut report);
        check_update_rule(&mut rng, &mut report);
        report.runs += 1;
    }
    report
}

/// RBP sweeps cost exactly `M` after the first iteration, full sweeps `M·N`.
pub fn cost_claim(seed: u64) -> Result<(), String> {
    let cfg = SystemConfig { n: 128, m: 32, l: 64, snr_db: 10.0, seed, max_iters: 20, ..SystemConfig::default() };
    let scenario = msgamp::scenario::synthesize::<f64>(&cfg).map_err(|e| e.to_string())?;
    for policy in [Policy::Rbp, Policy::Full] {
        let mut engine = Engine::new(&scenario, EngineOptions::from_config(&cfg, policy)).map_err(|e| e.to_string())?;
        for _ in 0..cfg.max_iters {
            let rec = engine.step().map_err(|e| e.to_string())?;
            let want = match policy {
                Policy::Rbp if rec.iter > 1 => cfg.m as u64,
                _ => (cfg.m * cfg.n) as u64,
            };
            if rec.msg_updates != want {
                return Err(format!("{policy} iter {}: {} updates, expected {want}", rec.iter, rec.msg_updates));
            }
        }
    }
    Ok(())
}
