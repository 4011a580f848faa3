//! Flooding (fully parallel) HyGAMP written with plain nested loops over
//! `Vec`s. Shares nothing with the engine except the scenario type.

use msgamp::{Complex64 as Cx, Scenario64};

const CLAMP: f64 = 30.0;

fn clamp(x: f64) -> f64 {
    x.clamp(-CLAMP, CLAMP)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Log of the slab-to-spike likelihood ratio of `r = h + CN(0, q)`.
fn edge_llr(r: Cx, q: f64, beta: f64) -> f64 {
    let e = r.norm_sqr();
    // log CN(r; 0, q+β) − log CN(r; 0, q)
    (-e / (q + beta) - (q + beta).ln()) - (-e / q - q.ln())
}

/// Mean and variance of `h` under `(1-ρ)δ + ρ CN(0, β)` observed through
/// `r = h + CN(0, q)`.
fn spike_slab(r: Cx, q: f64, rho: f64, beta: f64) -> (Cx, f64) {
    let w = sigmoid((rho / (1.0 - rho)).ln() + edge_llr(r, q, beta));
    let g = beta / (beta + q);
    let m1 = r * g;
    let v1 = g * q;
    let mean = m1 * w;
    let second = w * (v1 + m1.norm_sqr());
    (mean, second - mean.norm_sqr())
}

/// Every array the engine exposes, after one iteration.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub h_hat: Vec<Vec<Cx>>,
    pub q_h: Vec<Vec<f64>>,
    pub r_hat: Vec<Vec<Cx>>,
    pub q_r: Vec<Vec<f64>>,
    pub p: Vec<Vec<Cx>>,
    pub q_p: Vec<Vec<f64>>,
    pub s_hat: Vec<Vec<Cx>>,
    pub q_s: Vec<Vec<f64>>,
    pub rho_nm: Vec<Vec<f64>>,
    pub rho_n: Vec<f64>,
    pub belief: Vec<Vec<Cx>>,
    pub tol: f64,
}

/// Runs `iters` flooding iterations. The first pass starts from the prior
/// moments `ĥ = 0`, `Qʰ = ρβ` with `ŝ = 0`; every later pass denoises the
/// previous `(r̂, Qʳ)` with the antenna-averaged activity.
pub fn run(s: &Scenario64, iters: usize) -> Vec<Snapshot> {
    let (l, n, m) = (s.l(), s.n(), s.m());
    let phi = |t: usize, d: usize| s.phi[[t, d]];
    let zero = Cx::new(0.0, 0.0);

    let mut r_hat = vec![vec![zero; m]; n];
    let mut q_r = vec![vec![1.0; m]; n];
    let mut s_hat = vec![vec![zero; m]; l];
    let mut rho_n: Vec<f64> = (0..n).map(|d| s.rho[d]).collect();
    let mut belief = vec![vec![zero; m]; n];
    let mut out = Vec::new();

    for it in 0..iters {
        let mut h_hat = vec![vec![zero; m]; n];
        let mut q_h = vec![vec![0.0; m]; n];
        for d in 0..n {
            for k in 0..m {
                if it == 0 {
                    q_h[d][k] = s.rho[d] * s.beta[d];
                } else {
                    let (a, b) = spike_slab(r_hat[d][k], q_r[d][k], rho_n[d], s.beta[d]);
                    h_hat[d][k] = a;
                    q_h[d][k] = b;
                }
            }
        }

        let mut p = vec![vec![zero; m]; l];
        let mut q_p = vec![vec![0.0; m]; l];
        let mut q_s = vec![vec![0.0; m]; l];
        let mut s_new = vec![vec![zero; m]; l];
        for t in 0..l {
            for k in 0..m {
                let mut qp = 0.0;
                let mut z = zero;
                for d in 0..n {
                    qp += phi(t, d).norm_sqr() * q_h[d][k];
                    z += phi(t, d) * h_hat[d][k];
                }
                let pp = z - s_hat[t][k] * qp;
                let sw = s.sigma_w2;
                let zt = (s.y[[t, k]] * qp + pp * sw) / (qp + sw);
                let qz = sw * qp / (qp + sw);
                p[t][k] = pp;
                q_p[t][k] = qp;
                s_new[t][k] = (zt - pp) / qp;
                q_s[t][k] = (1.0 - qz / qp) / qp;
            }
        }
        s_hat = s_new;

        for d in 0..n {
            for k in 0..m {
                let mut inv = 0.0;
                let mut acc = zero;
                for t in 0..l {
                    inv += phi(t, d).norm_sqr() * q_s[t][k];
                    acc += phi(t, d).conj() * s_hat[t][k];
                }
                q_r[d][k] = 1.0 / inv;
                r_hat[d][k] = h_hat[d][k] + acc * q_r[d][k];
            }
        }

        let mut rho_nm = vec![vec![0.0; m]; n];
        for d in 0..n {
            let llr: Vec<f64> = (0..m).map(|k| clamp(edge_llr(r_hat[d][k], q_r[d][k], s.beta[d]))).collect();
            let prior = clamp((s.rho[d] / (1.0 - s.rho[d])).ln());
            for k in 0..m {
                let others: f64 = (0..m).filter(|&j| j != k).map(|j| llr[j]).sum();
                rho_nm[d][k] = sigmoid(clamp(prior + others));
            }
            rho_n[d] = rho_nm[d].iter().sum::<f64>() / m as f64;
        }

        let prev = belief.clone();
        for d in 0..n {
            for k in 0..m {
                belief[d][k] = spike_slab(r_hat[d][k], q_r[d][k], rho_n[d], s.beta[d]).0;
            }
        }
        let mut tol = 0.0;
        for k in 0..m {
            let norm: f64 = (0..n).map(|d| belief[d][k].norm_sqr()).sum::<f64>().sqrt();
            let diff: f64 = (0..n).map(|d| (belief[d][k] - prev[d][k]).norm_sqr()).sum::<f64>().sqrt();
            tol += if norm > 0.0 { diff / norm } else if diff > 0.0 { 1.0 } else { 0.0 };
        }
        tol /= m as f64;

        out.push(Snapshot {
            h_hat,
            q_h,
            r_hat: r_hat.clone(),
            q_r: q_r.clone(),
            p,
            q_p,
            s_hat: s_hat.clone(),
            q_s,
            rho_nm,
            rho_n: rho_n.clone(),
            belief: belief.clone(),
            tol,
        });
    }
    out
}

/// Largest absolute deviation between the engine state and the snapshot.
pub fn max_deviation(state: &msgamp::GampState64, tol: f64, snap: &Snapshot) -> f64 {
    let mut worst: f64 = (tol - snap.tol).abs();
    let mut cmp_c = |a: &dyn Fn(usize, usize) -> Cx, b: &Vec<Vec<Cx>>| {
        for (i, row) in b.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                worst = worst.max((a(i, j) - v).norm());
            }
        }
    };
    cmp_c(&|i, j| state.h_hat[[i, j]], &snap.h_hat);
    cmp_c(&|i, j| state.r_hat[[i, j]], &snap.r_hat);
    cmp_c(&|i, j| state.p[[i, j]], &snap.p);
    cmp_c(&|i, j| state.s_hat[[i, j]], &snap.s_hat);
    cmp_c(&|i, j| state.belief[[i, j]], &snap.belief);
    let mut cmp_r = |a: &dyn Fn(usize, usize) -> f64, b: &Vec<Vec<f64>>| {
        for (i, row) in b.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                worst = worst.max((a(i, j) - v).abs());
            }
        }
    };
    cmp_r(&|i, j| state.q_h[[i, j]], &snap.q_h);
    cmp_r(&|i, j| state.q_r[[i, j]], &snap.q_r);
    cmp_r(&|i, j| state.q_p[[i, j]], &snap.q_p);
    cmp_r(&|i, j| state.q_s[[i, j]], &snap.q_s);
    cmp_r(&|i, j| state.rho_nm[[i, j]], &snap.rho_nm);
    for (i, v) in snap.rho_n.iter().enumerate() {
        worst = worst.max((state.rho_n[i] - v).abs());
    }
    worst
}

/// Small instance `i` of the equivalence suite (N=8, M=4, L=6).
pub fn instance_config(i: u64) -> msgamp::SystemConfig {
    msgamp::SystemConfig {
        n: 8,
        m: 4,
        l: 6,
        snr_db: 5.0 + 3.0 * (i % 6) as f64,
        rho_range: [0.15, 0.45],
        seed: 9000 + i,
        ..msgamp::SystemConfig::default()
    }
}

/// Largest deviation between the engine under a full schedule (default
/// options) and the flooding reference over `iters` iterations.
pub fn engine_vs_flooding(config: &msgamp::SystemConfig, iters: usize) -> f64 {
    let scenario: Scenario64 = msgamp::scenario::synthesize(config).expect("valid config");
    let reference = run(&scenario, iters);
    let opts = msgamp::EngineOptions {
        max_iters: iters,
        ..msgamp::EngineOptions::from_config(config, msgamp::Policy::Full)
    };
    let mut engine = msgamp::Engine::new(&scenario, opts).expect("engine");
    let mut worst: f64 = 0.0;
    for snap in &reference {
        let rec = engine.step().expect("step");
        worst = worst.max(max_deviation(engine.state(), rec.tol, snap));
    }
    worst
}
