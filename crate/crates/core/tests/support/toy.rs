//! One iteration of the message-scheduling algorithm on a two-device,
//! two-symbol, single-antenna instance, transcribed statement by statement
//! with named scalars.

use msgamp::{Complex64 as Cx, Scenario64};

fn ln_cn0(r: Cx, var: f64) -> f64 {
    // log CN(0 | r, var)
    -r.norm_sqr() / var - (std::f64::consts::PI * var).ln()
}

/// `E` and `Var` of the Bernoulli-Gaussian variable given `r = h + CN(0, q)`.
fn moments(r: Cx, q: f64, rho: f64, beta: f64) -> (Cx, f64) {
    let slab = rho.ln() + ln_cn0(r, q + beta);
    let spike = (1.0 - rho).ln() + ln_cn0(r, q);
    let pi = 1.0 / (1.0 + (spike - slab).exp());
    let mean_slab = r * (beta / (beta + q));
    let var_slab = beta * q / (beta + q);
    let mean = mean_slab * pi;
    (mean, pi * (var_slab + mean_slab.norm_sqr()) - mean.norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstPass {
    /// Denoise the initial `r̂ = 0`, `Qʳ = 1`.
    Literal,
    /// Start from the prior mean and variance.
    PriorMoments,
}

/// `(name, value)` pairs for every quantity the iteration produced.
pub fn script(sc: &Scenario64, first: FirstPass) -> Vec<(String, f64)> {
    assert_eq!((sc.n(), sc.l(), sc.m()), (2, 2, 1));
    let (phi11, phi12, phi21, phi22) = (sc.phi[[0, 0]], sc.phi[[0, 1]], sc.phi[[1, 0]], sc.phi[[1, 1]]);
    let (y1, y2) = (sc.y[[0, 0]], sc.y[[1, 0]]);
    let (rho1, rho2) = (sc.rho[0], sc.rho[1]);
    let (beta1, beta2) = (sc.beta[0], sc.beta[1]);
    let sw = sc.sigma_w2;
    let zero = Cx::new(0.0, 0.0);

    // line 1
    let (s1_0, s2_0) = (zero, zero);
    let (r1_0, r2_0) = (zero, zero);
    let (qr1_0, qr2_0) = (1.0, 1.0);
    let (rhohat1_0, rhohat2_0) = (rho1, rho2);

    // lines 4–5
    let ((h1, qh1), (h2, qh2)) = match first {
        FirstPass::Literal => (moments(r1_0, qr1_0, rhohat1_0, beta1), moments(r2_0, qr2_0, rhohat2_0, beta2)),
        FirstPass::PriorMoments => ((zero, rho1 * beta1), (zero, rho2 * beta2)),
    };

    // lines 7–12, symbol 1
    let qp1 = phi11.norm_sqr() * qh1 + phi12.norm_sqr() * qh2;
    let p1 = phi11 * h1 + phi12 * h2 - s1_0 * qp1;
    let z1 = (y1 * qp1 + p1 * sw) / (qp1 + sw);
    let qz1 = sw * qp1 / (qp1 + sw);
    let s1 = (z1 - p1) / qp1;
    let qs1 = (1.0 / qp1) * (1.0 - qz1 / qp1);
    // symbol 2
    let qp2 = phi21.norm_sqr() * qh1 + phi22.norm_sqr() * qh2;
    let p2 = phi21 * h1 + phi22 * h2 - s2_0 * qp2;
    let z2 = (y2 * qp2 + p2 * sw) / (qp2 + sw);
    let qz2 = sw * qp2 / (qp2 + sw);
    let s2 = (z2 - p2) / qp2;
    let qs2 = (1.0 / qp2) * (1.0 - qz2 / qp2);

    // lines 14–15
    let qr1 = 1.0 / (phi11.norm_sqr() * qs1 + phi21.norm_sqr() * qs2);
    let r1 = h1 + (phi11.conj() * s1 + phi21.conj() * s2) * qr1;
    let qr2 = 1.0 / (phi12.norm_sqr() * qs1 + phi22.norm_sqr() * qs2);
    let r2 = h2 + (phi12.conj() * s1 + phi22.conj() * s2) * qr2;

    // line 16
    let llr1_in = ln_cn0(r1, qr1 + beta1) - ln_cn0(r1, qr1);
    let llr2_in = ln_cn0(r2, qr2 + beta2) - ln_cn0(r2, qr2);
    // line 17: a single antenna has no other edges
    let llr1_out = (rho1 / (1.0 - rho1)).ln();
    let llr2_out = (rho2 / (1.0 - rho2)).ln();
    // line 18
    let rho11 = 1.0 - 1.0 / (1.0 + llr1_out.exp());
    let rho21 = 1.0 - 1.0 / (1.0 + llr2_out.exp());
    // line 21
    let (rhohat1, rhohat2) = (rho11, rho21);

    // belief under the refreshed pseudo-prior; the stopping value
    let b1 = moments(r1, qr1, rhohat1, beta1).0;
    let b2 = moments(r2, qr2, rhohat2, beta2).0;
    let (b1_0, b2_0) = match first {
        FirstPass::Literal => (h1, h2),
        FirstPass::PriorMoments => (zero, zero),
    };
    let tol = ((b1 - b1_0).norm_sqr() + (b2 - b2_0).norm_sqr()).sqrt() / (b1.norm_sqr() + b2.norm_sqr()).sqrt();

    let mut out = Vec::new();
    let mut c = |name: &str, v: Cx| {
        out.push((format!("{name}.re"), v.re));
        out.push((format!("{name}.im"), v.im));
    };
    c("h1", h1);
    c("h2", h2);
    c("p1", p1);
    c("p2", p2);
    c("z1", z1);
    c("z2", z2);
    c("s1", s1);
    c("s2", s2);
    c("r1", r1);
    c("r2", r2);
    c("b1", b1);
    c("b2", b2);
    for (name, v) in [
        ("qh1", qh1),
        ("qh2", qh2),
        ("qp1", qp1),
        ("qp2", qp2),
        ("qz1", qz1),
        ("qz2", qz2),
        ("qs1", qs1),
        ("qs2", qs2),
        ("qr1", qr1),
        ("qr2", qr2),
        ("llr1", llr1_in),
        ("llr2", llr2_in),
        ("rho11", rho11),
        ("rho21", rho21),
        ("rhohat1", rhohat1),
        ("rhohat2", rhohat2),
        ("tol", tol),
    ] {
        out.push((name.to_string(), v));
    }
    out
}

/// The same quantities read from the engine after one full-schedule step.
pub fn engine(sc: &Scenario64, first: FirstPass) -> Vec<(String, f64)> {
    let cfg = msgamp::SystemConfig { n: 2, m: 1, l: 2, ..msgamp::SystemConfig::default() };
    let opts = msgamp::EngineOptions {
        onsager: msgamp::OnsagerMode::Current,
        start: match first {
            FirstPass::Literal => msgamp::Start::Literal,
            FirstPass::PriorMoments => msgamp::Start::PriorMoments,
        },
        ..msgamp::EngineOptions::from_config(&cfg, msgamp::Policy::Full)
    };
    let mut e = msgamp::Engine::new(sc, opts).expect("engine");
    let rec = e.step().expect("step");
    let st = e.state();
    let mut out = Vec::new();
    let mut c = |name: &str, v: Cx| {
        out.push((format!("{name}.re"), v.re));
        out.push((format!("{name}.im"), v.im));
    };
    c("h1", st.h_hat[[0, 0]]);
    c("h2", st.h_hat[[1, 0]]);
    c("p1", st.p[[0, 0]]);
    c("p2", st.p[[1, 0]]);
    c("z1", st.z_tilde[[0, 0]]);
    c("z2", st.z_tilde[[1, 0]]);
    c("s1", st.s_hat[[0, 0]]);
    c("s2", st.s_hat[[1, 0]]);
    c("r1", st.r_hat[[0, 0]]);
    c("r2", st.r_hat[[1, 0]]);
    c("b1", st.belief[[0, 0]]);
    c("b2", st.belief[[1, 0]]);
    for (name, v) in [
        ("qh1", st.q_h[[0, 0]]),
        ("qh2", st.q_h[[1, 0]]),
        ("qp1", st.q_p[[0, 0]]),
        ("qp2", st.q_p[[1, 0]]),
        ("qz1", st.q_z[[0, 0]]),
        ("qz2", st.q_z[[1, 0]]),
        ("qs1", st.q_s[[0, 0]]),
        ("qs2", st.q_s[[1, 0]]),
        ("qr1", st.q_r[[0, 0]]),
        ("qr2", st.q_r[[1, 0]]),
        ("llr1", st.llr_in[[0, 0]]),
        ("llr2", st.llr_in[[1, 0]]),
        ("rho11", st.rho_nm[[0, 0]]),
        ("rho21", st.rho_nm[[1, 0]]),
        ("rhohat1", st.rho_n[0]),
        ("rhohat2", st.rho_n[1]),
        ("tol", rec.tol),
    ] {
        out.push((name.to_string(), v));
    }
    out
}

pub fn toy_scenario(seed: u64) -> Scenario64 {
    let cfg = msgamp::SystemConfig {
        n: 2,
        m: 1,
        l: 2,
        snr_db: 10.0,
        rho_range: [0.3, 0.7],
        seed,
        ..msgamp::SystemConfig::default()
    };
    msgamp::scenario::synthesize(&cfg).expect("valid config")
}

/// Largest absolute difference and the quantity it occurred on.
pub fn max_difference(a: &[(String, f64)], b: &[(String, f64)]) -> (f64, String) {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|((na, va), (nb, vb))| {
            assert_eq!(na, nb);
            ((va - vb).abs(), na.clone())
        })
        .fold((0.0, String::new()), |acc, x| if x.0 > acc.0 { x } else { acc })
}
