//! Scalar posterior computations used by the message-passing engine.
//!
//! The input side is a spike-and-slab (Bernoulli-Gaussian) prior observed
//! through a Gaussian pseudo-channel; the output side is AWGN. All mixture
//! weights are formed in the log domain so that `|r̂|²/Qʳ` in the hundreds
//! does not overflow.

use crate::error::{domain, Result};
use crate::scalar::{Real, C};

/// Lower bound applied to `Qʳ` and `Qᵖ` before they are divided by.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[inline]
pub(crate) fn floor_var<T: Real>(v: T) -> T {
    v.max(T::of(VARIANCE_FLOOR))
}

/// Numerically stable logistic function `1 / (1 + e^{-x})`.
#[inline]
pub fn logistic<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn finite_c<T: Real>(z: C<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Circularly-symmetric complex Gaussian density `CN(x | mean, var)`.
pub fn cn_pdf<T: Real>(x: C<T>, mean: C<T>, var: T) -> Result<T> {
    if !(var > T::zero()) || !var.is_finite() {
        return Err(domain("cn_pdf", format!("variance must be positive, got {var}")));
    }
    Ok(cn_log_pdf(x, mean, var).exp())
}

#[inline]
pub(crate) fn cn_log_pdf<T: Real>(x: C<T>, mean: C<T>, var: T) -> T {
    -(x - mean).norm_sqr() / var - (T::PI() * var).ln()
}

/// `log[CN(0 | r̂, Qʳ + β) / CN(0 | r̂, Qʳ)]`, the evidence an edge carries for
/// activity of its device.
#[inline]
pub fn slab_llr<T: Real>(r_hat: C<T>, q_r: T, beta: T) -> T {
    let q = floor_var(q_r);
    let e = r_hat.norm_sqr();
    (q / (q + beta)).ln() + e / q - e / (q + beta)
}

/// Pseudo-prior for one channel coefficient: the spike-and-slab prior with
/// activity `rho_hat` and slab variance `beta`, observed as `r̂ = h + CN(0, Qʳ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoPrior<T: Real> {
    pub r_hat: C<T>,
    pub q_r: T,
    pub rho_hat: T,
    pub beta: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorMoments<T: Real> {
    pub mean: C<T>,
    pub var: T,
}

/// Posterior mean and variance of `h` under a [`PseudoPrior`], plus the
/// posterior slab weight `π`.
pub fn input_denoise<T: Real>(pp: &PseudoPrior<T>) -> Result<(PosteriorMoments<T>, T)> {
    let PseudoPrior {
        r_hat,
        q_r,
        rho_hat,
        beta,
    } = *pp;
    if !finite_c(r_hat) {
        return Err(domain("input_denoise", format!("non-finite r_hat {r_hat}")));
    }
    if !(q_r > T::zero()) || !q_r.is_finite() {
        return Err(domain("input_denoise", format!("q_r must be positive, got {q_r}")));
    }
    if !(rho_hat >= T::zero() && rho_hat <= T::one()) {
        return Err(domain("input_denoise", format!("rho_hat outside [0,1]: {rho_hat}")));
    }
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(domain("input_denoise", format!("beta must be positive, got {beta}")));
    }
    let q = floor_var(q_r);
    let pi = if rho_hat.is_zero() {
        T::zero()
    } else if rho_hat == T::one() {
        T::one()
    } else {
        // log-odds of slab versus spike given r̂
        let log_odds = (rho_hat / (T::one() - rho_hat)).ln() + slab_llr(r_hat, q, beta);
        logistic(log_odds)
    };
    let gain = beta / (beta + q);
    let slab_var = beta * q / (beta + q);
    let slab_mean = r_hat * gain;
    let mean = slab_mean * pi;
    let var = pi * slab_var + pi * (T::one() - pi) * slab_mean.norm_sqr();
    Ok((PosteriorMoments { mean, var }, pi))
}

/// AWGN output denoiser: posterior mean and variance of `z` given `y = z + w`,
/// `w ~ CN(0, σ_w²)`, and the Gaussian pseudo-prior `CN(z | p, Qᵖ)`.
pub fn output_denoise<T: Real>(y: C<T>, p: C<T>, q_p: T, sigma_w2: T) -> Result<(C<T>, T)> {
    if !(q_p > T::zero()) || !(sigma_w2 > T::zero()) {
        return Err(domain(
            "output_denoise",
            format!("variances must be positive (q_p={q_p}, sigma_w2={sigma_w2})"),
        ));
    }
    if !finite_c(y) || !finite_c(p) {
        return Err(domain("output_denoise", "non-finite input"));
    }
    let q = floor_var(q_p);
    let denom = q + sigma_w2;
    let z = (y * q + p * sigma_w2) / denom;
    let q_z = sigma_w2 * q / denom;
    Ok((z, q_z))
}

/// Scaled residual `ŝ = (z̃ − p)/Qᵖ` and its variance `Qˢ = (1 − Q^z/Qᵖ)/Qᵖ`.
pub fn scaled_residual<T: Real>(z_tilde: C<T>, p: C<T>, q_p: T, q_z: T) -> Result<(C<T>, T)> {
    if !(q_p > T::zero()) {
        return Err(domain("scaled_residual", format!("q_p must be positive, got {q_p}")));
    }
    let q = floor_var(q_p);
    let s = (z_tilde - p) / q;
    let q_s = (T::one() - q_z / q) / q;
    Ok((s, q_s))
}
