//! Grant-free uplink problem instances.
//!
//! A [`Scenario`] is one realization of `Y = Φ H + W`: `N` single-antenna
//! devices with unit-norm random-phase pilots of length `L`, a `M`-antenna
//! base station, Bernoulli activity and Rayleigh channels for active devices.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{dimension, Error, Result};
use crate::scalar::{Real, C};

/// Scenario and algorithm constants. Missing fields take their [`Default`]
/// values when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Device count.
    pub n: usize,
    /// Base-station antenna count.
    pub m: usize,
    /// Pilot length.
    pub l: usize,
    /// Average SNR in dB; the noise variance is `10^(-snr_db/10)`.
    pub snr_db: f64,
    /// Closed interval the per-device activity probabilities are drawn from.
    pub rho_range: [f64; 2],
    /// Per-device channel variances. Empty means all ones.
    #[serde(default)]
    pub beta: Vec<f64>,
    pub activity_threshold: f64,
    pub max_iters: usize,
    pub tol_eps: f64,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n: 128,
            m: 32,
            l: 64,
            snr_db: 10.0,
            rho_range: [0.01, 0.05],
            beta: Vec::new(),
            activity_threshold: 0.9,
            max_iters: 50,
            tol_eps: 1e-4,
            seed: 1,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| {
            Err(Error::Config {
                field,
                reason: reason.to_string(),
            })
        };
        if self.n == 0 {
            return bad("n", "must be >= 1");
        }
        if self.m == 0 {
            return bad("m", "must be >= 1");
        }
        if self.l == 0 {
            return bad("l", "must be >= 1");
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db", "must be finite");
        }
        let [lo, hi] = self.rho_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return bad("rho_range", "need 0 < lo <= hi < 1");
        }
        if !self.beta.is_empty() {
            if self.beta.len() != self.n {
                return bad("beta", "length must equal n (or be empty for all ones)");
            }
            if self.beta.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
                return bad("beta", "entries must be positive and finite");
            }
        }
        if !(self.activity_threshold > 0.0 && self.activity_threshold < 1.0) {
            return bad("activity_threshold", "must lie in (0, 1)");
        }
        if self.max_iters == 0 {
            return bad("max_iters", "must be >= 1");
        }
        if !(self.tol_eps > 0.0 && self.tol_eps.is_finite()) {
            return bad("tol_eps", "must be positive");
        }
        Ok(())
    }

    /// Noise variance implied by the SNR definition `SNR = 1/σ_w²`.
    pub fn noise_variance(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    pub fn beta_vector(&self) -> Vec<f64> {
        if self.beta.is_empty() {
            vec![1.0; self.n]
        } else {
            self.beta.clone()
        }
    }
}

/// Independent RNG streams derived from one root seed, so each random
/// component of a scenario can be regenerated on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Pilots = 0,
    ActivityProbabilities = 1,
    Activity = 2,
    Channels = 3,
    Noise = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// One realization of the grant-free uplink.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T: Real> {
    /// `L × N` pilot matrix with unit-norm columns.
    pub phi: Array2<C<T>>,
    /// Activity probabilities `ρₙ`.
    pub rho: Array1<T>,
    /// Channel variances `βₙ`.
    pub beta: Array1<T>,
    /// True activity.
    pub xi: Vec<bool>,
    /// `N × M` channel matrix; inactive rows are zero.
    pub h: Array2<C<T>>,
    /// `L × M` received pilots.
    pub y: Array2<C<T>>,
    pub sigma_w2: T,
}

impl<T: Real> Scenario<T> {
    /// Assembles a scenario from its parts, checking that all shapes agree.
    pub fn from_parts(
        phi: Array2<C<T>>,
        rho: Array1<T>,
        beta: Array1<T>,
        xi: Vec<bool>,
        h: Array2<C<T>>,
        y: Array2<C<T>>,
        sigma_w2: T,
    ) -> Result<Self> {
        let (l, n) = phi.dim();
        let m = h.ncols();
        if rho.len() != n {
            return Err(dimension("Scenario::from_parts", n, format!("rho len {}", rho.len())));
        }
        if beta.len() != n {
            return Err(dimension("Scenario::from_parts", n, format!("beta len {}", beta.len())));
        }
        if xi.len() != n {
            return Err(dimension("Scenario::from_parts", n, format!("xi len {}", xi.len())));
        }
        if h.nrows() != n {
            return Err(dimension("Scenario::from_parts", n, format!("h rows {}", h.nrows())));
        }
        if y.dim() != (l, m) {
            return Err(dimension(
                "Scenario::from_parts",
                format!("{l}x{m}"),
                format!("{:?}", y.dim()),
            ));
        }
        if !(sigma_w2 > T::zero()) {
            return Err(Error::Domain {
                op: "Scenario::from_parts",
                detail: "sigma_w2 must be positive".into(),
            });
        }
        Ok(Self {
            phi,
            rho,
            beta,
            xi,
            h,
            y,
            sigma_w2,
        })
    }

    pub fn n(&self) -> usize {
        self.phi.ncols()
    }

    pub fn l(&self) -> usize {
        self.phi.nrows()
    }

    pub fn m(&self) -> usize {
        self.h.ncols()
    }

    pub fn active_count(&self) -> usize {
        self.xi.iter().filter(|&&a| a).count()
    }

    /// SHA-256 over the canonical little-endian `f64` encoding of
    /// `Φ, H, Y, ξ, ρ, β, σ_w²`, as a lowercase hex string.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for dim in [self.l(), self.n(), self.m()] {
            hasher.update((dim as u64).to_le_bytes());
        }
        for arr in [&self.phi, &self.h, &self.y] {
            for z in arr.iter() {
                hasher.update(z.re.as_f64().to_le_bytes());
                hasher.update(z.im.as_f64().to_le_bytes());
            }
        }
        hasher.update(self.xi.iter().map(|&a| a as u8).collect::<Vec<_>>());
        for v in self.rho.iter().chain(self.beta.iter()) {
            hasher.update(v.as_f64().to_le_bytes());
        }
        hasher.update(self.sigma_w2.as_f64().to_le_bytes());
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Draws a circularly-symmetric complex Gaussian sample `CN(0, var)`.
pub fn sample_cn<T: Real, R: Rng + ?Sized>(rng: &mut R, var: f64) -> C<T> {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C::new(T::of(s * re), T::of(s * im))
}

/// `L × N` pilot matrix with entries `exp(jπκ)/√L`, `κ ~ U[-1, 1]` i.i.d.
pub fn generate_pilots<T: Real, R: Rng + ?Sized>(l: usize, n: usize, rng: &mut R) -> Array2<C<T>> {
    let scale = 1.0 / (l as f64).sqrt();
    let mut phi = Array2::from_elem((l, n), C::new(T::zero(), T::zero()));
    // column-major draw order: device n's pilot is one contiguous κ vector
    for col in 0..n {
        for row in 0..l {
            let kappa: f64 = rng.gen_range(-1.0..=1.0);
            let angle = std::f64::consts::PI * kappa;
            phi[[row, col]] = C::new(T::of(scale * angle.cos()), T::of(scale * angle.sin()));
        }
    }
    phi
}

/// Activity probabilities drawn uniformly from `[lo, hi]`.
pub fn sample_rho<T: Real, R: Rng + ?Sized>(n: usize, range: [f64; 2], rng: &mut R) -> Array1<T> {
    let [lo, hi] = range;
    (0..n)
        .map(|_| if lo == hi { T::of(lo) } else { T::of(rng.gen_range(lo..=hi)) })
        .collect()
}

/// Independent Bernoulli draws `P(ξₙ = 1) = ρₙ`.
pub fn sample_activity<T: Real, R: Rng + ?Sized>(rho: &[T], rng: &mut R) -> Vec<bool> {
    rho.iter()
        .map(|&p| {
            let u: f64 = rng.gen();
            u < p.as_f64()
        })
        .collect()
}

/// Channel matrix: row `n` is zero when device `n` is inactive, otherwise
/// i.i.d. `CN(0, βₙ)` across the `M` antennas.
pub fn sample_channels<T: Real, R: Rng + ?Sized>(
    xi: &[bool],
    beta: &[T],
    m: usize,
    rng: &mut R,
) -> Array2<C<T>> {
    assert_eq!(xi.len(), beta.len(), "activity and beta lengths differ");
    let mut h = Array2::from_elem((xi.len(), m), C::new(T::zero(), T::zero()));
    for (n, (&active, &b)) in xi.iter().zip(beta).enumerate() {
        if !active {
            continue;
        }
        for col in 0..m {
            h[[n, col]] = sample_cn(rng, b.as_f64());
        }
    }
    h
}

/// `Φ H + W` with `W` i.i.d. `CN(0, σ_w²)`.
pub fn observe<T: Real, R: Rng + ?Sized>(
    phi: &Array2<C<T>>,
    h: &Array2<C<T>>,
    sigma_w2: f64,
    rng: &mut R,
) -> Array2<C<T>> {
    let (l, n) = phi.dim();
    let m = h.ncols();
    let mut y = Array2::from_elem((l, m), C::new(T::zero(), T::zero()));
    for row in 0..l {
        for k in 0..n {
            let coef = phi[[row, k]];
            let hk = h.row(k);
            if hk.iter().all(|z| z.re.is_zero() && z.im.is_zero()) {
                continue;
            }
            for col in 0..m {
                y[[row, col]] = y[[row, col]] + coef * hk[col];
            }
        }
        for col in 0..m {
            y[[row, col]] = y[[row, col]] + sample_cn::<T, _>(rng, sigma_w2);
        }
    }
    y
}

/// Generates one scenario from `config` using its root seed.
pub fn synthesize<T: Real>(config: &SystemConfig) -> Result<Scenario<T>> {
    config.validate()?;
    let rho = sample_rho::<T, _>(
        config.n,
        config.rho_range,
        &mut stream_rng(config.seed, Stream::ActivityProbabilities),
    );
    let xi = sample_activity(
        rho.as_slice().expect("contiguous"),
        &mut stream_rng(config.seed, Stream::Activity),
    );
    synthesize_with_activity(config, rho, xi)
}

/// Same as [`synthesize`] but with caller-supplied activity probabilities and
/// activity pattern; pilots, channels and noise still come from the seed.
pub fn synthesize_with_activity<T: Real>(
    config: &SystemConfig,
    rho: Array1<T>,
    xi: Vec<bool>,
) -> Result<Scenario<T>> {
    config.validate()?;
    if rho.len() != config.n || xi.len() != config.n {
        return Err(dimension(
            "synthesize_with_activity",
            config.n,
            format!("rho {} / xi {}", rho.len(), xi.len()),
        ));
    }
    let seed = config.seed;
    let phi = generate_pilots::<T, _>(config.l, config.n, &mut stream_rng(seed, Stream::Pilots));
    let beta: Array1<T> = config.beta_vector().into_iter().map(T::of).collect();
    let h = sample_channels(
        &xi,
        beta.as_slice().expect("contiguous"),
        config.m,
        &mut stream_rng(seed, Stream::Channels),
    );
    let sigma_w2 = config.noise_variance();
    let y = observe(&phi, &h, sigma_w2, &mut stream_rng(seed, Stream::Noise));
    Scenario::from_parts(phi, rho, beta, xi, h, y, T::of(sigma_w2))
}

/// Self-describing JSON form of a [`Scenario`]. Complex matrices are stored
/// row-major as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub sigma_w2: f64,
    pub rho: Vec<f64>,
    pub beta: Vec<f64>,
    pub xi: Vec<u8>,
    pub phi: Vec<[f64; 2]>,
    pub h: Vec<[f64; 2]>,
    pub y: Vec<[f64; 2]>,
}

pub const SCENARIO_FORMAT: &str = "msgamp-scenario";
pub const SCENARIO_VERSION: u32 = 1;

fn pairs<T: Real>(a: &Array2<C<T>>) -> Vec<[f64; 2]> {
    a.iter().map(|z| [z.re.as_f64(), z.im.as_f64()]).collect()
}

fn unpairs<T: Real>(rows: usize, cols: usize, v: &[[f64; 2]], what: &str) -> Result<Array2<C<T>>> {
    if v.len() != rows * cols {
        return Err(Error::Format(format!(
            "{what}: expected {} entries, found {}",
            rows * cols,
            v.len()
        )));
    }
    let data = v.iter().map(|[re, im]| C::new(T::of(*re), T::of(*im))).collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))
}

impl<T: Real> From<&Scenario<T>> for ScenarioFile {
    fn from(s: &Scenario<T>) -> Self {
        Self {
            format: SCENARIO_FORMAT.to_string(),
            version: SCENARIO_VERSION,
            n: s.n(),
            m: s.m(),
            l: s.l(),
            sigma_w2: s.sigma_w2.as_f64(),
            rho: s.rho.iter().map(|v| v.as_f64()).collect(),
            beta: s.beta.iter().map(|v| v.as_f64()).collect(),
            xi: s.xi.iter().map(|&a| a as u8).collect(),
            phi: pairs(&s.phi),
            h: pairs(&s.h),
            y: pairs(&s.y),
        }
    }
}

impl ScenarioFile {
    pub fn into_scenario<T: Real>(self) -> Result<Scenario<T>> {
        if self.format != SCENARIO_FORMAT {
            return Err(Error::Format(format!("unknown format tag `{}`", self.format)));
        }
        if self.version != SCENARIO_VERSION {
            return Err(Error::Format(format!("unsupported version {}", self.version)));
        }
        if self.xi.iter().any(|&v| v > 1) {
            return Err(Error::Format("xi entries must be 0 or 1".into()));
        }
        let phi = unpairs(self.l, self.n, &self.phi, "phi")?;
        let h = unpairs(self.n, self.m, &self.h, "h")?;
        let y = unpairs(self.l, self.m, &self.y, "y")?;
        Scenario::from_parts(
            phi,
            self.rho.into_iter().map(T::of).collect(),
            self.beta.into_iter().map(T::of).collect(),
            self.xi.into_iter().map(|v| v == 1).collect(),
            h,
            y,
            T::of(self.sigma_w2),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}
