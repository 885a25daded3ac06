//! Closed-form (Gaussian-approximation) link evaluation.
//!
//! Interference variances are expectations over the ray and cluster arrival
//! processes. Each is evaluated as a truncated series of Erlang-weighted
//! integrals computed by adaptive quadrature. The analysis always models ray
//! arrivals as a single Poisson process of rate `λ₂`, and reads the decay
//! constant `γ` of the first cluster as `γ₀`.
//!
//! Energies carry the per-pulse energy `E_p` and the frequency scale
//! `F(ω₀)`; both cancel in the SINR.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::channel::{erlang_pdf, ChannelParams};
use crate::error::{Error, Result};
use crate::modem::{SystemParams, Toggles};
use crate::pulse::{CorrelationKernel, PulseShape};
use crate::quadrature::{integrate_named, QuadratureSpec};

/// Which autocorrelation the analysis integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    /// Closed-form autocorrelation of the infinite-support doublet.
    #[default]
    Continuous,
    /// Tabulated autocorrelation of the truncated pulse the simulator uses.
    Truncated,
}

/// Displacement of the `s`-th previous pulse in the accumulated ISI energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsiDelay {
    /// `s·T_f + τ_code`: pulse `s` sits `s` frames back.
    #[default]
    Frame,
    /// `s·T_s + τ_code`, the literal hop-span reading.
    HopSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisOptions {
    pub kernel: KernelChoice,
    pub isi_delay: IsiDelay,
}

impl AnalysisOptions {
    pub fn kernel_for(&self, pulse: &PulseShape) -> CorrelationKernel {
        match self.kernel {
            KernelChoice::Continuous => CorrelationKernel::continuous(pulse),
            KernelChoice::Truncated => CorrelationKernel::truncated(pulse),
        }
    }
}

/// Mean energy of the desired ray, `Ω₀ = 1/(γ₀·[(1−β)λ₁ + βλ₂ + 1])`.
pub fn omega0(chan: &ChannelParams) -> f64 {
    chan.reference_ray_power()
}

/// Series cap for a Poisson count of mean `mu`.
fn series_cap(mu: f64) -> u64 {
    (mu + 20.0 * mu.sqrt() + 2.0).ceil() as u64
}

/// `Σ_{k≥2} ∫_lo^hi exp(−y/γ)·f_p(y; k)·r2(y) dy`, with `f_p(·; k)` the
/// Erlang(k−1, λ) ray-delay density (zero for `y < 0`).
///
/// Terms are added until one falls below `series_rel_cutoff` times the
/// running sum past the Erlang mode, or `max_k` is reached when given.
pub fn ray_kernel_series(
    lambda: f64,
    gamma: f64,
    lo: f64,
    hi: f64,
    r2: &dyn Fn(f64) -> f64,
    knots: &[f64],
    quad: &QuadratureSpec,
    max_k: Option<u64>,
) -> Result<f64> {
    let upper = hi.max(0.0);
    if !(upper > lo) {
        return Ok(0.0);
    }
    let mu = lambda * upper;
    let cap = series_cap(mu);
    let mut points: Vec<f64> = knots.to_vec();
    points.push(0.0);
    let mut sum = 0.0;
    let mut k: u64 = 2;
    loop {
        let f = |y: f64| {
            if y < 0.0 {
                0.0
            } else {
                (-y / gamma).exp() * erlang_pdf(k - 1, lambda, y) * r2(y)
            }
        };
        let term = integrate_named(|| format!("ray series term k = {k}"), f, lo, hi, &points, quad)?;
        sum += term;
        if let Some(m) = max_k {
            if k >= m {
                return Ok(sum);
            }
        } else if (k - 1) as f64 > mu && term.abs() <= quad.series_rel_cutoff * sum.abs() {
            return Ok(sum);
        }
        if k >= cap {
            return Err(Error::Series {
                what: "ray delays".into(),
                terms: (k - 1) as usize,
            });
        }
        k += 1;
    }
}

/// `Σ_{k=2}^{K} f_p(y; k)` summed in closed form: `λ·Q(K−1, λy)`.
fn ray_density_sum(lambda: f64, k_max: u64, y: f64) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    let mu = lambda * y;
    if mu == 0.0 {
        return lambda;
    }
    lambda * gamma_ur((k_max - 1) as f64, mu)
}

/// `σ²_IASI = F·E_p·N_s²·Ω₀·Σ_k ∫_0^{T_m} e^{−y/γ₀} f_p(y) R²(y) dy`.
pub fn sigma_iasi2(
    chan: &ChannelParams,
    sys: &SystemParams,
    kernel: &CorrelationKernel,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let tm = kernel.duration_ns();
    let series = ray_kernel_series(
        chan.ray_rate_2,
        chan.ray_decay_ns,
        0.0,
        tm,
        &|y| kernel.eval(y).powi(2),
        &kernel.knots(0.0, tm, 0.0),
        quad,
        None,
    )?;
    Ok(scale(chan, sys) * omega0(chan) * series)
}

fn scale(chan: &ChannelParams, sys: &SystemParams) -> f64 {
    let ns = sys.pulses_per_symbol as f64;
    chan.frequency_scale() * sys.pulse_energy * ns * ns
}

/// Accumulated mean first-ray energy of the previous `N_I·N_s − 1` pulses.
///
/// For each previous pulse `s` and cluster `l`, averages over the hop-code
/// offset `τ ∈ [−T_s, T_s]` the mean energy at delay `D = s·T_f + τ` of a ray
/// in cluster `l`, weighted by the density of `T_l ≤ D` and the probability
/// that the next cluster arrives in `[D, τ_max]`. Cluster 1 arrives at 0.
pub fn omega_sigma(
    chan: &ChannelParams,
    sys: &SystemParams,
    opts: &AnalysisOptions,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let pulses = sys.history_pulses(chan.max_delay_ns);
    if pulses <= 1 {
        return Ok(0.0);
    }
    let ts = sys.hop_span();
    let step = match opts.isi_delay {
        IsiDelay::Frame => sys.frame_period(),
        IsiDelay::HopSpan => ts,
    };
    let lam = chan.cluster_rate;
    let tmax = chan.max_delay_ns;
    let o0 = omega0(chan);
    let soft = (lam * tmax).ceil() as u64 + 2;
    let cap = (lam * tmax + 20.0 * (lam * tmax).sqrt() + 10.0).ceil() as u64;

    // P(D < T_{l+1} < τ_max) with T_{l+1} ~ Erlang(l, Λ)
    let tail = |l: u64, d: f64| (gamma_lr(l as f64, lam * tmax) - gamma_lr(l as f64, lam * d)).max(0.0);

    let cluster_term = |l: u64, d: f64| -> Result<f64> {
        if !(d > 0.0 && d < tmax) {
            return Ok(0.0);
        }
        let p = tail(l, d);
        if p == 0.0 {
            return Ok(0.0);
        }
        if l == 1 {
            return Ok(o0 * (-d / chan.gamma_l(0.0)).exp() * p);
        }
        let f = |t: f64| {
            (-t / chan.cluster_decay_ns).exp() * (-(d - t) / chan.gamma_l(t)).exp() * erlang_pdf(l - 1, lam, t)
        };
        let inner = integrate_named(|| format!("cluster arrival, l = {l}"), f, 0.0, d, &[], quad)?;
        Ok(o0 * p * inner)
    };

    let mut total = 0.0;
    for s in 1..pulses {
        let centre = s as f64 * step;
        let mut sum_s = 0.0;
        let mut l: u64 = 1;
        loop {
            let mut failure = None;
            let g = |tau: f64| match cluster_term(l, centre + tau) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            let avg = integrate_named(
                || format!("hop-code average, s = {s}, l = {l}"),
                g,
                -ts,
                ts,
                &[tmax - centre, -centre],
                quad,
            )? / (2.0 * ts);
            if let Some(e) = failure {
                return Err(e);
            }
            sum_s += avg;
            if l >= soft && avg.abs() <= quad.series_rel_cutoff * sum_s.abs() {
                break;
            }
            if l >= cap {
                return Err(Error::Series {
                    what: format!("clusters for previous pulse {s}"),
                    terms: l as usize,
                });
            }
            l += 1;
        }
        total += sum_s;
    }
    Ok(total)
}

/// `σ²_ISI = F·E_p·N_s²·Ω_Σ·Σ_k ∫_{−T_m}^{T_m} e^{−y/γ₀} f_p(y) R²(y) dy`.
pub fn sigma_isi2(
    chan: &ChannelParams,
    sys: &SystemParams,
    kernel: &CorrelationKernel,
    omega_sigma: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if omega_sigma == 0.0 {
        return Ok(0.0);
    }
    let tm = kernel.duration_ns();
    let series = ray_kernel_series(
        chan.ray_rate_2,
        chan.ray_decay_ns,
        -tm,
        tm,
        &|y| kernel.eval(y).powi(2),
        &kernel.knots(-tm, tm, 0.0),
        quad,
        None,
    )?;
    Ok(scale(chan, sys) * omega_sigma * series)
}

/// The double integral shared by both MUI terms:
/// `Σ_k ∫_{−T_f/2}^{T_f/2} ∫_{−z}^{T_m−z} e^{−y/γ₀} f_p(y) R²(y+z) dy dz`,
/// with `y` restricted to `f_p`'s support `y ≥ 0`.
pub fn mui_kernel_integral(
    chan: &ChannelParams,
    sys: &SystemParams,
    kernel: &CorrelationKernel,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let tm = kernel.duration_ns();
    let half = 0.5 * sys.frame_period();
    let lambda = chan.ray_rate_2;
    let gamma = chan.ray_decay_ns;
    let k_max = series_cap(lambda * (half + tm));
    let z_hi = half.min(tm);
    let mut failure = None;
    let outer = |z: f64| {
        // substitute u = y + z ∈ [max(z, 0), T_m]
        let lo = z.max(0.0);
        let inner = |u: f64| (-(u - z) / gamma).exp() * ray_density_sum(lambda, k_max, u - z) * kernel.eval(u).powi(2);
        match integrate_named(|| format!("interferer ray delay at z = {z}"), inner, lo, tm, &kernel.knots(lo, tm, 0.0), quad) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let v = integrate_named(|| "interferer delay".into(), outer, -half, z_hi, &[0.0], quad)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(v)
}

/// `σ²_MUI = F·E_p·R_b·N_s²·N_u·(Ω₀ + Ω_Σ)·J`, with `J` from
/// [`mui_kernel_integral`].
pub fn sigma_mui2(
    chan: &ChannelParams,
    sys: &SystemParams,
    kernel: &CorrelationKernel,
    omega_sigma: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if sys.interferers == 0 {
        return Ok(0.0);
    }
    let j = mui_kernel_integral(chan, sys, kernel, quad)?;
    Ok(mui_from_kernel(chan, sys, omega_sigma, j))
}

fn mui_from_kernel(chan: &ChannelParams, sys: &SystemParams, omega_sigma: f64, j: f64) -> f64 {
    scale(chan, sys) * sys.bit_rate_per_ns() * sys.interferers as f64 * (omega0(chan) + omega_sigma) * j
}

/// Noise PSD `N₀` putting `E_p·Ω_d·N_s/N₀` at the requested Eb/N0, where
/// `Ω_d` is the mean energy of the desired ray.
pub fn noise_psd(sys: &SystemParams, desired_energy: f64, ebn0_db: f64) -> f64 {
    sys.pulse_energy * desired_energy * sys.pulses_per_symbol as f64 / db_to_linear(ebn0_db)
}

/// `E_b = F·E_p·Ω₀·N_s²` and `σ²_n = F·N_s·N₀/2` at a given `N₀`.
pub fn energy_and_noise(chan: &ChannelParams, sys: &SystemParams, n0: f64) -> (f64, f64) {
    let f = chan.frequency_scale();
    let ns = sys.pulses_per_symbol as f64;
    (scale(chan, sys) * omega0(chan), f * ns * n0 / 2.0)
}

/// `(E_b, σ²_n)` at the requested Eb/N0. In the absence of interference the
/// SINR is `2·Eb/N0`, so the BER falls back to `½·erfc(√(Eb/N0))`.
pub fn eb_and_noise(chan: &ChannelParams, sys: &SystemParams, ebn0_db: f64) -> (f64, f64) {
    energy_and_noise(chan, sys, noise_psd(sys, omega0(chan), ebn0_db))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `E_b/(σ²_n + σ²_IASI + σ²_ISI + σ²_MUI)`.
pub fn sinr(eb: f64, sigma_n2: f64, sigma_iasi2: f64, sigma_isi2: f64, sigma_mui2: f64) -> f64 {
    eb / (sigma_n2 + sigma_iasi2 + sigma_isi2 + sigma_mui2)
}

/// `½·erfc(√(SINR/2))`.
pub fn ber_bpsk(sinr: f64) -> f64 {
    0.5 * libm::erfc((sinr / 2.0).max(0.0).sqrt())
}

/// Closed-form BER of antipodal signalling in AWGN, `½·erfc(√(Eb/N0))`.
pub fn ber_awgn(ebn0_db: f64) -> f64 {
    0.5 * libm::erfc(db_to_linear(ebn0_db).sqrt())
}

/// Analytical link state at one Eb/N0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkAnalysis {
    pub ebn0_db: f64,
    pub eb: f64,
    pub sigma_n2: f64,
    pub sigma_iasi2: f64,
    pub sigma_isi2: f64,
    pub omega_sigma: f64,
    pub sigma_mui2: f64,
    pub sinr: f64,
    pub ber: f64,
}

impl LinkAnalysis {
    pub fn sinr_db(&self) -> f64 {
        linear_to_db(self.sinr)
    }
}

/// Eb/N0-independent part of the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterferenceBudget {
    pub omega0: f64,
    pub omega_sigma: f64,
    pub sigma_iasi2: f64,
    pub sigma_isi2: f64,
    pub sigma_mui2: f64,
}

impl InterferenceBudget {
    /// Evaluate all variances; disabled components are set to zero.
    pub fn compute(
        chan: &ChannelParams,
        sys: &SystemParams,
        kernel: &CorrelationKernel,
        opts: &AnalysisOptions,
        toggles: Toggles,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        chan.validate()?;
        sys.validate()?;
        quad.validate()?;
        let needs_sigma = toggles.isi || (toggles.mui && sys.interferers > 0);
        let omega_sigma = if needs_sigma {
            omega_sigma(chan, sys, opts, quad)?
        } else {
            0.0
        };
        Ok(InterferenceBudget {
            omega0: omega0(chan),
            omega_sigma,
            sigma_iasi2: if toggles.iasi { sigma_iasi2(chan, sys, kernel, quad)? } else { 0.0 },
            sigma_isi2: if toggles.isi {
                sigma_isi2(chan, sys, kernel, omega_sigma, quad)?
            } else {
                0.0
            },
            sigma_mui2: if toggles.mui {
                sigma_mui2(chan, sys, kernel, omega_sigma, quad)?
            } else {
                0.0
            },
        })
    }

    pub fn at(&self, chan: &ChannelParams, sys: &SystemParams, ebn0_db: f64) -> LinkAnalysis {
        let (eb, sigma_n2) = eb_and_noise(chan, sys, ebn0_db);
        let s = sinr(eb, sigma_n2, self.sigma_iasi2, self.sigma_isi2, self.sigma_mui2);
        LinkAnalysis {
            ebn0_db,
            eb,
            sigma_n2,
            sigma_iasi2: self.sigma_iasi2,
            sigma_isi2: self.sigma_isi2,
            omega_sigma: self.omega_sigma,
            sigma_mui2: self.sigma_mui2,
            sinr: s,
            ber: ber_bpsk(s),
        }
    }
}
