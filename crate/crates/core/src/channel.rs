//! IEEE 802.15.4a indoor-office LOS channel.
//!
//! A realization is a Saleh–Valenzuela tap set: clusters arrive as a Poisson
//! process of rate `Λ` starting at `T₁ = 0`, rays within a cluster arrive as a
//! (possibly two-component mixture) Poisson process starting at `τ₁,ₗ = 0`,
//! and each tap carries a Nakagami-m magnitude with an exponential
//! power-delay profile and an equiprobable ±1 polarity.
//!
//! Random draws are organised so that any tap can be regenerated on its own:
//! cluster arrivals, each cluster's ray sequence and each tap's fading come
//! from separate keyed streams. [`generate_windowed`] exploits this to build
//! only the taps a correlator can actually see.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::rng::StreamKey;

const STREAM_CLUSTERS: u64 = 0;
const STREAM_RAYS: u64 = 1;
const STREAM_FADING: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayModel {
    /// Gaps drawn from `Exp(λ₂)` only.
    SinglePoisson,
    /// Gaps drawn from `β·Exp(λ₁) + (1−β)·Exp(λ₂)`.
    #[default]
    MixturePoisson,
}

/// Statistical parameters of the channel model.
///
/// Defaults are the IEEE 802.15.4a office-LOS (CM3) values. `Λ` and `λ₂` are
/// the only ones this model pins down itself; the rest are external defaults
/// taken from the 802.15.4a final report and can be overridden in the run
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Cluster arrival rate `Λ` (1/ns).
    pub cluster_rate: f64,
    /// Ray arrival rate `λ₁` (1/ns) of the sparse mixture component.
    pub ray_rate_1: f64,
    /// Ray arrival rate `λ₂` (1/ns) of the dense component.
    pub ray_rate_2: f64,
    /// Mixture probability `β`.
    pub mixture_beta: f64,
    /// Inter-cluster decay constant `Γ` (ns).
    pub cluster_decay_ns: f64,
    /// Intra-cluster decay intercept `γ₀` (ns).
    pub ray_decay_ns: f64,
    /// Slope `k_γ` of the intra-cluster decay against cluster arrival time.
    pub ray_decay_slope: f64,
    /// Standard deviation of the cluster shadowing (dB).
    pub cluster_shadowing_db: f64,
    /// Mean of `10·log10(m)` for the Nakagami m-factor.
    pub nakagami_m_mean_db: f64,
    /// Standard deviation of `10·log10(m)`.
    pub nakagami_m_std_db: f64,
    /// Frequency-dependence exponent `κ`.
    pub pathloss_kappa: f64,
    /// Frequency-dependence constant `C₀`.
    pub frequency_constant: f64,
    /// Reference angular frequency `ω₀` (rad/ns).
    pub omega_ref: f64,
    /// Centre angular frequency `ω_c` (rad/ns).
    pub omega_center: f64,
    /// Observation window `τ_max` (ns).
    pub max_delay_ns: f64,
    pub ray_model: RayModel,
    /// Hold cluster 1 unshadowed and its first ray at its mean power, so the
    /// desired ray always carries `Ω₀`.
    pub fixed_reference_path: bool,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::office_los()
    }
}

impl ChannelParams {
    pub fn office_los() -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        ChannelParams {
            cluster_rate: 0.016,
            ray_rate_1: 0.19,
            ray_rate_2: 2.97,
            mixture_beta: 0.0184,
            cluster_decay_ns: 14.6,
            ray_decay_ns: 6.4,
            ray_decay_slope: 0.0,
            cluster_shadowing_db: 3.0,
            nakagami_m_mean_db: 0.42,
            nakagami_m_std_db: 0.31,
            pathloss_kappa: 0.03,
            frequency_constant: 1.0,
            omega_ref: two_pi * 5.0,
            omega_center: two_pi * 5.0,
            max_delay_ns: 200.0,
            ray_model: RayModel::MixturePoisson,
            fixed_reference_path: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cluster_rate", self.cluster_rate),
            ("ray_rate_1", self.ray_rate_1),
            ("ray_rate_2", self.ray_rate_2),
            ("cluster_decay_ns", self.cluster_decay_ns),
            ("ray_decay_ns", self.ray_decay_ns),
            ("max_delay_ns", self.max_delay_ns),
            ("frequency_constant", self.frequency_constant),
            ("omega_ref", self.omega_ref),
            ("omega_center", self.omega_center),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.mixture_beta) {
            return Err(Error::param("mixture_beta", "must lie in [0, 1]"));
        }
        if !(self.ray_rate_2 > self.ray_rate_1) {
            return Err(Error::param(
                "ray_rate_2",
                "the dense ray rate λ₂ must exceed λ₁",
            ));
        }
        if self.ray_decay_slope < 0.0 || !self.ray_decay_slope.is_finite() {
            return Err(Error::param("ray_decay_slope", "must be non-negative"));
        }
        for (name, v) in [
            ("cluster_shadowing_db", self.cluster_shadowing_db),
            ("nakagami_m_std_db", self.nakagami_m_std_db),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be non-negative"));
            }
        }
        if !self.nakagami_m_mean_db.is_finite() || !self.pathloss_kappa.is_finite() {
            return Err(Error::param("nakagami_m_mean_db", "must be finite"));
        }
        Ok(())
    }

    /// `(1−β)λ₁ + βλ₂ + 1`, the ray-power normalizer.
    pub fn mixture_normalizer(&self) -> f64 {
        (1.0 - self.mixture_beta) * self.ray_rate_1 + self.mixture_beta * self.ray_rate_2 + 1.0
    }

    /// Intra-cluster decay constant `γₗ = k_γ·Tₗ + γ₀`.
    pub fn gamma_l(&self, cluster_arrival_ns: f64) -> f64 {
        self.ray_decay_slope * cluster_arrival_ns + self.ray_decay_ns
    }

    /// Mean ray power `E[α²ₖ,ₗ] = Ωₗ·exp(−τ/γₗ) / (γₗ·[(1−β)λ₁ + βλ₂ + 1])`.
    pub fn ray_mean_power(&self, cluster_energy: f64, gamma_l: f64, tau_ns: f64) -> f64 {
        cluster_energy * (-tau_ns / gamma_l).exp() / (gamma_l * self.mixture_normalizer())
    }

    /// Mean power `Ω₀` of the first ray of the first cluster.
    pub fn reference_ray_power(&self) -> f64 {
        1.0 / (self.ray_decay_ns * self.mixture_normalizer())
    }

    /// Expected energy of tap (1,1) as generated, including the lognormal
    /// shadowing bias when cluster 1 is shadowed.
    pub fn expected_reference_energy(&self) -> f64 {
        if self.fixed_reference_path {
            self.reference_ray_power()
        } else {
            let s = self.cluster_shadowing_db * std::f64::consts::LN_10 / 10.0;
            self.reference_ray_power() * (0.5 * s * s).exp()
        }
    }

    /// `F(ω) = C₀·(ω/ω₀)^(−κ)`.
    pub fn frequency_dependence(&self, omega: f64) -> f64 {
        self.frequency_constant * (omega / self.omega_ref).powf(-self.pathloss_kappa)
    }

    /// Constant-term approximation `F(ω) ≈ F(ω₀)` applied as one energy scale.
    pub fn frequency_scale(&self) -> f64 {
        self.frequency_dependence(self.omega_ref)
    }

    pub fn mean_ray_interval(&self) -> f64 {
        1.0 / self.ray_rate_2
    }

    pub fn mean_cluster_interval(&self) -> f64 {
        1.0 / self.cluster_rate
    }
}

/// Cluster arrival times: `T₁ = 0`, then i.i.d. `Exp(Λ)` gaps, stopping before
/// the first arrival beyond `τ_max`.
pub fn sample_cluster_arrivals<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> Vec<f64> {
    let mut arrivals = vec![0.0];
    let mut t = 0.0;
    loop {
        let gap: f64 = Exp1.sample(rng);
        t += gap / params.cluster_rate;
        if t > params.max_delay_ns {
            return arrivals;
        }
        arrivals.push(t);
    }
}

fn ray_gap<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> f64 {
    let rate = match params.ray_model {
        RayModel::SinglePoisson => params.ray_rate_2,
        RayModel::MixturePoisson => {
            if rng.random::<f64>() < params.mixture_beta {
                params.ray_rate_1
            } else {
                params.ray_rate_2
            }
        }
    };
    let e: f64 = Exp1.sample(rng);
    e / rate
}

/// Ray delays within one cluster, relative to the cluster arrival:
/// `τ₁ = 0` and gaps from the configured ray model, up to `window_ns`.
pub fn sample_ray_arrivals<R: Rng + ?Sized>(
    params: &ChannelParams,
    window_ns: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut delays = vec![0.0];
    let mut tau = 0.0;
    loop {
        tau += ray_gap(params, rng);
        if tau > window_ns {
            return delays;
        }
        delays.push(tau);
    }
}

/// Cluster energy `Ωₗ = exp(−Tₗ/Γ)·10^(X/10)` with `X ~ N(0, M²)` in dB.
pub fn cluster_energy<R: Rng + ?Sized>(params: &ChannelParams, cluster_arrival_ns: f64, rng: &mut R) -> f64 {
    let x: f64 = StandardNormal.sample(rng);
    let db = 10.0 * (-cluster_arrival_ns / params.cluster_decay_ns).exp().log10()
        + params.cluster_shadowing_db * x;
    10f64.powf(db / 10.0)
}

/// Lognormal m-factor, clamped below at 0.5.
pub fn sample_m_factor<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> f64 {
    let x: f64 = StandardNormal.sample(rng);
    let db = params.nakagami_m_mean_db + params.nakagami_m_std_db * x;
    10f64.powf(db / 10.0).max(0.5)
}

/// Nakagami-m magnitude: `α² ~ Gamma(m, Ω/m)`.
pub fn sample_nakagami<R: Rng + ?Sized>(m: f64, omega: f64, rng: &mut R) -> Result<f64> {
    if !(m >= 0.5) {
        return Err(Error::param("m", format!("Nakagami m must be at least 0.5, got {m}")));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::param("omega", "must be positive"));
    }
    let g = Gamma::new(m, omega / m).map_err(|e| Error::param("m", e.to_string()))?;
    let x: f64 = g.sample(rng);
    Ok(x.sqrt())
}

/// Erlang density of order `n ≥ 1` and rate `rate` at `x`.
pub fn erlang_pdf(n: u64, rate: f64, x: f64) -> f64 {
    if x < 0.0 || n == 0 {
        return 0.0;
    }
    let k = n - 1;
    if k == 0 {
        return rate * (-rate * x).exp();
    }
    if x == 0.0 {
        return 0.0;
    }
    let lx = rate * x;
    (rate.ln() - lx + k as f64 * lx.ln() - ln_factorial(k)).exp()
}

/// Density of the delay of cluster `l ≥ 2` relative to cluster 1:
/// `Λ·exp(−Λx)·(Λx)^(l−2)/(l−2)!`.
pub fn pdf_cluster_delay(params: &ChannelParams, l: u64, x: f64) -> Result<f64> {
    if l < 2 {
        return Err(Error::param("l", "cluster index must be at least 2"));
    }
    Ok(erlang_pdf(l - 1, params.cluster_rate, x))
}

/// Density of the delay of ray `k ≥ 2` relative to the first ray, single
/// Poisson process of rate `λ₂`.
pub fn pdf_ray_delay(params: &ChannelParams, k: u64, x: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::param("k", "ray index must be at least 2"));
    }
    Ok(erlang_pdf(k - 1, params.ray_rate_2, x))
}

/// Uniform density `1/(2T_s)` of the hop-code offset on `[−T_s, T_s]`.
pub fn pdf_code_interval(hop_span_ns: f64, x: f64) -> f64 {
    if x.abs() <= hop_span_ns {
        0.5 / hop_span_ns
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tap {
    /// Cluster index `l ≥ 1`.
    pub cluster: u32,
    /// Ray index `k ≥ 1` within the cluster.
    pub ray: u32,
    /// Absolute delay `Tₗ + τₖ,ₗ` (ns).
    pub delay_ns: f64,
    /// Signed amplitude `αₖ,ₗ`.
    pub amplitude: f64,
}

impl Tap {
    pub fn is_reference(&self) -> bool {
        self.cluster == 1 && self.ray == 1
    }
}

/// One sampled impulse response. Taps are kept sorted by absolute delay; the
/// reference tap (1,1) at delay 0 is always first.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    taps: Vec<Tap>,
    cluster_arrivals: Vec<f64>,
    cluster_decays: Vec<f64>,
    cluster_energies: Vec<f64>,
    frequency_scale: f64,
}

impl ChannelRealization {
    /// Ideal channel with a single tap at delay 0.
    pub fn single_tap(amplitude: f64) -> Self {
        ChannelRealization {
            taps: vec![Tap {
                cluster: 1,
                ray: 1,
                delay_ns: 0.0,
                amplitude,
            }],
            cluster_arrivals: vec![0.0],
            cluster_decays: vec![f64::INFINITY],
            cluster_energies: vec![amplitude * amplitude],
            frequency_scale: 1.0,
        }
    }

    /// Hand-built single-cluster channel from `(delay, amplitude)` pairs.
    /// One tap must sit at delay 0.
    pub fn from_taps(taps: &[(f64, f64)]) -> Result<Self> {
        let mut sorted: Vec<(f64, f64)> = taps.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted.first().map(|t| t.0) != Some(0.0) {
            return Err(Error::param("taps", "a tap at delay 0 is required"));
        }
        for w in sorted.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::param("taps", "delays must be distinct"));
            }
        }
        if sorted.iter().any(|t| !(t.1.is_finite() && t.1 != 0.0)) {
            return Err(Error::param("taps", "amplitudes must be finite and nonzero"));
        }
        let taps = sorted
            .iter()
            .enumerate()
            .map(|(i, &(d, a))| Tap {
                cluster: 1,
                ray: i as u32 + 1,
                delay_ns: d,
                amplitude: a,
            })
            .collect();
        Ok(ChannelRealization {
            taps,
            cluster_arrivals: vec![0.0],
            cluster_decays: vec![f64::INFINITY],
            cluster_energies: vec![1.0],
            frequency_scale: 1.0,
        })
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn reference_tap(&self) -> &Tap {
        &self.taps[0]
    }

    pub fn cluster_arrivals(&self) -> &[f64] {
        &self.cluster_arrivals
    }

    pub fn cluster_decays(&self) -> &[f64] {
        &self.cluster_decays
    }

    pub fn cluster_energies(&self) -> &[f64] {
        &self.cluster_energies
    }

    pub fn frequency_scale(&self) -> f64 {
        self.frequency_scale
    }

    pub fn max_delay(&self) -> f64 {
        self.taps.last().map_or(0.0, |t| t.delay_ns)
    }

    /// Taps with delay strictly inside `(lo, hi)`.
    pub fn taps_between(&self, lo: f64, hi: f64) -> &[Tap] {
        let start = self.taps.partition_point(|t| t.delay_ns <= lo);
        let end = self.taps.partition_point(|t| t.delay_ns < hi);
        &self.taps[start..end.max(start)]
    }

    /// CSV export with columns `l,k,delay_ns,amplitude`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["l", "k", "delay_ns", "amplitude"])?;
        for t in &self.taps {
            w.write_record(&[
                t.cluster.to_string(),
                t.ray.to_string(),
                format!("{:.12e}", t.delay_ns),
                format!("{:.12e}", t.amplitude),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sorted, merged set of delay intervals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelayWindows {
    spans: Vec<(f64, f64)>,
}

impl DelayWindows {
    pub fn new(mut spans: Vec<(f64, f64)>) -> Self {
        spans.retain(|s| s.1 >= s.0);
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(spans.len());
        for s in spans {
            match merged.last_mut() {
                Some(last) if s.0 <= last.1 => last.1 = last.1.max(s.1),
                _ => merged.push(s),
            }
        }
        DelayWindows { spans: merged }
    }

    pub fn contains(&self, x: f64) -> bool {
        let i = self.spans.partition_point(|s| s.1 < x);
        i < self.spans.len() && self.spans[i].0 <= x
    }

    pub fn horizon(&self) -> f64 {
        self.spans.last().map_or(0.0, |s| s.1)
    }

    pub fn spans(&self) -> &[(f64, f64)] {
        &self.spans
    }
}

fn tap_amplitude(
    params: &ChannelParams,
    key: StreamKey,
    reference: bool,
    cluster_energy: f64,
    gamma_l: f64,
    tau: f64,
) -> f64 {
    let mut rng = key.rng();
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let power = params.ray_mean_power(cluster_energy, gamma_l, tau);
    let magnitude = if reference && params.fixed_reference_path {
        power.sqrt()
    } else {
        let m = sample_m_factor(params, &mut rng);
        sample_nakagami(m, power, &mut rng).expect("m-factor clamped to 0.5")
    };
    sign * magnitude.max(f64::MIN_POSITIVE)
}

fn build(params: &ChannelParams, key: StreamKey, windows: Option<&DelayWindows>) -> ChannelRealization {
    let horizon = windows.map_or(params.max_delay_ns, |w| w.horizon().min(params.max_delay_ns));
    let arrivals = sample_cluster_arrivals(params, &mut key.child(STREAM_CLUSTERS).rng());
    let fading = key.child(STREAM_FADING);
    let mut taps = Vec::new();
    let mut decays = Vec::with_capacity(arrivals.len());
    let mut energies = Vec::with_capacity(arrivals.len());

    for (i, &t_l) in arrivals.iter().enumerate() {
        let l = i as u64 + 1;
        let mut rng = key.child(STREAM_RAYS).child(l).rng();
        let energy = if l == 1 && params.fixed_reference_path {
            1.0
        } else {
            cluster_energy(params, t_l, &mut rng)
        };
        let gamma = params.gamma_l(t_l);
        decays.push(gamma);
        energies.push(energy);
        if t_l > horizon && l > 1 {
            continue;
        }
        let window = (params.max_delay_ns - t_l).min(horizon - t_l).max(0.0);
        let mut tau = 0.0;
        let mut k: u64 = 1;
        loop {
            let delay = t_l + tau;
            let reference = l == 1 && k == 1;
            if reference || windows.map_or(true, |w| w.contains(delay)) {
                taps.push(Tap {
                    cluster: l as u32,
                    ray: k as u32,
                    delay_ns: delay,
                    amplitude: tap_amplitude(params, fading.child(l).child(k), reference, energy, gamma, tau),
                });
            }
            tau += ray_gap(params, &mut rng);
            if tau > window {
                break;
            }
            k += 1;
        }
    }
    taps.sort_by(|a, b| a.delay_ns.total_cmp(&b.delay_ns));
    ChannelRealization {
        taps,
        cluster_arrivals: arrivals,
        cluster_decays: decays,
        cluster_energies: energies,
        frequency_scale: params.frequency_scale(),
    }
}

/// Full realization over `[0, τ_max]`; a pure function of `(params, key)`.
pub fn generate_realization(params: &ChannelParams, key: StreamKey) -> ChannelRealization {
    build(params, key, None)
}

/// The taps of [`generate_realization`]`(params, key)` whose delays fall in
/// `windows`, plus the reference tap. Amplitudes are bit-identical to the full
/// realization.
pub fn generate_windowed(params: &ChannelParams, key: StreamKey, windows: &DelayWindows) -> ChannelRealization {
    build(params, key, Some(windows))
}

/// Empirical power-delay profile of cluster-1 rays (excluding the reference
/// ray), binned by delay and fitted with a log-linear least-squares line.
#[derive(Debug, Clone)]
pub struct PdpFit {
    bin_ns: f64,
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl PdpFit {
    pub fn new(bin_ns: f64, span_ns: f64) -> Self {
        let n = (span_ns / bin_ns).ceil() as usize;
        PdpFit {
            bin_ns,
            sums: vec![0.0; n],
            counts: vec![0; n],
        }
    }

    pub fn add(&mut self, realization: &ChannelRealization) {
        let energy = realization.cluster_energies()[0];
        for t in realization.taps().iter().filter(|t| t.cluster == 1 && t.ray > 1) {
            let bin = (t.delay_ns / self.bin_ns) as usize;
            if bin < self.sums.len() {
                self.sums[bin] += t.amplitude * t.amplitude / energy;
                self.counts[bin] += 1;
            }
        }
    }

    /// Fitted decay constant (ns) of the mean tap power.
    pub fn decay_constant(&self) -> Option<f64> {
        let pts: Vec<(f64, f64, f64)> = self
            .sums
            .iter()
            .zip(&self.counts)
            .enumerate()
            .filter(|(_, (_, &c))| c >= 10)
            .map(|(i, (&s, &c))| ((i as f64 + 0.5) * self.bin_ns, (s / c as f64).ln(), c as f64))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let w: f64 = pts.iter().map(|p| p.2).sum();
        let mx = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / w;
        let my = pts.iter().map(|p| p.1 * p.2).sum::<f64>() / w;
        let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        (slope < 0.0).then(|| -1.0 / slope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ChannelParams {
        ChannelParams::office_los()
    }

    #[test]
    fn defaults_validate() {
        assert!(params().validate().is_ok());
        let mut p = params();
        p.mixture_beta = 1.5;
        assert!(p.validate().is_err());
        let mut p = params();
        p.ray_rate_1 = 3.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.max_delay_ns = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn gamma_l_is_linear() {
        let mut p = params();
        assert_eq!(p.gamma_l(0.0), p.ray_decay_ns);
        p.ray_decay_slope = 0.0;
        assert_eq!(p.gamma_l(100.0), p.ray_decay_ns);
        p.ray_decay_slope = 0.5;
        p.ray_decay_ns = 2.0;
        assert_eq!(p.gamma_l(10.0), 7.0);
    }

    #[test]
    fn cluster_energy_without_shadowing() {
        let mut p = params();
        p.cluster_shadowing_db = 0.0;
        let mut rng = StreamKey::new(1).rng();
        assert!((cluster_energy(&p, 0.0, &mut rng) - 1.0).abs() < 1e-12);
        let e = cluster_energy(&p, p.cluster_decay_ns, &mut rng);
        assert!((e - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn ray_mean_power_values() {
        let p = params();
        let g = p.gamma_l(0.0);
        let p0 = p.ray_mean_power(1.0, g, 0.0);
        assert!((p0 - 1.0 / (g * p.mixture_normalizer())).abs() < 1e-15);
        assert!((p0 - p.reference_ray_power()).abs() < 1e-15);
        let p1 = p.ray_mean_power(1.0, g, g);
        assert!((p1 - p0 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn reference_ray_power_value() {
        // 1 / (6.4 · (0.9816·0.19 + 0.0184·2.97 + 1))
        let expect = 1.0 / (6.4 * (0.9816 * 0.19 + 0.0184 * 2.97 + 1.0));
        assert!((params().reference_ray_power() - expect).abs() < 1e-15);
    }

    #[test]
    fn mean_intervals() {
        let p = params();
        assert!((p.mean_ray_interval() - 0.3367).abs() < 1e-4);
        assert!((p.mean_cluster_interval() - 62.5).abs() < 1e-12);
        let mut q = p.clone();
        q.ray_rate_2 = 1.0;
        assert_eq!(q.mean_ray_interval(), 1.0);
    }

    #[test]
    fn frequency_scale_is_constant() {
        let mut p = params();
        p.frequency_constant = 2.5;
        assert!((p.frequency_scale() - 2.5).abs() < 1e-15);
        assert!(p.frequency_dependence(2.0 * p.omega_ref) < 2.5);
    }

    #[test]
    fn nakagami_rejects_small_m() {
        let mut rng = StreamKey::new(2).rng();
        assert!(sample_nakagami(0.4, 1.0, &mut rng).is_err());
        assert!(sample_nakagami(0.5, 1.0, &mut rng).is_ok());
    }

    #[test]
    fn short_window_single_cluster() {
        let mut p = params();
        p.max_delay_ns = 1e-9;
        let mut rng = StreamKey::new(3).rng();
        assert_eq!(sample_cluster_arrivals(&p, &mut rng), vec![0.0]);
    }

    #[test]
    fn pdf_edges() {
        let p = params();
        assert!(pdf_cluster_delay(&p, 1, 1.0).is_err());
        assert!(pdf_ray_delay(&p, 1, 1.0).is_err());
        let x = 3.0;
        assert!((pdf_cluster_delay(&p, 2, x).unwrap() - 0.016 * (-0.016 * x).exp()).abs() < 1e-15);
        assert!((pdf_ray_delay(&p, 2, x).unwrap() - 2.97 * (-2.97 * x).exp()).abs() < 1e-15);
        assert_eq!(pdf_code_interval(4.0, 0.0), 0.125);
        assert_eq!(pdf_code_interval(4.0, 6.0), 0.0);
    }

    #[test]
    fn realization_structure() {
        let p = params();
        let r = generate_realization(&p, StreamKey::new(11));
        let first = r.reference_tap();
        assert!(first.is_reference() && first.delay_ns == 0.0);
        assert!(r.taps().iter().all(|t| t.delay_ns <= p.max_delay_ns));
        assert!(r.taps().iter().all(|t| t.amplitude.is_finite() && t.amplitude != 0.0));
        assert_eq!(r.cluster_arrivals()[0], 0.0);
        // within each cluster delays increase with ray index and ray 1 sits at Tₗ
        for (i, &t_l) in r.cluster_arrivals().iter().enumerate() {
            let mut in_cluster: Vec<&Tap> = r.taps().iter().filter(|t| t.cluster as usize == i + 1).collect();
            in_cluster.sort_by_key(|t| t.ray);
            assert_eq!(in_cluster[0].delay_ns, t_l);
            assert!(in_cluster.windows(2).all(|w| w[1].delay_ns > w[0].delay_ns));
        }
        assert!((r.reference_tap().amplitude.abs() - p.reference_ray_power().sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tiny_window_keeps_only_early_cluster_one_taps() {
        let mut p = params();
        p.max_delay_ns = 0.1;
        p.cluster_rate = 1e-6;
        let r = generate_realization(&p, StreamKey::new(5));
        assert!(r.taps().iter().all(|t| t.cluster == 1 && t.delay_ns <= 0.1));
        assert_eq!(r.taps()[0].delay_ns, 0.0);
    }

    #[test]
    fn realization_is_deterministic() {
        let p = params();
        assert_eq!(
            generate_realization(&p, StreamKey::new(9)),
            generate_realization(&p, StreamKey::new(9))
        );
        assert_ne!(
            generate_realization(&p, StreamKey::new(9)),
            generate_realization(&p, StreamKey::new(10))
        );
    }

    #[test]
    fn windowed_is_subset_of_full() {
        let p = params();
        let windows = DelayWindows::new(vec![(0.0, 0.5), (60.0, 61.0), (133.0, 134.5)]);
        for seed in 0..20 {
            let key = StreamKey::new(seed);
            let full = generate_realization(&p, key);
            let part = generate_windowed(&p, key, &windows);
            let expect: Vec<Tap> = full
                .taps()
                .iter()
                .copied()
                .filter(|t| t.is_reference() || windows.contains(t.delay_ns))
                .collect();
            assert_eq!(part.taps(), expect.as_slice());
            assert_eq!(part.cluster_arrivals(), full.cluster_arrivals());
        }
    }

    #[test]
    fn delay_windows_merge() {
        let w = DelayWindows::new(vec![(5.0, 6.0), (0.0, 1.0), (0.5, 2.0), (7.0, 6.5)]);
        assert_eq!(w.spans(), &[(0.0, 2.0), (5.0, 6.0)]);
        assert!(w.contains(1.5) && w.contains(5.0) && !w.contains(3.0) && !w.contains(6.1));
        assert_eq!(w.horizon(), 6.0);
    }

    #[test]
    fn taps_between_is_open_interval() {
        let r = ChannelRealization::from_taps(&[(0.0, 1.0), (0.2, 0.5), (0.3, -0.4)]).unwrap();
        assert_eq!(r.taps_between(0.0, 0.3).len(), 1);
        assert_eq!(r.taps_between(-0.1, 0.31).len(), 3);
        assert_eq!(r.taps_between(0.5, 0.2).len(), 0);
    }

    #[test]
    fn from_taps_requires_origin() {
        assert!(ChannelRealization::from_taps(&[(0.1, 1.0)]).is_err());
        assert!(ChannelRealization::from_taps(&[(0.0, 0.0)]).is_err());
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let r = ChannelRealization::from_taps(&[(0.0, 1.0), (0.2, 0.5)]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "l,k,delay_ns,amplitude");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("1,2,"));
    }
}
