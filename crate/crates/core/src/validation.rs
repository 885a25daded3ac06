//! Independent oracles for the fast paths.
//!
//! * a waveform-domain correlator that samples the received signal and the
//!   template on a fine grid, to check the tap-domain statistic;
//! * plain Monte Carlo estimates of the interference expectations, drawn from
//!   exponential arrival chains instead of Erlang densities, to check the
//!   quadrature engine;
//! * sampling checks of the channel distributions.
//!
//! [`run_suite`] bundles them for the `validate` subcommand.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analysis::{
    ber_awgn, omega0, omega_sigma, sigma_iasi2, sigma_mui2, AnalysisOptions, IsiDelay,
};
use crate::channel::{
    cluster_energy, generate_windowed, pdf_cluster_delay, pdf_code_interval, pdf_ray_delay,
    sample_cluster_arrivals, sample_nakagami, sample_ray_arrivals, ChannelParams, ChannelRealization,
    DelayWindows, PdpFit, RayModel,
};
use crate::error::Result;
use crate::modem::{decision_statistic, gen_th_sequence, template_times, PulseTrain, SystemParams, Toggles, UserSignal};
use crate::montecarlo::{ChannelSource, Simulation, StopRule};
use crate::pulse::{autocorrelation, CorrelationKernel, PulseShape};
use crate::quadrature::{integrate, QuadratureSpec};
use crate::rng::StreamKey;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: String, elapsed: Duration) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            detail,
            seconds: elapsed.as_secs_f64(),
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampledEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl SampledEstimate {
    fn from_sums(sum: f64, sum_sq: f64, n: u64) -> Self {
        let n = n as f64;
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        SampledEstimate {
            mean,
            std_error: (var / n).sqrt(),
        }
    }

    pub fn relative_error(&self, reference: f64) -> f64 {
        (self.mean - reference).abs() / reference.abs()
    }
}

// ---------------------------------------------------------------------------
// correlator

/// Correlator output computed by sampling `r(t)` and `v(t)` with
/// `intervals` Simpson panels across each template pulse.
pub fn waveform_decision(
    sys: &SystemParams,
    pulse: &PulseShape,
    users: &[UserSignal<'_>],
    intervals: usize,
) -> Result<f64> {
    let templates = template_times(sys, users[0].train)?;
    let tf = sys.frame_period();
    let tm = pulse.duration_ns();
    let half = 0.5 * tm;
    let sign = users[0].channel.reference_tap().amplitude.signum();
    let n = intervals + intervals % 2;
    let mut z = 0.0;
    for &t0 in &templates {
        // every (arrival, weight) whose pulse overlaps this template pulse
        let mut arrivals = Vec::new();
        for s in users {
            let scale = (sys.pulse_energy * s.channel.frequency_scale()).sqrt();
            for i in 0..s.train.len() {
                let a = s.train.pulse_time(i, tf, sys.hop_slot_ns);
                for tap in s.channel.taps() {
                    let at = a + tap.delay_ns;
                    if (at - t0).abs() < tm {
                        arrivals.push((at, s.train.bits[i] as f64 * scale * tap.amplitude));
                    }
                }
            }
        }
        let h = tm / n as f64;
        let mut acc = 0.0;
        for m in 0..=n {
            let t = t0 - half + m as f64 * h;
            let r: f64 = arrivals.iter().map(|&(at, w)| w * pulse.value(t - at)).sum();
            let w = if m == 0 || m == n {
                1.0
            } else if m % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * r * pulse.value(t - t0);
        }
        z += acc * h / 3.0;
    }
    Ok(sign * z)
}

/// Random single-user channel with `1..=max_taps` taps within `span_ns`,
/// reference tap at 0.
pub fn random_small_channel<R: Rng + ?Sized>(rng: &mut R, max_taps: usize, span_ns: f64) -> ChannelRealization {
    let n = rng.random_range(1..=max_taps);
    let mut taps = vec![(0.0, if rng.random::<bool>() { 1.0 } else { -1.0 })];
    while taps.len() < n {
        let d: f64 = rng.random_range(0.01..span_ns);
        if taps.iter().all(|t| (t.0 - d).abs() > 1e-6) {
            let mag: f64 = rng.random_range(0.05..0.3);
            taps.push((d, if rng.random::<bool>() { mag } else { -mag }));
        }
    }
    ChannelRealization::from_taps(&taps).expect("valid random channel")
}

/// Largest relative gap between the tap-domain and waveform-domain
/// correlator outputs over `channels` random channels of at most 10 taps.
pub fn correlator_oracle(channels: usize, seed: u64) -> Result<f64> {
    let pulse = PulseShape::standard();
    let table = autocorrelation(&pulse);
    let sys = SystemParams {
        bit_rate_mbps: 15.0,
        ..SystemParams::default()
    };
    let tau_max = 2.0;
    let history = sys.history_pulses(tau_max) as i64;
    let root = StreamKey::new(seed);
    let mut worst: f64 = 0.0;
    for c in 0..channels as u64 {
        let mut rng = root.child(c).rng();
        let ch = random_small_channel(&mut rng, 10, 1.5);
        let train = PulseTrain::random(&sys, -history, 0, 0.0, true, &mut rng);
        let users = [UserSignal { channel: &ch, train: &train }];
        let tap = decision_statistic(&sys, tau_max, &table, &users, 0.0)?.z_total;
        let wave = waveform_decision(&sys, &pulse, &users, 6400)?;
        worst = worst.max((tap - wave).abs() / wave.abs());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// interference expectations by sampling

fn scale(chan: &ChannelParams, sys: &SystemParams) -> f64 {
    let ns = sys.pulses_per_symbol as f64;
    chan.frequency_scale() * sys.pulse_energy * ns * ns
}

/// Sum of `g` over the points of a rate-`lambda` Poisson process on
/// `(a, b]`, generated as an exponential chain from `a`.
fn poisson_sum<R: Rng + ?Sized>(rng: &mut R, lambda: f64, a: f64, b: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    let mut y = a;
    let mut acc = 0.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        y += e / lambda;
        if y > b {
            return acc;
        }
        acc += g(y);
    }
}

/// `σ²_IASI` by sampling ray chains of rate `λ₂` from the reference ray.
pub fn iasi_by_sampling(
    chan: &ChannelParams,
    sys: &SystemParams,
    kernel: &CorrelationKernel,
    samples: u64,
    seed: u64,
) -> SampledEstimate {
    let tm = kernel.duration_ns();
    let gamma = chan.ray_decay_ns;
    let mut rng = StreamKey::new(seed).rng();
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let v = poisson_sum(&mut rng, chan.ray_rate_2, 0.0, tm, |y| (-y / gamma).exp() * kernel.eval(y).powi(2));
        s1 += v;
        s2 += v * v;
    }
    let f = scale(chan, sys) * omega0(chan);
    let e = SampledEstimate::from_sums(s1, s2, samples);
    SampledEstimate {
        mean: f * e.mean,
        std_error: f * e.std_error,
    }
}

/// `Ω_Σ` by sampling the hop-code offset and two independent cluster
/// arrival chains (one for `T_l`, one for `T_{l+1}`).
pub fn omega_sigma_by_sampling(
    chan: &ChannelParams,
    sys: &SystemParams,
    opts: &AnalysisOptions,
    samples: u64,
    seed: u64,
) -> SampledEstimate {
    let pulses = sys.history_pulses(chan.max_delay_ns);
    if pulses <= 1 {
        return SampledEstimate {
            mean: 0.0,
            std_error: 0.0,
        };
    }
    let ts = sys.hop_span();
    let step = match opts.isi_delay {
        IsiDelay::Frame => sys.frame_period(),
        IsiDelay::HopSpan => ts,
    };
    let tmax = chan.max_delay_ns;
    let o0 = omega0(chan);
    let mut rng = StreamKey::new(seed).rng();
    // cluster arrivals up to and including the first one past τ_max
    let chain = |rng: &mut crate::rng::StreamRng| {
        let mut v = vec![0.0];
        let mut t = 0.0;
        while t <= tmax {
            let e: f64 = Exp1.sample(rng);
            t += e / chan.cluster_rate;
            v.push(t);
        }
        v
    };
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let tau: f64 = rng.random_range(-ts..ts);
        let a = chain(&mut rng);
        let b = chain(&mut rng);
        let mut v = 0.0;
        for s in 1..pulses {
            let d = s as f64 * step + tau;
            if !(d > 0.0 && d < tmax) {
                continue;
            }
            for (l, &t_l) in a.iter().enumerate() {
                if t_l >= d {
                    break;
                }
                let next = b.get(l + 1).copied().unwrap_or(f64::INFINITY);
                if next > d && next < tmax {
                    v += o0 * (-t_l / chan.cluster_decay_ns).exp() * (-(d - t_l) / chan.gamma_l(t_l)).exp();
                }
            }
        }
        s1 += v;
        s2 += v * v;
    }
    SampledEstimate::from_sums(s1, s2, samples)
}

/// `σ²_MUI` by sampling the interferer delay `z ~ U[−T_f/2, T_f/2]` and the
/// interferer's rays on `[max(0, −z), T_m − z]`.
pub fn mui_by_sampling(
    chan: &ChannelParams,
    sys: &SystemParams,
    kernel: &CorrelationKernel,
    omega_sigma: f64,
    samples: u64,
    seed: u64,
) -> SampledEstimate {
    let tm = kernel.duration_ns();
    let tf = sys.frame_period();
    let gamma = chan.ray_decay_ns;
    let mut rng = StreamKey::new(seed).rng();
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let z: f64 = rng.random_range(-0.5 * tf..0.5 * tf);
        let v = if z >= tm {
            0.0
        } else {
            poisson_sum(&mut rng, chan.ray_rate_2, (-z).max(0.0), tm - z, |y| {
                (-y / gamma).exp() * kernel.eval(y + z).powi(2)
            })
        };
        s1 += v;
        s2 += v * v;
    }
    let f = scale(chan, sys) * sys.bit_rate_per_ns() * sys.interferers as f64 * (omega0(chan) + omega_sigma) * tf;
    let e = SampledEstimate::from_sums(s1, s2, samples);
    SampledEstimate {
        mean: f * e.mean,
        std_error: f * e.std_error,
    }
}

/// Quadrature vs sampling for `σ²_IASI`, `Ω_Σ` and `σ²_MUI` at 15 Mbps with
/// one interferer. Returns `(name, quadrature, sampled)` triples.
pub fn quadrature_oracles(samples: u64, seed: u64) -> Result<Vec<(&'static str, f64, SampledEstimate)>> {
    let chan = ChannelParams::office_los();
    let sys = SystemParams {
        interferers: 1,
        ..SystemParams::default()
    };
    let pulse = PulseShape::standard();
    let opts = AnalysisOptions::default();
    let kernel = opts.kernel_for(&pulse);
    let quad = QuadratureSpec::default();
    let root = StreamKey::new(seed);
    let os = omega_sigma(&chan, &sys, &opts, &quad)?;
    Ok(vec![
        (
            "sigma_iasi2",
            sigma_iasi2(&chan, &sys, &kernel, &quad)?,
            iasi_by_sampling(&chan, &sys, &kernel, samples, root.child(1).raw()),
        ),
        (
            "omega_sigma",
            os,
            omega_sigma_by_sampling(&chan, &sys, &opts, samples, root.child(2).raw()),
        ),
        (
            "sigma_mui2",
            sigma_mui2(&chan, &sys, &kernel, os, &quad)?,
            mui_by_sampling(&chan, &sys, &kernel, os, samples, root.child(3).raw()),
        ),
    ])
}

// ---------------------------------------------------------------------------
// channel statistics

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapStatistics {
    pub mean_ray_gap_ns: f64,
    pub mean_cluster_gap_ns: f64,
    pub ray_gaps: u64,
    pub cluster_gaps: u64,
}

/// Empirical mean ray and cluster inter-arrival gaps over `gaps` of each.
pub fn gap_statistics(params: &ChannelParams, gaps: u64, seed: u64) -> GapStatistics {
    let root = StreamKey::new(seed);
    let mut p = params.clone();
    let (mut ray_sum, mut ray_n) = (0.0, 0u64);
    let mut rng = root.child(0).rng();
    while ray_n < gaps {
        let d = sample_ray_arrivals(&p, 1e3 / p.ray_rate_2, &mut rng);
        for w in d.windows(2) {
            if ray_n < gaps {
                ray_sum += w[1] - w[0];
                ray_n += 1;
            }
        }
    }
    p.max_delay_ns = 1e3 / p.cluster_rate;
    let (mut cl_sum, mut cl_n) = (0.0, 0u64);
    let mut rng = root.child(1).rng();
    while cl_n < gaps {
        let t = sample_cluster_arrivals(&p, &mut rng);
        for w in t.windows(2) {
            if cl_n < gaps {
                cl_sum += w[1] - w[0];
                cl_n += 1;
            }
        }
    }
    GapStatistics {
        mean_ray_gap_ns: ray_sum / ray_n as f64,
        mean_cluster_gap_ns: cl_sum / cl_n as f64,
        ray_gaps: ray_n,
        cluster_gaps: cl_n,
    }
}

/// Fitted intra-cluster decay constant from `realizations` channels, using
/// cluster-1 rays within the first `span_ns`.
pub fn pdp_decay_fit(params: &ChannelParams, realizations: u64, span_ns: f64, seed: u64) -> Option<f64> {
    let root = StreamKey::new(seed);
    let windows = DelayWindows::new(vec![(0.0, span_ns)]);
    let mut fit = PdpFit::new(0.5, span_ns);
    for i in 0..realizations {
        fit.add(&generate_windowed(params, root.child(i), &windows));
    }
    fit.decay_constant()
}

/// `E[α²]/Ω` over `draws` Nakagami samples.
pub fn nakagami_second_moment(m: f64, omega: f64, draws: u64, seed: u64) -> Result<SampledEstimate> {
    let mut rng = StreamKey::new(seed).rng();
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let a = sample_nakagami(m, omega, &mut rng)?;
        let x = a * a / omega;
        s1 += x;
        s2 += x * x;
    }
    Ok(SampledEstimate::from_sums(s1, s2, draws))
}

/// Normalization of every arrival density, as `(label, integral)`.
pub fn pdf_normalizations(params: &ChannelParams, hop_span_ns: f64) -> Result<Vec<(String, f64)>> {
    let quad = QuadratureSpec::default();
    let mut out = Vec::new();
    for l in [2u64, 3, 5] {
        let hi = (l as f64 + 40.0 * (l as f64).sqrt()) / params.cluster_rate;
        let v = integrate(|x| pdf_cluster_delay(params, l, x).unwrap_or(f64::NAN), 0.0, hi, &[], &quad)
            .map(|e| e.value)
            .unwrap_or(f64::NAN);
        out.push((format!("cluster delay l={l}"), v));
    }
    for k in [2u64, 4, 8] {
        let hi = (k as f64 + 40.0 * (k as f64).sqrt()) / params.ray_rate_2;
        let v = integrate(|x| pdf_ray_delay(params, k, x).unwrap_or(f64::NAN), 0.0, hi, &[], &quad)
            .map(|e| e.value)
            .unwrap_or(f64::NAN);
        out.push((format!("ray delay k={k}"), v));
    }
    let v = integrate(|x| pdf_code_interval(hop_span_ns, x), -hop_span_ns, hop_span_ns, &[], &quad)
        .map(|e| e.value)
        .unwrap_or(f64::NAN);
    out.push(("hop-code interval".into(), v));
    Ok(out)
}

/// Chi-square p-value of hop-index uniformity over `draws` draws.
pub fn hop_uniformity_p_value(hop_count: u32, draws: usize, seed: u64) -> f64 {
    let codes = gen_th_sequence(hop_count, draws, &mut StreamKey::new(seed).rng());
    let mut counts = vec![0u64; hop_count as usize];
    for c in codes {
        counts[c as usize - 1] += 1;
    }
    let expect = draws as f64 / hop_count as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    let dist = ChiSquared::new((hop_count - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

// ---------------------------------------------------------------------------
// suite

/// Simulated BER of the single-tap channel with no interference against
/// `½·erfc(√(Eb/N0))`. Each point is checked at three binomial standard
/// deviations. Returns `(ebn0_db, simulated, reference, trials)` rows.
pub fn awgn_rows(grid: &[f64], trials: u64, seed: u64) -> Result<Vec<(f64, f64, f64, u64)>> {
    let stop = StopRule {
        min_errors: u64::MAX,
        max_trials: trials,
        min_trials: trials,
        batch_size: 4096,
    };
    let sim = Simulation::new(
        &ChannelParams::office_los(),
        &SystemParams::default(),
        &PulseShape::standard(),
        ChannelSource::SingleTap,
        Toggles::none(),
        stop,
        seed,
    )?;
    Ok(sim
        .run_points(grid)?
        .into_iter()
        .map(|p| (p.ebn0_db, p.ber, ber_awgn(p.ebn0_db), p.trials))
        .collect())
}

pub fn within_binomial(simulated: f64, reference: f64, trials: u64, k: f64) -> bool {
    (simulated - reference).abs() <= k * (reference * (1.0 - reference) / trials as f64).sqrt()
}

/// Depth of the `validate` run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteLevel {
    /// Reduced sample counts, a few seconds.
    Quick,
    /// Sample counts of the acceptance criteria.
    Full,
}

/// Run the oracle suite.
pub fn run_suite(level: SuiteLevel, seed: u64) -> Result<Vec<CheckResult>> {
    let full = level == SuiteLevel::Full;
    let root = StreamKey::new(seed);
    let mut out = Vec::new();

    let t = Instant::now();
    let trials = if full { 100_000 } else { 20_000 };
    let rows = awgn_rows(&[0.0, 2.0, 4.0, 6.0, 8.0], trials, root.child(1).raw())?;
    let ok = rows.iter().all(|r| within_binomial(r.1, r.2, r.3, 3.0));
    let detail = rows
        .iter()
        .map(|r| format!("{} dB: {:.3e} vs {:.3e}", r.0, r.1, r.2))
        .collect::<Vec<_>>()
        .join("; ");
    out.push(CheckResult::new("awgn closed form", ok, detail, t.elapsed()));

    let t = Instant::now();
    let mut single = ChannelParams::office_los();
    single.ray_model = RayModel::SinglePoisson;
    let g = gap_statistics(&single, 100_000, root.child(2).raw());
    let ok = (g.mean_ray_gap_ns * single.ray_rate_2 - 1.0).abs() < 0.02
        && (g.mean_cluster_gap_ns * single.cluster_rate - 1.0).abs() < 0.02;
    out.push(CheckResult::new(
        "mean arrival gaps",
        ok,
        format!(
            "ray {:.4} ns (1/λ₂ = {:.4}), cluster {:.2} ns (1/Λ = {:.2})",
            g.mean_ray_gap_ns,
            single.mean_ray_interval(),
            g.mean_cluster_gap_ns,
            single.mean_cluster_interval()
        ),
        t.elapsed(),
    ));

    let t = Instant::now();
    let n = if full { 100 } else { 20 };
    let worst = correlator_oracle(n, root.child(3).raw())?;
    out.push(CheckResult::new(
        "tap vs waveform correlator",
        worst < 1e-3,
        format!("max relative gap {worst:.2e} over {n} channels"),
        t.elapsed(),
    ));

    let t = Instant::now();
    let samples = if full { 10_000_000 } else { 1_000_000 };
    for (name, q, s) in quadrature_oracles(samples, root.child(4).raw())? {
        let tol: f64 = if name == "omega_sigma" { 0.02 } else { 0.01 };
        let tol = if full { tol } else { tol.max(5.0 * s.std_error / q) };
        let rel = s.relative_error(q);
        out.push(CheckResult::new(
            format!("quadrature vs sampling: {name}"),
            rel < tol,
            format!("{q:.6e} vs {:.6e} ± {:.1e} (rel {rel:.2e})", s.mean, s.std_error),
            t.elapsed(),
        ));
    }

    let t = Instant::now();
    let chan = ChannelParams::office_los();
    let norms = pdf_normalizations(&chan, SystemParams::default().hop_span())?;
    let ok = norms.iter().all(|(_, v)| (v - 1.0).abs() < 1e-6);
    let detail = norms
        .iter()
        .map(|(l, v)| format!("{l}: {:.2e}", v - 1.0))
        .collect::<Vec<_>>()
        .join("; ");
    out.push(CheckResult::new("density normalization", ok, detail, t.elapsed()));

    let t = Instant::now();
    let draws = if full { 1_000_000 } else { 200_000 };
    let mut detail = Vec::new();
    let mut ok = true;
    for (i, m) in [0.5, 1.0, 3.0].into_iter().enumerate() {
        let e = nakagami_second_moment(m, 2.0, draws, root.child(5).child(i as u64).raw())?;
        ok &= (e.mean - 1.0).abs() < if full { 0.005 } else { 0.02 };
        detail.push(format!("m={m}: {:.4}", e.mean));
    }
    out.push(CheckResult::new("nakagami second moment", ok, detail.join("; "), t.elapsed()));

    let t = Instant::now();
    let reps = if full { 10_000 } else { 2_000 };
    let fit = pdp_decay_fit(&chan, reps, 30.0, root.child(6).raw());
    let gamma = chan.gamma_l(0.0);
    out.push(CheckResult::new(
        "intra-cluster decay fit",
        fit.is_some_and(|g| (g / gamma - 1.0).abs() < 0.1),
        format!("fitted {:?} ns vs γ₀ = {gamma} ns", fit),
        t.elapsed(),
    ));

    let t = Instant::now();
    let p = hop_uniformity_p_value(16, 100_000, root.child(7).raw());
    out.push(CheckResult::new(
        "hop index uniformity",
        p > 0.01,
        format!("chi-square p = {p:.3}"),
        t.elapsed(),
    ));

    let t = Instant::now();
    let mut shadow = ChannelParams::office_los();
    shadow.cluster_shadowing_db = 3.0;
    let mut rng = root.child(8).rng();
    let tl = 20.0;
    let n = 100_000;
    let mean_db: f64 = (0..n)
        .map(|_| 10.0 * cluster_energy(&shadow, tl, &mut rng).log10())
        .sum::<f64>()
        / n as f64;
    let expect = 10.0 * (-tl / shadow.cluster_decay_ns).exp().log10();
    out.push(CheckResult::new(
        "cluster shadowing mean",
        (mean_db - expect).abs() < 0.1,
        format!("{mean_db:.3} dB vs {expect:.3} dB"),
        t.elapsed(),
    ));

    Ok(out)
}
