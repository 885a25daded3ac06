//! Second-derivative Gaussian transmit pulse and its autocorrelation.
//!
//! The pulse is
//!
//! ```text
//!   p(t) ∝ (1 − 4π(t/τp)²) · exp(−2π(t/τp)²),   |t| ≤ Tm/2
//! ```
//!
//! truncated to a window of duration `Tm` and renormalized to unit energy on
//! its sample grid. Every interference quantity downstream is expressed through
//! the autocorrelation `R(τ) = ∫ p(t) p(t + τ) dt`.
//!
//! Times are in nanoseconds and frequencies in GHz throughout.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DURATION_NS: f64 = 0.5;
pub const DEFAULT_BANDWIDTH_10DB_GHZ: f64 = 5.6;
pub const DEFAULT_SAMPLES_PER_DURATION: usize = 64;

const ZERO_PAD_FACTOR: usize = 16;

/// Unnormalized doublet waveform.
pub fn doublet(t: f64, shape_ns: f64) -> f64 {
    let x2 = (t / shape_ns).powi(2);
    (1.0 - 4.0 * PI * x2) * (-2.0 * PI * x2).exp()
}

/// Unit-energy doublet sampled on a closed grid over `[−Tm/2, Tm/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    shape_ns: f64,
    duration_ns: f64,
    sample_period_ns: f64,
    samples: Vec<f64>,
    energy: f64,
    scale: f64,
}

/// Build the truncated, unit-energy doublet.
///
/// `sample_period` must divide `duration` into an even number of intervals so
/// that `t = 0` is a grid point.
pub fn make_gaussian_doublet(
    shape_ns: f64,
    duration_ns: f64,
    sample_period_ns: f64,
) -> Result<PulseShape> {
    if !(shape_ns > 0.0 && shape_ns.is_finite()) {
        return Err(Error::param("shape_parameter", "must be positive"));
    }
    if !(duration_ns > 0.0 && duration_ns.is_finite()) {
        return Err(Error::param("duration", "must be positive"));
    }
    if !(sample_period_ns > 0.0) {
        return Err(Error::param("sample_period", "must be positive"));
    }
    if sample_period_ns > duration_ns / 32.0 * (1.0 + 1e-12) {
        return Err(Error::param(
            "sample_period",
            format!("{sample_period_ns} ns exceeds duration/32"),
        ));
    }
    let ratio = duration_ns / sample_period_ns;
    let intervals = ratio.round();
    if (ratio - intervals).abs() > 1e-9 * ratio {
        return Err(Error::param(
            "sample_period",
            format!("{sample_period_ns} ns does not divide the duration {duration_ns} ns"),
        ));
    }
    let intervals = intervals as usize;
    if intervals % 2 != 0 {
        return Err(Error::param(
            "sample_period",
            "duration/sample_period must be even so t = 0 is sampled",
        ));
    }

    let half = (intervals / 2) as i64;
    let raw: Vec<f64> = (-half..=half)
        .map(|i| doublet(i as f64 * sample_period_ns, shape_ns))
        .collect();
    let raw_energy: f64 = raw.iter().map(|v| v * v).sum::<f64>() * sample_period_ns;
    let scale = 1.0 / raw_energy.sqrt();
    let samples: Vec<f64> = raw.iter().map(|v| v * scale).collect();
    let energy = samples.iter().map(|v| v * v).sum::<f64>() * sample_period_ns;

    Ok(PulseShape {
        shape_ns,
        duration_ns,
        sample_period_ns,
        samples,
        energy,
        scale,
    })
}

impl PulseShape {
    /// Pulse whose 10 dB bandwidth equals `bandwidth_ghz`, found by bisection
    /// on the shape parameter.
    pub fn calibrated(bandwidth_ghz: f64, duration_ns: f64, sample_period_ns: f64) -> Result<Self> {
        if !(bandwidth_ghz > 0.0) {
            return Err(Error::param("bandwidth_10db_ghz", "must be positive"));
        }
        // Continuous-spectrum estimate: |P(f)| ∝ x·e^{−x}, x = πτ²f²/2, and the
        // −10 dB points sit at x ≈ 0.133 and x ≈ 3.37.
        let guess = 1.174 / bandwidth_ghz;
        let bw = |s: f64| -> Result<f64> {
            Ok(bandwidth_10db(&make_gaussian_doublet(s, duration_ns, sample_period_ns)?))
        };
        let (mut lo, mut hi) = (0.25 * guess, 4.0 * guess);
        // bandwidth decreases with the shape parameter
        if bw(lo)? < bandwidth_ghz || bw(hi)? > bandwidth_ghz {
            return Err(Error::param(
                "bandwidth_10db_ghz",
                format!("{bandwidth_ghz} GHz not reachable with duration {duration_ns} ns"),
            ));
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if bw(mid)? > bandwidth_ghz {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) < 1e-13 * guess {
                break;
            }
        }
        make_gaussian_doublet(0.5 * (lo + hi), duration_ns, sample_period_ns)
    }

    /// Default transmit pulse: 0.5 ns window, 5.6 GHz 10 dB bandwidth, 64
    /// intervals across the window.
    pub fn standard() -> Self {
        Self::calibrated(
            DEFAULT_BANDWIDTH_10DB_GHZ,
            DEFAULT_DURATION_NS,
            DEFAULT_DURATION_NS / DEFAULT_SAMPLES_PER_DURATION as f64,
        )
        .expect("default pulse parameters are valid")
    }

    pub fn shape_ns(&self) -> f64 {
        self.shape_ns
    }

    pub fn duration_ns(&self) -> f64 {
        self.duration_ns
    }

    pub fn sample_period_ns(&self) -> f64 {
        self.sample_period_ns
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Sample times, symmetric about zero.
    pub fn times(&self) -> Vec<f64> {
        let half = (self.samples.len() / 2) as i64;
        (-half..=half)
            .map(|i| i as f64 * self.sample_period_ns)
            .collect()
    }

    /// Continuous-time value of the normalized, truncated pulse.
    pub fn value(&self, t: f64) -> f64 {
        if t.abs() > 0.5 * self.duration_ns {
            0.0
        } else {
            self.scale * doublet(t, self.shape_ns)
        }
    }
}

/// Width of the band over which the power spectrum stays within 10 dB of its
/// peak.
pub fn bandwidth_10db(pulse: &PulseShape) -> f64 {
    let n = pulse.samples.len();
    let nfft = (ZERO_PAD_FACTOR * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = pulse
        .samples
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(nfft)
        .collect();
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);

    let power: Vec<f64> = buf[..=nfft / 2].iter().map(|c| c.norm_sqr()).collect();
    let df = 1.0 / (nfft as f64 * pulse.sample_period_ns);
    let (peak_bin, peak) = power
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
    let threshold = peak / 10.0;

    // crossing between bins a and b, interpolated in dB
    let crossing = |a: usize, b: usize| -> f64 {
        let (pa, pb) = (10.0 * power[a].log10(), 10.0 * power[b].max(1e-300).log10());
        let pt = 10.0 * threshold.log10();
        let frac = if (pb - pa).abs() > 0.0 { (pt - pa) / (pb - pa) } else { 0.0 };
        (a as f64 + frac * (b as f64 - a as f64)) * df
    };

    let mut lo_edge = 0.0;
    let mut k = peak_bin;
    while k > 0 {
        if power[k - 1] < threshold {
            lo_edge = crossing(k, k - 1);
            break;
        }
        k -= 1;
    }
    let mut hi_edge = (power.len() - 1) as f64 * df;
    let mut k = peak_bin;
    while k + 1 < power.len() {
        if power[k + 1] < threshold {
            hi_edge = crossing(k, k + 1);
            break;
        }
        k += 1;
    }
    hi_edge - lo_edge
}

/// How the autocorrelation table is evaluated between grid lags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    /// Four-point Lagrange on the uniform lag grid.
    #[default]
    Cubic,
}

/// Discrete autocorrelation of a sampled pulse on lags `[−Tm, Tm]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrelationTable {
    lag_step_ns: f64,
    duration_ns: f64,
    // values at lags −n..=n; centre index n
    values: Vec<f64>,
    interpolation: Interpolation,
}

/// `Σ w_i a_i b_i` with trapezoid weights: ½ on the two end terms.
fn trapezoid_dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = a[1..n - 1].iter().zip(&b[1..n - 1]).map(|(x, y)| x * y).sum();
    inner + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1])
}

/// `R(m·Δt)` by trapezoidal correlation on the sample grid, scaled to
/// `R(0) = 1`, with the end lags `±Tm` pinned to zero.
pub fn autocorrelation(pulse: &PulseShape) -> AutocorrelationTable {
    let s = &pulse.samples;
    let n = s.len() - 1;
    let dt = pulse.sample_period_ns;
    let mut one_sided: Vec<f64> = (0..=n)
        .map(|m| trapezoid_dot(&s[..=n - m], &s[m..]))
        .collect();
    let peak = one_sided[0];
    one_sided.iter_mut().for_each(|v| *v /= peak);
    one_sided[n] = 0.0;
    let values: Vec<f64> = one_sided
        .iter()
        .rev()
        .chain(one_sided.iter().skip(1))
        .copied()
        .collect();
    AutocorrelationTable {
        lag_step_ns: dt,
        duration_ns: pulse.duration_ns,
        values,
        interpolation: Interpolation::default(),
    }
}

impl AutocorrelationTable {
    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn duration_ns(&self) -> f64 {
        self.duration_ns
    }

    pub fn lag_step_ns(&self) -> f64 {
        self.lag_step_ns
    }

    pub fn lag_grid(&self) -> Vec<f64> {
        let n = self.half_len() as i64;
        (-n..=n).map(|m| m as f64 * self.lag_step_ns).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn half_len(&self) -> usize {
        self.values.len() / 2
    }

    // Value at non-negative grid index, zero past the support.
    fn at(&self, idx: i64) -> f64 {
        let n = self.half_len() as i64;
        let m = idx.abs();
        if m >= n {
            0.0
        } else {
            self.values[(n + m) as usize]
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let a = tau.abs();
        if a >= self.duration_ns {
            return 0.0;
        }
        let u = a / self.lag_step_ns;
        let i = u.floor();
        let f = u - i;
        let i = i as i64;
        match self.interpolation {
            Interpolation::Linear => (1.0 - f) * self.at(i) + f * self.at(i + 1),
            Interpolation::Cubic => {
                let wm = -f * (f - 1.0) * (f - 2.0) / 6.0;
                let w0 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
                let w1 = -(f + 1.0) * f * (f - 2.0) / 2.0;
                let w2 = (f + 1.0) * f * (f - 1.0) / 6.0;
                wm * self.at(i - 1) + w0 * self.at(i) + w1 * self.at(i + 1) + w2 * self.at(i + 2)
            }
        }
    }
}

/// Closed-form autocorrelation of the untruncated doublet,
/// `R(τ) = (1 − 4bτ² + (4/3)b²τ⁴)·exp(−bτ²)` with `b = π/τp²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubletCorrelation {
    pub shape_ns: f64,
}

impl DoubletCorrelation {
    pub fn eval(&self, tau: f64) -> f64 {
        let b = PI / (self.shape_ns * self.shape_ns);
        let x = b * tau * tau;
        (1.0 - 4.0 * x + 4.0 / 3.0 * x * x) * (-x).exp()
    }
}

/// Autocorrelation used by the interference integrals.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationKernel {
    /// Tabulated from the truncated pulse actually transmitted.
    Truncated(AutocorrelationTable),
    /// Infinite-support doublet, paired with the window duration used as the
    /// integration limit.
    Continuous {
        correlation: DoubletCorrelation,
        duration_ns: f64,
    },
}

impl CorrelationKernel {
    pub fn truncated(pulse: &PulseShape) -> Self {
        CorrelationKernel::Truncated(autocorrelation(pulse))
    }

    pub fn continuous(pulse: &PulseShape) -> Self {
        CorrelationKernel::Continuous {
            correlation: DoubletCorrelation {
                shape_ns: pulse.shape_ns,
            },
            duration_ns: pulse.duration_ns,
        }
    }

    #[inline]
    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            CorrelationKernel::Truncated(t) => t.eval(tau),
            CorrelationKernel::Continuous { correlation, .. } => correlation.eval(tau),
        }
    }

    pub fn duration_ns(&self) -> f64 {
        match self {
            CorrelationKernel::Truncated(t) => t.duration_ns,
            CorrelationKernel::Continuous { duration_ns, .. } => *duration_ns,
        }
    }

    /// Points in `(lo, hi)` where the kernel is only piecewise smooth, in the
    /// variable `τ = y + shift`.
    pub fn knots(&self, lo: f64, hi: f64, shift: f64) -> Vec<f64> {
        match self {
            CorrelationKernel::Truncated(t) => {
                let step = t.lag_step_ns;
                let first = ((lo + shift) / step).floor() as i64 + 1;
                let last = ((hi + shift) / step).ceil() as i64 - 1;
                (first..=last)
                    .map(|m| m as f64 * step - shift)
                    .filter(|&y| y > lo && y < hi)
                    .collect()
            }
            CorrelationKernel::Continuous { .. } => Vec::new(),
        }
    }
}
