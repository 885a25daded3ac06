//! Time-hopped BPSK signalling and the single-finger correlation receiver.
//!
//! The receiver template is a train of `N_s` pulses locked to tap (1,1) of the
//! desired user's channel. Because channel, transmitter and correlator are all
//! linear, the correlator output is a weighted sum of pulse autocorrelation
//! values: every (transmitted pulse, channel tap, template pulse) triple
//! contributes `d·√(E_p·F)·α·R(Δ)`, with `Δ` the offset between the tap's
//! arrival and the template pulse.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, DelayWindows};
use crate::error::{Error, Result};
use crate::pulse::AutocorrelationTable;

/// Link-level parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// Pulses per symbol `N_s`.
    pub pulses_per_symbol: u32,
    /// Bit rate `R_b` (Mbps).
    pub bit_rate_mbps: f64,
    /// Hop slot `T_c` (ns).
    pub hop_slot_ns: f64,
    /// Number of hop positions `N_h`.
    pub hop_count: u32,
    /// Number of interfering users `N_u`.
    pub interferers: u32,
    /// Energy per transmitted pulse `E_p`.
    pub pulse_energy: f64,
    /// Optional explicit frame period; must agree with `1/(R_b·N_s)`.
    pub frame_ns: Option<f64>,
    /// Fixed interferer delays `t_u` (ns), one per interferer. Drawn uniformly
    /// on `[−T_f/2, T_f/2]` per trial when absent.
    pub user_delays_ns: Option<Vec<f64>>,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            pulses_per_symbol: 1,
            bit_rate_mbps: 15.0,
            hop_slot_ns: 0.5,
            hop_count: 16,
            interferers: 0,
            pulse_energy: 1.0,
            frame_ns: None,
            user_delays_ns: None,
        }
    }
}

impl SystemParams {
    /// Frame period `T_f = 1/(R_b·N_s)` in ns.
    pub fn frame_period(&self) -> f64 {
        1e3 / (self.bit_rate_mbps * self.pulses_per_symbol as f64)
    }

    /// Bit rate in bits per ns.
    pub fn bit_rate_per_ns(&self) -> f64 {
        self.bit_rate_mbps * 1e-3
    }

    /// Maximum hop offset `T_s = N_h·T_c`.
    pub fn hop_span(&self) -> f64 {
        self.hop_count as f64 * self.hop_slot_ns
    }

    /// `N_I = ⌈τ_max·R_b·N_s⌉`, the number of frames a channel spans.
    pub fn interfering_frames(&self, max_delay_ns: f64) -> usize {
        let x = max_delay_ns * self.bit_rate_per_ns() * self.pulses_per_symbol as f64;
        // guard against products such as 200 × 0.015 landing just above an integer
        (x - 1e-9).ceil().max(0.0) as usize
    }

    /// Prior pulses each user must carry: `N_I·N_s`.
    pub fn history_pulses(&self, max_delay_ns: f64) -> usize {
        self.interfering_frames(max_delay_ns) * self.pulses_per_symbol as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.pulses_per_symbol == 0 {
            return Err(Error::param("pulses_per_symbol", "must be at least 1"));
        }
        if self.hop_count == 0 {
            return Err(Error::param("hop_count", "must be at least 1"));
        }
        for (name, v) in [
            ("bit_rate_mbps", self.bit_rate_mbps),
            ("hop_slot_ns", self.hop_slot_ns),
            ("pulse_energy", self.pulse_energy),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        let tf = self.frame_period();
        if let Some(f) = self.frame_ns {
            if !((f * self.bit_rate_per_ns() * self.pulses_per_symbol as f64) - 1.0).abs().le(&1e-9) {
                return Err(Error::Inconsistent(format!(
                    "frame_ns = {f} disagrees with 1/(R_b·N_s) = {tf} ns"
                )));
            }
        }
        if self.hop_span() > tf * (1.0 + 1e-12) {
            return Err(Error::Inconsistent(format!(
                "T_s ≤ T_f violated: N_h·T_c = {} ns exceeds T_f = {tf} ns",
                self.hop_span()
            )));
        }
        if let Some(d) = &self.user_delays_ns {
            if d.len() != self.interferers as usize {
                return Err(Error::Inconsistent(format!(
                    "{} user delays given for {} interferers",
                    d.len(),
                    self.interferers
                )));
            }
            if d.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("user_delays_ns", "must be finite"));
            }
        }
        Ok(())
    }
}

/// I.i.d. uniform hop indices in `{1, …, N_h}`.
pub fn gen_th_sequence<R: Rng + ?Sized>(hop_count: u32, length: usize, rng: &mut R) -> Vec<u32> {
    (0..length).map(|_| rng.random_range(1..=hop_count.max(1))).collect()
}

/// A user's pulse train over consecutive frames.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseTrain {
    /// Frame index of `bits[0]`; frame 0 starts the current symbol.
    pub first_frame: i64,
    /// Polarity of each pulse.
    pub bits: Vec<i8>,
    /// Hop index of each pulse.
    pub codes: Vec<u32>,
    /// User delay `t_u` (ns); zero for the desired user.
    pub delay_ns: f64,
}

impl PulseTrain {
    /// Random train over frames `first_frame..=last_frame`. With
    /// `symbol_bits` the polarity is shared by the `N_s` frames of each
    /// symbol; otherwise every frame carries its own bit.
    pub fn random<R: Rng + ?Sized>(
        sys: &SystemParams,
        first_frame: i64,
        last_frame: i64,
        delay_ns: f64,
        symbol_bits: bool,
        rng: &mut R,
    ) -> Self {
        let n = (last_frame - first_frame + 1).max(0) as usize;
        let ns = sys.pulses_per_symbol as i64;
        let mut bits = Vec::with_capacity(n);
        let mut current: Option<(i64, i8)> = None;
        for f in first_frame..=last_frame {
            let sym = if symbol_bits { f.div_euclid(ns) } else { f };
            let b = match current {
                Some((s, b)) if s == sym => b,
                _ => {
                    let b = if rng.random::<bool>() { 1 } else { -1 };
                    current = Some((sym, b));
                    b
                }
            };
            bits.push(b);
        }
        let codes = gen_th_sequence(sys.hop_count, n, rng);
        PulseTrain {
            first_frame,
            bits,
            codes,
            delay_ns,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn last_frame(&self) -> i64 {
        self.first_frame + self.bits.len() as i64 - 1
    }

    /// Bit at frame `f`, if the train covers it.
    pub fn bit_at(&self, f: i64) -> Option<i8> {
        let i = f - self.first_frame;
        (i >= 0 && (i as usize) < self.bits.len()).then(|| self.bits[i as usize])
    }

    /// Start time of the `i`-th pulse: `f·T_f + c·T_c + t_u`.
    pub fn pulse_time(&self, i: usize, frame_ns: f64, hop_slot_ns: f64) -> f64 {
        (self.first_frame + i as i64) as f64 * frame_ns + self.codes[i] as f64 * hop_slot_ns + self.delay_ns
    }
}

/// Template pulse positions `j·T_f + c_j·T_c`, `j = 0..N_s`, taken from the
/// desired user's codes.
pub fn template_times(sys: &SystemParams, desired: &PulseTrain) -> Result<Vec<f64>> {
    let tf = sys.frame_period();
    (0..sys.pulses_per_symbol as i64)
        .map(|j| {
            let i = j - desired.first_frame;
            if i < 0 || i as usize >= desired.len() {
                return Err(Error::Inconsistent("desired train does not cover the current symbol".into()));
            }
            Ok(j as f64 * tf + desired.codes[i as usize] as f64 * sys.hop_slot_ns)
        })
        .collect()
}

/// Absolute tap-delay windows of a user's channel that can reach the template.
pub fn reach_windows(
    sys: &SystemParams,
    train: &PulseTrain,
    templates: &[f64],
    duration_ns: f64,
    max_delay_ns: f64,
) -> DelayWindows {
    let tf = sys.frame_period();
    let mut spans = Vec::new();
    for i in 0..train.len() {
        let a = train.pulse_time(i, tf, sys.hop_slot_ns);
        for &t in templates {
            let lo = t - a - duration_ns;
            let hi = t - a + duration_ns;
            if hi > 0.0 && lo < max_delay_ns {
                spans.push((lo.max(0.0), hi.min(max_delay_ns)));
            }
        }
    }
    DelayWindows::new(spans)
}

/// One user's contribution to the received signal.
#[derive(Debug, Clone, Copy)]
pub struct UserSignal<'a> {
    pub channel: &'a ChannelRealization,
    pub train: &'a PulseTrain,
}

/// Which correlator components enter the decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Toggles {
    pub iasi: bool,
    pub isi: bool,
    pub mui: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles {
            iasi: true,
            isi: true,
            mui: true,
        }
    }
}

impl Toggles {
    pub fn none() -> Self {
        Toggles {
            iasi: false,
            isi: false,
            mui: false,
        }
    }
}

/// Correlator output split by origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecisionComponents {
    pub z_u: f64,
    pub z_n: f64,
    pub z_iasi: f64,
    pub z_isi: f64,
    pub z_mui: f64,
    pub z_total: f64,
    pub bit_estimate: i8,
}

/// `+1` for non-negative input, so an exact zero decides `+1`.
pub fn decide(z: f64) -> i8 {
    if z >= 0.0 {
        1
    } else {
        -1
    }
}

impl DecisionComponents {
    pub fn new(z_u: f64, z_n: f64, z_iasi: f64, z_isi: f64, z_mui: f64) -> Self {
        let z_total = z_u + z_n + z_iasi + z_isi + z_mui;
        DecisionComponents {
            z_u,
            z_n,
            z_iasi,
            z_isi,
            z_mui,
            z_total,
            bit_estimate: decide(z_total),
        }
    }

    /// Zero the disabled components and re-decide.
    pub fn with_toggles(&self, toggles: Toggles) -> Self {
        let keep = |on: bool, v: f64| if on { v } else { 0.0 };
        Self::new(
            self.z_u,
            self.z_n,
            keep(toggles.iasi, self.z_iasi),
            keep(toggles.isi, self.z_isi),
            keep(toggles.mui, self.z_mui),
        )
    }
}

/// Correlator output for the current symbol of user 0.
///
/// `users[0]` is the desired user; the template is locked to its tap (1,1),
/// whose polarity the receiver knows. `noise` is the already-scaled noise
/// sample `Z_n`. Every user's train must hold at least `N_I·N_s` pulses
/// before frame 0.
pub fn decision_statistic(
    sys: &SystemParams,
    max_delay_ns: f64,
    r: &AutocorrelationTable,
    users: &[UserSignal<'_>],
    noise: f64,
) -> Result<DecisionComponents> {
    let desired = users
        .first()
        .ok_or_else(|| Error::Inconsistent("no desired user".into()))?;
    let history = sys.history_pulses(max_delay_ns) as i64;
    for (u, s) in users.iter().enumerate() {
        if s.train.first_frame > -history {
            return Err(Error::Inconsistent(format!(
                "user {u} carries {} prior pulses, {history} required",
                -s.train.first_frame.min(0)
            )));
        }
        if s.train.codes.len() != s.train.bits.len() {
            return Err(Error::Inconsistent(format!("user {u}: codes and bits differ in length")));
        }
    }
    if desired.train.last_frame() < sys.pulses_per_symbol as i64 - 1 {
        return Err(Error::Inconsistent("desired train does not cover the current symbol".into()));
    }
    let templates = template_times(sys, desired.train)?;
    let tf = sys.frame_period();
    let tm = r.duration_ns();
    let reference_sign = desired.channel.reference_tap().amplitude.signum();

    let (mut z_u, mut z_iasi, mut z_isi, mut z_mui) = (0.0, 0.0, 0.0, 0.0);
    for (u, s) in users.iter().enumerate() {
        let scale = (sys.pulse_energy * s.channel.frequency_scale()).sqrt();
        let reach = s.channel.max_delay();
        for i in 0..s.train.len() {
            let frame = s.train.first_frame + i as i64;
            let a = s.train.pulse_time(i, tf, sys.hop_slot_ns);
            let bit = s.train.bits[i] as f64;
            for (j, &t) in templates.iter().enumerate() {
                let base = t - a;
                if base + tm <= 0.0 || base - tm > reach {
                    continue;
                }
                for tap in s.channel.taps_between(base - tm, base + tm) {
                    let v = bit * scale * tap.amplitude * r.eval(tap.delay_ns - base);
                    if u != 0 {
                        z_mui += v;
                    } else if frame == j as i64 {
                        if tap.is_reference() {
                            z_u += v;
                        } else {
                            z_iasi += v;
                        }
                    } else {
                        z_isi += v;
                    }
                }
            }
        }
    }
    Ok(DecisionComponents::new(
        reference_sign * z_u,
        noise,
        reference_sign * z_iasi,
        reference_sign * z_isi,
        reference_sign * z_mui,
    ))
}
