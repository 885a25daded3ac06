//! Monte Carlo BER estimation.
//!
//! A trial draws the desired user's bits and hop codes, the interferers'
//! delays, bits and codes, one channel realization per user and a unit
//! normal noise variate, all from streams keyed by the trial index. The
//! noise-free correlator components are then reused at every Eb/N0 point, so
//! a whole curve is estimated from common random numbers and results do not
//! depend on batch size or worker count.

use rand_distr::{Distribution, StandardNormal};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{noise_psd, omega0, AnalysisOptions, InterferenceBudget, LinkAnalysis};
use crate::channel::{generate_windowed, ChannelParams, ChannelRealization};
use crate::error::{Error, Result};
use crate::modem::{
    decide, decision_statistic, reach_windows, template_times, DecisionComponents, PulseTrain, SystemParams,
    Toggles, UserSignal,
};
use crate::pulse::{autocorrelation, AutocorrelationTable, Interpolation, PulseShape};
use crate::quadrature::QuadratureSpec;
use crate::rng::StreamKey;

/// Two-sided 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

const STREAM_TRAIN: u64 = 0;
const STREAM_CHANNEL: u64 = 1;
const STREAM_NOISE: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Simulation,
    Analysis,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Simulation => "simulation",
            Engine::Analysis => "analysis",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "simulation" | "sim" => Ok(Engine::Simulation),
            "analysis" | "analytic" => Ok(Engine::Analysis),
            other => Err(Error::Config(format!("unknown engine `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSource {
    /// Ideal channel: one unit tap at delay 0 for every user.
    SingleTap,
    /// IEEE 802.15.4a office-LOS realizations.
    #[default]
    Statistical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_trials: u64,
    pub min_trials: u64,
    /// Trials generated per parallel batch.
    pub batch_size: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            min_errors: 100,
            max_trials: 10_000_000,
            min_trials: 10_000,
            batch_size: 1000,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.max_trials == 0 {
            return Err(Error::param("max_trials", "must be at least 1"));
        }
        if self.min_trials > self.max_trials {
            return Err(Error::Inconsistent(format!(
                "min_trials = {} exceeds max_trials = {}",
                self.min_trials, self.max_trials
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        Ok(())
    }

    fn done(&self, trials: u64, errors: u64) -> bool {
        trials >= self.max_trials || (errors >= self.min_errors && trials >= self.min_trials)
    }
}

/// One point of a BER curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerPoint {
    pub engine: Engine,
    pub ebn0_db: f64,
    pub trials: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The trial cap stopped the point before `min_errors` was reached.
    pub cap_reached: bool,
}

impl BerPoint {
    pub fn from_counts(ebn0_db: f64, trials: u64, errors: u64, stop: &StopRule) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, trials, Z_95);
        BerPoint {
            engine: Engine::Simulation,
            ebn0_db,
            trials,
            errors,
            ber: if trials == 0 { 0.0 } else { errors as f64 / trials as f64 },
            ci_low,
            ci_high,
            cap_reached: errors < stop.min_errors && trials >= stop.max_trials,
        }
    }

    pub fn analytic(link: &LinkAnalysis) -> Self {
        BerPoint {
            engine: Engine::Analysis,
            ebn0_db: link.ebn0_db,
            trials: 0,
            errors: 0,
            ber: link.ber,
            ci_low: link.ber,
            ci_high: link.ber,
            cap_reached: false,
        }
    }

    /// Binomial standard deviation of the estimate around probability `p`.
    pub fn binomial_sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Whether two points' intervals intersect.
    pub fn overlaps(&self, other: &BerPoint) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Wilson score interval for `errors` successes in `trials`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Noise-free correlator output of one trial plus its unit noise variate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub index: u64,
    pub bit: i8,
    pub components: DecisionComponents,
    pub unit_noise: f64,
}

impl TrialRecord {
    /// Decision at noise standard deviation `sigma`.
    pub fn decide_at(&self, sigma: f64) -> i8 {
        decide(self.components.z_total + sigma * self.unit_noise)
    }

    pub fn with_noise(&self, sigma: f64) -> DecisionComponents {
        let c = &self.components;
        DecisionComponents::new(c.z_u, sigma * self.unit_noise, c.z_iasi, c.z_isi, c.z_mui)
    }
}

/// A configured simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    chan: ChannelParams,
    sys: SystemParams,
    table: AutocorrelationTable,
    source: ChannelSource,
    toggles: Toggles,
    stop: StopRule,
    noise: bool,
    root: StreamKey,
}

impl Simulation {
    pub fn new(
        chan: &ChannelParams,
        sys: &SystemParams,
        pulse: &PulseShape,
        source: ChannelSource,
        toggles: Toggles,
        stop: StopRule,
        seed: u64,
    ) -> Result<Self> {
        chan.validate()?;
        sys.validate()?;
        stop.validate()?;
        Ok(Simulation {
            chan: chan.clone(),
            sys: sys.clone(),
            table: autocorrelation(pulse),
            source,
            toggles,
            stop,
            noise: true,
            root: StreamKey::new(seed),
        })
    }

    /// Disable receiver noise.
    pub fn without_noise(mut self) -> Self {
        self.noise = false;
        self
    }

    pub fn with_table(mut self, table: AutocorrelationTable) -> Self {
        self.table = table;
        self
    }

    pub fn stop_rule(&self) -> &StopRule {
        &self.stop
    }

    /// Mean energy of the desired ray used to place the Eb/N0 axis.
    pub fn desired_energy(&self) -> f64 {
        match self.source {
            ChannelSource::SingleTap => 1.0,
            ChannelSource::Statistical => omega0(&self.chan),
        }
    }

    fn frequency_scale(&self) -> f64 {
        match self.source {
            ChannelSource::SingleTap => 1.0,
            ChannelSource::Statistical => self.chan.frequency_scale(),
        }
    }

    /// Standard deviation of `Z_n` at the given Eb/N0.
    pub fn noise_sigma(&self, ebn0_db: f64) -> f64 {
        if !self.noise {
            return 0.0;
        }
        let n0 = noise_psd(&self.sys, self.desired_energy(), ebn0_db);
        (self.frequency_scale() * self.sys.pulses_per_symbol as f64 * n0 / 2.0).sqrt()
    }

    fn channel_for(&self, key: StreamKey, train: &PulseTrain, templates: &[f64]) -> ChannelRealization {
        match self.source {
            ChannelSource::SingleTap => ChannelRealization::single_tap(1.0),
            ChannelSource::Statistical => {
                let windows = reach_windows(
                    &self.sys,
                    train,
                    templates,
                    self.table.duration_ns(),
                    self.chan.max_delay_ns,
                );
                generate_windowed(&self.chan, key, &windows)
            }
        }
    }

    /// Regenerate trial `index`.
    pub fn trial(&self, index: u64) -> Result<TrialRecord> {
        let key = self.root.child(index);
        let sys = &self.sys;
        let tau_max = self.chan.max_delay_ns;
        let history = sys.history_pulses(tau_max) as i64;
        let ns = sys.pulses_per_symbol as i64;
        let tf = sys.frame_period();

        let desired = PulseTrain::random(sys, -history, ns - 1, 0.0, true, &mut key.child(0).child(STREAM_TRAIN).rng());
        let templates = template_times(sys, &desired)?;
        let mut trains = vec![desired];
        if self.toggles.mui {
            for u in 1..=sys.interferers as u64 {
                let mut rng = key.child(u).child(STREAM_TRAIN).rng();
                let delay = match &sys.user_delays_ns {
                    Some(d) => d[(u - 1) as usize],
                    None => rng.random_range(-0.5 * tf..=0.5 * tf),
                };
                trains.push(PulseTrain::random(sys, -(history + 1), ns, delay, false, &mut rng));
            }
        }
        let channels: Vec<ChannelRealization> = trains
            .iter()
            .enumerate()
            .map(|(u, t)| self.channel_for(key.child(u as u64).child(STREAM_CHANNEL), t, &templates))
            .collect();
        let users: Vec<UserSignal<'_>> = channels
            .iter()
            .zip(&trains)
            .map(|(channel, train)| UserSignal { channel, train })
            .collect();
        let z = decision_statistic(sys, tau_max, &self.table, &users, 0.0)?.with_toggles(self.toggles);
        let unit_noise: f64 = StandardNormal.sample(&mut key.child(STREAM_NOISE).rng());
        Ok(TrialRecord {
            index,
            bit: trains[0].bit_at(0).expect("desired train covers frame 0"),
            components: z,
            unit_noise,
        })
    }

    /// Full decision components of trial `index` at the given Eb/N0.
    pub fn decision(&self, index: u64, ebn0_db: f64) -> Result<DecisionComponents> {
        Ok(self.trial(index)?.with_noise(self.noise_sigma(ebn0_db)))
    }

    /// Estimate the BER at every grid point from one shared trial sequence.
    /// Each point stops independently under the stop rule.
    pub fn run_points(&self, ebn0_grid: &[f64]) -> Result<Vec<BerPoint>> {
        if let Some(bad) = ebn0_grid.iter().find(|x| !x.is_finite()) {
            return Err(Error::param("ebn0_db", format!("must be finite, got {bad}")));
        }
        let sigmas: Vec<f64> = ebn0_grid.iter().map(|&db| self.noise_sigma(db)).collect();
        let mut trials = vec![0u64; ebn0_grid.len()];
        let mut errors = vec![0u64; ebn0_grid.len()];
        let mut active: Vec<bool> = vec![true; ebn0_grid.len()];
        let mut next: u64 = 0;
        while active.iter().any(|&a| a) {
            let end = (next + self.stop.batch_size).min(self.stop.max_trials);
            let batch: Vec<TrialRecord> = (next..end)
                .into_par_iter()
                .map(|i| self.trial(i))
                .collect::<Result<_>>()?;
            for rec in &batch {
                for p in 0..ebn0_grid.len() {
                    if !active[p] {
                        continue;
                    }
                    trials[p] += 1;
                    if rec.decide_at(sigmas[p]) != rec.bit {
                        errors[p] += 1;
                    }
                    if self.stop.done(trials[p], errors[p]) {
                        active[p] = false;
                    }
                }
            }
            next = end;
        }
        Ok(ebn0_grid
            .iter()
            .enumerate()
            .map(|(p, &db)| BerPoint::from_counts(db, trials[p], errors[p], &self.stop))
            .collect())
    }

    pub fn run_ber_point(&self, ebn0_db: f64) -> Result<BerPoint> {
        Ok(self.run_points(&[ebn0_db])?.remove(0))
    }
}

/// Everything needed to produce a curve from either engine.
#[derive(Debug, Clone)]
pub struct CurveSetup {
    pub chan: ChannelParams,
    pub sys: SystemParams,
    pub pulse: PulseShape,
    pub interpolation: Interpolation,
    pub source: ChannelSource,
    pub toggles: Toggles,
    pub stop: StopRule,
    pub seed: u64,
    pub analysis: AnalysisOptions,
    pub quadrature: QuadratureSpec,
}

impl CurveSetup {
    pub fn simulation(&self) -> Result<Simulation> {
        Simulation::new(
            &self.chan,
            &self.sys,
            &self.pulse,
            self.source,
            self.toggles,
            self.stop,
            self.seed,
        )
        .map(|s| s.with_table(autocorrelation(&self.pulse).with_interpolation(self.interpolation)))
    }

    /// Analytical breakdown at each grid point.
    pub fn analysis_curve(&self, ebn0_grid: &[f64]) -> Result<Vec<LinkAnalysis>> {
        let budget = match self.source {
            ChannelSource::Statistical => InterferenceBudget::compute(
                &self.chan,
                &self.sys,
                &self.analysis.kernel_for(&self.pulse),
                &self.analysis,
                self.toggles,
                &self.quadrature,
            )?,
            ChannelSource::SingleTap => {
                if self.toggles.mui && self.sys.interferers > 0 {
                    return Err(Error::Inconsistent(
                        "the analysis engine has no multiuser model for the single-tap channel".into(),
                    ));
                }
                InterferenceBudget {
                    omega0: 1.0,
                    omega_sigma: 0.0,
                    sigma_iasi2: 0.0,
                    sigma_isi2: 0.0,
                    sigma_mui2: 0.0,
                }
            }
        };
        Ok(ebn0_grid
            .iter()
            .map(|&db| {
                let mut link = budget.at(&self.chan, &self.sys, db);
                if self.source == ChannelSource::SingleTap {
                    // unit tap: rescale E_b and σ²_n together, SINR unchanged
                    let r = 1.0 / omega0(&self.chan);
                    link.eb *= r;
                    link.sigma_n2 *= r;
                }
                link
            })
            .collect())
    }
}

fn validate_grid(ebn0_grid: &[f64]) -> Result<()> {
    if ebn0_grid.is_empty() {
        return Err(Error::Config("Eb/N0 grid is empty".into()));
    }
    if ebn0_grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("Eb/N0 grid values must be finite".into()));
    }
    if ebn0_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("Eb/N0 grid must be strictly ascending".into()));
    }
    Ok(())
}

/// One [`BerPoint`] per grid value per engine, grouped by engine in the order
/// given.
pub fn run_curve(setup: &CurveSetup, ebn0_grid: &[f64], engines: &[Engine]) -> Result<Vec<BerPoint>> {
    validate_grid(ebn0_grid)?;
    if engines.is_empty() {
        return Err(Error::Config("no engine selected".into()));
    }
    let mut out = Vec::new();
    for &engine in engines {
        match engine {
            Engine::Simulation => out.extend(setup.simulation()?.run_points(ebn0_grid)?),
            Engine::Analysis => out.extend(setup.analysis_curve(ebn0_grid)?.iter().map(BerPoint::analytic)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stop(max: u64) -> StopRule {
        StopRule {
            min_errors: 100,
            max_trials: max,
            min_trials: 1000,
            batch_size: 256,
        }
    }

    fn single_tap(seed: u64, max: u64) -> Simulation {
        Simulation::new(
            &ChannelParams::office_los(),
            &SystemParams::default(),
            &PulseShape::standard(),
            ChannelSource::SingleTap,
            Toggles::none(),
            stop(max),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn wilson_contains_estimate() {
        for (e, n) in [(0, 10), (5, 100), (100, 100), (37, 1000)] {
            let (lo, hi) = wilson_interval(e, n, Z_95);
            let p = e as f64 / n as f64;
            assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        }
        let (lo, hi) = wilson_interval(0, 1000, Z_95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
    }

    #[test]
    fn noiseless_single_tap_is_error_free() {
        let sim = single_tap(1, 5000).without_noise();
        let p = sim.run_ber_point(0.0).unwrap();
        assert_eq!(p.errors, 0);
        assert_eq!(p.trials, 5000);
        assert!(p.cap_reached);
    }

    #[test]
    fn deterministic_replay() {
        let a = single_tap(7, 20_000).run_points(&[0.0, 3.0]).unwrap();
        let b = single_tap(7, 20_000).run_points(&[0.0, 3.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn batch_size_does_not_change_result() {
        let mut s = single_tap(3, 20_000);
        let a = s.run_points(&[1.0, 4.0]).unwrap();
        s.stop.batch_size = 999;
        let b = s.run_points(&[1.0, 4.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stop_rule_respected() {
        let p = single_tap(5, 1_000_000).run_ber_point(0.0).unwrap();
        assert!(p.errors >= 100 && p.trials >= 1000);
        assert!(!p.cap_reached);
        assert_eq!(p.ber, p.errors as f64 / p.trials as f64);
    }

    #[test]
    fn statistical_trial_runs() {
        let sim = Simulation::new(
            &ChannelParams::office_los(),
            &SystemParams {
                interferers: 2,
                ..SystemParams::default()
            },
            &PulseShape::standard(),
            ChannelSource::Statistical,
            Toggles::default(),
            stop(1000),
            11,
        )
        .unwrap();
        let r = sim.trial(3).unwrap();
        assert!((r.components.z_u.abs() - omega0(&ChannelParams::office_los()).sqrt()).abs() < 1e-9);
        assert_eq!(r.components.z_u.signum() as i8, r.bit);
        assert_eq!(sim.trial(3).unwrap(), r);
    }

    #[test]
    fn curve_validation() {
        let setup = CurveSetup {
            chan: ChannelParams::office_los(),
            sys: SystemParams::default(),
            pulse: PulseShape::standard(),
            interpolation: Interpolation::default(),
            source: ChannelSource::SingleTap,
            toggles: Toggles::none(),
            stop: stop(2000),
            seed: 1,
            analysis: AnalysisOptions::default(),
            quadrature: QuadratureSpec::default(),
        };
        assert!(run_curve(&setup, &[0.0], &[]).is_err());
        assert!(run_curve(&setup, &[], &[Engine::Analysis]).is_err());
        assert!(run_curve(&setup, &[2.0, 1.0], &[Engine::Analysis]).is_err());
        let pts = run_curve(&setup, &[0.0, 2.0], &[Engine::Simulation, Engine::Analysis]).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[2].engine, Engine::Analysis);
        assert!((pts[3].ber - crate::analysis::ber_awgn(2.0)).abs() < 1e-15);
    }
}
