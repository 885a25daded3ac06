//! Run configuration (TOML) and bundled presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisOptions;
use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::modem::{SystemParams, Toggles};
use crate::montecarlo::{ChannelSource, CurveSetup, Engine, StopRule};
use crate::pulse::{make_gaussian_doublet, Interpolation, PulseShape};
use crate::quadrature::QuadratureSpec;

pub const PRESETS: &[(&str, &str)] = &[
    ("awgn", include_str!("../presets/awgn.toml")),
    ("fig1_15mbps", include_str!("../presets/fig1_15mbps.toml")),
    ("fig1_1mbps", include_str!("../presets/fig1_1mbps.toml")),
    ("fig2_users", include_str!("../presets/fig2_users.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    pub duration_ns: f64,
    /// Target 10 dB bandwidth; the shape parameter is calibrated to it unless
    /// `shape_ns` is given.
    pub bandwidth_10db_ghz: f64,
    pub shape_ns: Option<f64>,
    /// Sample intervals across the pulse window.
    pub samples_per_duration: usize,
    /// Interpolation of the simulator's autocorrelation table.
    pub interpolation: Interpolation,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig {
            duration_ns: crate::pulse::DEFAULT_DURATION_NS,
            bandwidth_10db_ghz: crate::pulse::DEFAULT_BANDWIDTH_10DB_GHZ,
            shape_ns: None,
            samples_per_duration: crate::pulse::DEFAULT_SAMPLES_PER_DURATION,
            interpolation: Interpolation::default(),
        }
    }
}

impl PulseConfig {
    pub fn build(&self) -> Result<PulseShape> {
        if self.samples_per_duration == 0 {
            return Err(Error::param("samples_per_duration", "must be positive"));
        }
        let dt = self.duration_ns / self.samples_per_duration as f64;
        match self.shape_ns {
            Some(s) => make_gaussian_doublet(s, self.duration_ns, dt),
            None => PulseShape::calibrated(self.bandwidth_10db_ghz, self.duration_ns, dt),
        }
    }
}

/// Parameters swept across runs; each list replaces the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    /// Active users `N_u + 1`.
    pub total_users: Option<Vec<u32>>,
    pub iasi: Option<Vec<bool>>,
    pub bit_rate_mbps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub ebn0_db: Vec<f64>,
    pub engines: Vec<Engine>,
    pub output: Option<PathBuf>,
    pub channel_model: ChannelSource,
    pub pulse: PulseConfig,
    pub channel: ChannelParams,
    pub system: SystemParams,
    pub toggles: Toggles,
    pub stop: StopRule,
    pub quadrature: QuadratureSpec,
    pub analysis: AnalysisOptions,
    pub sweep: Sweep,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            ebn0_db: (0..=10).map(|i| 2.0 * i as f64).collect(),
            engines: vec![Engine::Simulation, Engine::Analysis],
            output: None,
            channel_model: ChannelSource::default(),
            pulse: PulseConfig::default(),
            channel: ChannelParams::default(),
            system: SystemParams::default(),
            toggles: Toggles::default(),
            stop: StopRule::default(),
            quadrature: QuadratureSpec::default(),
            analysis: AnalysisOptions::default(),
            sweep: Sweep::default(),
        }
    }
}

/// One fully resolved run of a (possibly swept) configuration.
#[derive(Debug, Clone)]
pub struct RunSpec {
    /// Empty for an unswept configuration, else e.g. `users=4` or `iasi=off`.
    pub label: String,
    pub setup: CurveSetup,
    pub ebn0_db: Vec<f64>,
    pub engines: Vec<Engine>,
}

fn parse(text: &str, origin: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Read, parse and validate a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
        Error::Config(format!("unknown preset `{name}` (available: {})", names.join(", ")))
    })?;
    parse(text, &format!("preset {name}"))
}

pub fn from_toml_str(text: &str) -> Result<RunConfig> {
    parse(text, "config")
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ebn0_db.is_empty() {
            return Err(Error::Config("ebn0_db grid is empty".into()));
        }
        if self.ebn0_db.iter().any(|x| !x.is_finite()) || self.ebn0_db.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("ebn0_db must be finite and strictly ascending".into()));
        }
        if self.engines.is_empty() {
            return Err(Error::Config("no engine selected".into()));
        }
        self.quadrature.validate()?;
        self.stop.validate()?;
        if let Some(u) = &self.sweep.total_users {
            if u.is_empty() || u.contains(&0) {
                return Err(Error::Config("sweep.total_users entries must be at least 1".into()));
            }
        }
        self.runs().map(|_| ())
    }

    /// Serialize with all defaults filled in.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Expand the sweep into individual runs, validating each.
    pub fn runs(&self) -> Result<Vec<RunSpec>> {
        let pulse = self.pulse.build()?;
        self.channel.validate()?;
        let users: Vec<Option<u32>> = match &self.sweep.total_users {
            Some(v) => v.iter().map(|&u| Some(u)).collect(),
            None => vec![None],
        };
        let iasi: Vec<Option<bool>> = match &self.sweep.iasi {
            Some(v) => v.iter().map(|&b| Some(b)).collect(),
            None => vec![None],
        };
        let rates: Vec<Option<f64>> = match &self.sweep.bit_rate_mbps {
            Some(v) => v.iter().map(|&r| Some(r)).collect(),
            None => vec![None],
        };
        let mut out = Vec::new();
        for &rate in &rates {
            for &u in &users {
                for &ia in &iasi {
                    let mut sys = self.system.clone();
                    let mut toggles = self.toggles;
                    let mut label = Vec::new();
                    if let Some(r) = rate {
                        sys.bit_rate_mbps = r;
                        sys.frame_ns = None;
                        label.push(format!("rate={r}"));
                    }
                    if let Some(u) = u {
                        sys.interferers = u - 1;
                        sys.user_delays_ns = None;
                        label.push(format!("users={u}"));
                    }
                    if let Some(b) = ia {
                        toggles.iasi = b;
                        label.push(format!("iasi={}", if b { "on" } else { "off" }));
                    }
                    sys.validate()?;
                    out.push(RunSpec {
                        label: label.join(","),
                        setup: CurveSetup {
                            chan: self.channel.clone(),
                            sys,
                            pulse: pulse.clone(),
                            interpolation: self.pulse.interpolation,
                            source: self.channel_model,
                            toggles,
                            stop: self.stop,
                            seed: self.seed,
                            analysis: self.analysis,
                            quadrature: self.quadrature,
                        },
                        ebn0_db: self.ebn0_db.clone(),
                        engines: self.engines.clone(),
                    });
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, _) in PRESETS {
            preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn fig1_preset_values() {
        let c = preset("fig1_15mbps").unwrap();
        assert_eq!(c.system.pulses_per_symbol, 1);
        assert_eq!(c.system.hop_slot_ns, 0.5);
        assert_eq!(c.system.hop_count, 16);
        assert_eq!(c.system.bit_rate_mbps, 15.0);
        assert_eq!(c.system.interferers, 0);
        let runs = c.runs().unwrap();
        assert_eq!(runs.len(), 2);
        assert!(runs[0].setup.toggles.iasi && !runs[1].setup.toggles.iasi);
    }

    #[test]
    fn fig2_preset_expands_users() {
        let runs = preset("fig2_users").unwrap().runs().unwrap();
        let users: Vec<u32> = runs.iter().map(|r| r.setup.sys.interferers + 1).collect();
        assert_eq!(users, vec![1, 2, 4, 8]);
        assert!(runs.iter().all(|r| r.setup.sys.bit_rate_mbps == 15.0));
    }

    #[test]
    fn unknown_key_rejected() {
        let e = from_toml_str("seed = 1\nbogus = 2\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = from_toml_str("[channel]\nlambda = 3\n").unwrap_err();
        assert!(e.to_string().contains("lambda"), "{e}");
    }

    #[test]
    fn hop_constraint_named() {
        let e = from_toml_str("[system]\nhop_count = 400\n").unwrap_err();
        assert!(e.to_string().contains("T_s ≤ T_f"), "{e}");
    }

    #[test]
    fn parse_error_has_line_context() {
        let e = from_toml_str("seed = 1\nebn0_db = [0, \n").unwrap_err();
        assert!(e.to_string().contains("line 2") || e.to_string().contains("2 |"), "{e}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = preset("fig2_users").unwrap();
        let back = from_toml_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn bad_grid_rejected() {
        assert!(from_toml_str("ebn0_db = []").is_err());
        assert!(from_toml_str("ebn0_db = [2.0, 1.0]").is_err());
        assert!(from_toml_str("engines = []").is_err());
    }
}
