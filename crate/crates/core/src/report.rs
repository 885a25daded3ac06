//! CSV, manifest and plot-script emission.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::analysis::LinkAnalysis;
use crate::config::RunConfig;
use crate::error::Result;
use crate::montecarlo::BerPoint;
use crate::pulse::{AutocorrelationTable, PulseShape};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const RESULTS_FILE: &str = "results.csv";
pub const BREAKDOWN_FILE: &str = "breakdown.csv";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";
pub const PLOT_FILE: &str = "plot_ber.py";

pub fn write_results<W: Write>(points: &[BerPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["engine", "ebn0_db", "trials", "errors", "ber", "ci_low", "ci_high"])?;
    for p in points {
        w.write_record([
            p.engine.name().to_string(),
            p.ebn0_db.to_string(),
            p.trials.to_string(),
            p.errors.to_string(),
            format!("{:e}", p.ber),
            format!("{:e}", p.ci_low),
            format!("{:e}", p.ci_high),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_breakdown<W: Write>(links: &[LinkAnalysis], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "ebn0_db",
        "eb",
        "sigma_n2",
        "sigma_iasi2",
        "sigma_isi2",
        "sigma_mui2",
        "sinr_db",
        "ber",
    ])?;
    for l in links {
        w.write_record([
            l.ebn0_db.to_string(),
            format!("{:e}", l.eb),
            format!("{:e}", l.sigma_n2),
            format!("{:e}", l.sigma_iasi2),
            format!("{:e}", l.sigma_isi2),
            format!("{:e}", l.sigma_mui2),
            format!("{:.6}", l.sinr_db()),
            format!("{:e}", l.ber),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_series<W: Write>(t: &[f64], v: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_ns", "value"])?;
    for (a, b) in t.iter().zip(v) {
        w.write_record([a.to_string(), format!("{b:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Sampled pulse `p(t)`.
pub fn write_pulse<W: Write>(pulse: &PulseShape, out: W) -> Result<()> {
    write_series(&pulse.times(), pulse.samples(), out)
}

/// Autocorrelation grid `R(τ)`; the lag goes in the `t_ns` column.
pub fn write_autocorrelation<W: Write>(table: &AutocorrelationTable, out: W) -> Result<()> {
    write_series(&table.lag_grid(), table.values(), out)
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry<'a> {
    pub version: &'a str,
    pub command: &'a str,
    pub label: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
}

/// Append one manifest line.
pub fn append_manifest(dir: &Path, entry: &ManifestEntry) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join(MANIFEST_FILE))?;
    serde_json::to_writer(&mut f, entry)?;
    writeln!(f)?;
    Ok(())
}

pub fn write_resolved_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::write(dir.join(RESOLVED_CONFIG_FILE), cfg.to_toml()?)?;
    Ok(())
}

/// Matplotlib script reading every `results.csv` below its own directory.
pub fn plot_script() -> &'static str {
    r#"#!/usr/bin/env python3
"""BER curves from results.csv files: simulation as markers with CI bars,
analysis as lines."""
import csv
import pathlib
import sys

import matplotlib.pyplot as plt

root = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).parent)
files = sorted(root.rglob("results.csv"))
if not files:
    sys.exit(f"no results.csv under {root}")

fig, ax = plt.subplots(figsize=(7, 5))
for path in files:
    label = path.parent.name if path.parent != root else ""
    rows = list(csv.DictReader(path.open()))
    for engine, style in (("simulation", "o"), ("analysis", "-")):
        pts = [r for r in rows if r["engine"] == engine]
        if not pts:
            continue
        x = [float(r["ebn0_db"]) for r in pts]
        y = [float(r["ber"]) for r in pts]
        name = f"{engine} {label}".strip()
        if engine == "simulation":
            lo = [max(yy - float(r["ci_low"]), 0.0) for yy, r in zip(y, pts)]
            hi = [float(r["ci_high"]) - yy for yy, r in zip(y, pts)]
            ax.errorbar(x, y, yerr=[lo, hi], fmt=style, capsize=3, label=name)
        else:
            ax.plot(x, y, style, label=name)

ax.set_yscale("log")
ax.set_xlabel("Eb/N0 (dB)")
ax.set_ylabel("BER")
ax.grid(True, which="both", alpha=0.3)
ax.legend(fontsize=8)
fig.tight_layout()
out = root / "ber.png"
fig.savefig(out, dpi=150)
print(out)
"#
}

pub fn write_plot_script(dir: &Path) -> Result<()> {
    let path = dir.join(PLOT_FILE);
    fs::write(&path, plot_script())?;
    Ok(())
}

pub fn create(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(File::create(path)?)
}
