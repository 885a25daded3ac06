//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use uwb_link::analysis::{ber_awgn, sigma_mui2, AnalysisOptions, KernelChoice};
use uwb_link::channel::{ChannelParams, RayModel};
use uwb_link::config::{self, RunSpec};
use uwb_link::modem::SystemParams;
use uwb_link::montecarlo::{run_curve, BerPoint, Engine};
use uwb_link::pulse::PulseShape;
use uwb_link::quadrature::QuadratureSpec;
use uwb_link::validation::{
    awgn_rows, correlator_oracle, gap_statistics, nakagami_second_moment, pdf_normalizations, pdp_decay_fit,
    quadrature_oracles, within_binomial,
};
use uwb_link::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn run_spec(preset: &str, label: &str) -> Result<RunSpec> {
    let runs = config::preset(preset)?.runs()?;
    Ok(runs.into_iter().find(|r| r.label == label).expect("preset run label"))
}

fn engine_points(points: &[BerPoint], engine: Engine) -> Vec<BerPoint> {
    points.iter().filter(|p| p.engine == engine).copied().collect()
}

fn at(points: &[BerPoint], db: f64) -> BerPoint {
    *points.iter().find(|p| p.ebn0_db == db).expect("grid point")
}

fn awgn() -> Result<Outcome> {
    let rows = awgn_rows(&[0.0, 2.0, 4.0, 6.0, 8.0], 100_000, 101)?;
    let ok = rows.iter().all(|r| r.3 >= 100_000 && within_binomial(r.1, r.2, r.3, 3.0));
    let detail = rows
        .iter()
        .map(|r| format!("{}dB {:.3e}/{:.3e}", r.0, r.1, r.2))
        .collect::<Vec<_>>()
        .join(" ");
    outcome(ok, detail)
}

fn gaps() -> Result<Outcome> {
    let mut chan = ChannelParams::office_los();
    chan.ray_model = RayModel::SinglePoisson;
    let g = gap_statistics(&chan, 100_000, 102);
    let ray = (g.mean_ray_gap_ns / (1.0 / 2.97) - 1.0).abs();
    let cl = (g.mean_cluster_gap_ns / 62.5 - 1.0).abs();
    outcome(
        ray < 0.02 && cl < 0.02,
        format!("ray {:.4} ns, cluster {:.2} ns", g.mean_ray_gap_ns, g.mean_cluster_gap_ns),
    )
}

fn correlator() -> Result<Outcome> {
    let worst = correlator_oracle(100, 103)?;
    outcome(worst < 1e-3, format!("max relative gap {worst:.2e}"))
}

fn quadrature() -> Result<Outcome> {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, q, s) in quadrature_oracles(10_000_000, 104)? {
        let tol = if name == "omega_sigma" { 0.02 } else { 0.01 };
        let rel = s.relative_error(q);
        ok &= rel < tol;
        detail.push(format!("{name} {rel:.2e}"));
    }
    outcome(ok, detail.join(", "))
}

fn fig1_floor(sim_15: &[BerPoint]) -> Result<Outcome> {
    let off = run_spec("fig1_15mbps", "iasi=off")?;
    let off = run_curve(&off.setup, &off.ebn0_db, &[Engine::Analysis])?;
    let ratio_on = at(sim_15, 20.0).ber / at(sim_15, 16.0).ber;
    let drop_off = at(&off, 16.0).ber / at(&off, 20.0).ber;
    outcome(
        ratio_on > 0.5 && drop_off > 10.0,
        format!("IASI on: BER20/BER16 = {ratio_on:.3}; IASI off: BER16/BER20 = {drop_off:.2e}"),
    )
}

fn fig1_low_rate() -> Result<Outcome> {
    let run = run_spec("fig1_1mbps", "iasi=on")?;
    let sim = run_curve(&run.setup, &run.ebn0_db, &[Engine::Simulation])?;
    let outside: Vec<&BerPoint> = sim
        .iter()
        .filter(|p| !within_binomial(p.ber, ber_awgn(p.ebn0_db), p.trials, 3.0))
        .collect();
    let detail = match outside.first() {
        None => format!("all {} points within 3σ", sim.len()),
        Some(p) => format!(
            "{}/{} points outside 3σ, first at {} dB (BER {:.3e} vs {:.3e}); 20 dB: {:.3e}",
            outside.len(),
            sim.len(),
            p.ebn0_db,
            p.ber,
            ber_awgn(p.ebn0_db),
            at(&sim, 20.0).ber
        ),
    };
    outcome(outside.is_empty(), detail)
}

fn fig2_users() -> Result<Outcome> {
    let runs = config::preset("fig2_users")?.runs()?;
    let mut curves = Vec::new();
    for r in &runs {
        let pts = run_curve(&r.setup, &r.ebn0_db, &[Engine::Simulation, Engine::Analysis])?;
        curves.push((engine_points(&pts, Engine::Simulation), engine_points(&pts, Engine::Analysis)));
    }
    let mut ok = true;
    let mut notes = Vec::new();
    for w in curves.windows(2) {
        for (a, b) in w[0].1.iter().zip(&w[1].1) {
            if b.ber < a.ber {
                ok = false;
                notes.push(format!("analysis drops at {} dB", a.ebn0_db));
            }
        }
        for (a, b) in w[0].0.iter().zip(&w[1].0) {
            if b.ber < a.ber && !a.overlaps(b) {
                ok = false;
                notes.push(format!("simulation drops at {} dB", a.ebn0_db));
            }
        }
    }
    let chan = ChannelParams::office_los();
    let pulse = PulseShape::standard();
    let kernel = AnalysisOptions::default().kernel_for(&pulse);
    let q = QuadratureSpec::default();
    let base = sigma_mui2(&chan, &SystemParams { interferers: 1, ..SystemParams::default() }, &kernel, 1e-3, &q)?;
    for n in [3u32, 7] {
        let v = sigma_mui2(&chan, &SystemParams { interferers: n, ..SystemParams::default() }, &kernel, 1e-3, &q)?;
        if ((v / base) / n as f64 - 1.0).abs() > 1e-12 {
            ok = false;
            notes.push(format!("σ²_MUI not linear at N_u = {n}"));
        }
    }
    let last = curves.last().unwrap();
    notes.push(format!(
        "8 users at 20 dB: simulation {:.3e}, analysis {:.3e}",
        at(&last.0, 20.0).ber,
        at(&last.1, 20.0).ber
    ));
    outcome(ok, notes.join("; "))
}

fn discrepancy(sim_15: &[BerPoint]) -> Result<Outcome> {
    let mut run = run_spec("fig1_15mbps", "iasi=on")?;
    run.setup.analysis.kernel = KernelChoice::Continuous;
    run.setup.chan.ray_model = RayModel::SinglePoisson;
    let ana = run_curve(&run.setup, &run.ebn0_db, &[Engine::Analysis])?;
    let mut ok = true;
    let mut detail = Vec::new();
    for p in sim_15.iter().filter(|p| p.ebn0_db >= 16.0) {
        let a = at(&ana, p.ebn0_db).ber;
        ok &= a >= p.ber;
        detail.push(format!("{}dB analysis {a:.3e} vs simulation {:.3e}", p.ebn0_db, p.ber));
    }
    outcome(ok, detail.join("; "))
}

fn distributions() -> Result<Outcome> {
    let chan = ChannelParams::office_los();
    let norms = pdf_normalizations(&chan, SystemParams::default().hop_span())?;
    let worst_norm = norms.iter().map(|(_, v)| (v - 1.0).abs()).fold(0.0, f64::max);
    let mut worst_m: f64 = 0.0;
    for (i, m) in [0.5, 1.0, 3.0].into_iter().enumerate() {
        let e = nakagami_second_moment(m, 2.0, 1_000_000, 108 + i as u64)?;
        worst_m = worst_m.max((e.mean - 1.0).abs());
    }
    let gamma = chan.gamma_l(0.0);
    let fit = pdp_decay_fit(&chan, 10_000, 30.0, 111);
    let fit_err = fit.map_or(f64::INFINITY, |g| (g / gamma - 1.0).abs());
    outcome(
        worst_norm < 1e-6 && worst_m < 0.005 && fit_err < 0.1,
        format!(
            "normalization {worst_norm:.1e}, Nakagami {worst_m:.2e}, decay fit {:.3} ns vs {gamma} ns",
            fit.unwrap_or(f64::NAN)
        ),
    )
}

fn report(id: &str, name: &str, limit: Duration, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let t = Instant::now();
    let r = f();
    let elapsed = t.elapsed();
    let (passed, detail) = match r {
        Ok(o) => (o.passed && elapsed <= limit, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let slow = if elapsed > limit { " (over time limit)" } else { "" };
    println!(
        "{} {id:<3} {name:<34} {:>7.1}s / {:>4}s{slow}  {detail}",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    passed
}

fn main() -> ExitCode {
    let min = |m: u64| Duration::from_secs(60 * m);
    let mut all = true;
    all &= report("1", "AWGN closed form", min(2), awgn);
    all &= report("2", "mean arrival gaps", Duration::from_secs(30), gaps);
    all &= report("3", "tap vs waveform correlator", min(1), correlator);
    all &= report("4", "quadrature vs sampling", min(5), quadrature);

    let t = Instant::now();
    let sim_15 = run_spec("fig1_15mbps", "iasi=on")
        .and_then(|r| run_curve(&r.setup, &r.ebn0_db, &[Engine::Simulation]));
    let shared = t.elapsed();
    match sim_15 {
        Ok(sim_15) => {
            all &= report("5a", "15 Mbps error floor", min(15).saturating_sub(shared), || fig1_floor(&sim_15));
            all &= report("5b", "1 Mbps curve against AWGN", min(15), fig1_low_rate);
            all &= report("6", "user-count ordering, MUI linearity", min(20), fig2_users);
            all &= report("7", "analysis above simulation >= 16 dB", min(15).saturating_sub(shared), || {
                discrepancy(&sim_15)
            });
        }
        Err(e) => {
            for id in ["5a", "7"] {
                println!("FAIL {id:<3} 15 Mbps simulation error: {e}");
            }
            all = false;
            all &= report("5b", "1 Mbps curve against AWGN", min(15), fig1_low_rate);
            all &= report("6", "user-count ordering, MUI linearity", min(20), fig2_users);
        }
    }
    all &= report("8", "distribution suite", min(5), distributions);

    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: some criteria failed");
        ExitCode::FAILURE
    }
}
