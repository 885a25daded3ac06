use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use uwb_link::channel::{generate_realization, RayModel};
use uwb_link::config::{self, RunConfig};
use uwb_link::montecarlo::{BerPoint, Engine};
use uwb_link::pulse::autocorrelation;
use uwb_link::report::{self, ManifestEntry};
use uwb_link::rng::StreamKey;
use uwb_link::validation::{self, gap_statistics, pdp_decay_fit, SuiteLevel};
use uwb_link::Error;

#[derive(Parser)]
#[command(name = "uwb-link", version, about = "TH-BPSK IR-UWB link BER: simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical ray/cluster gaps and intra-cluster decay against the model.
    ChannelStats {
        #[command(flatten)]
        common: Common,
        /// Inter-arrival gaps sampled for each mean.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        /// Channel realizations for the decay fit.
        #[arg(long, default_value_t = 2_000)]
        realizations: u64,
    },
    /// Monte Carlo BER only.
    BerSim {
        #[command(flatten)]
        common: Common,
        /// Write the first N trials' decision components per grid point.
        #[arg(long, value_name = "N")]
        dump_decisions: Option<u64>,
    },
    /// Closed-form BER only.
    BerAnalytic {
        #[command(flatten)]
        common: Common,
    },
    /// Both engines, comparison CSV and plot script.
    Curve {
        #[command(flatten)]
        common: Common,
    },
    /// Oracle suite; exits nonzero on any failed check.
    Validate {
        /// Reduced sample counts.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated subset of `simulation,analysis`.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    engines: Option<Vec<String>>,
    #[arg(long, value_name = "BOOL")]
    toggle_iasi: Option<bool>,
    #[arg(long, value_name = "BOOL")]
    toggle_isi: Option<bool>,
    #[arg(long, value_name = "BOOL")]
    toggle_mui: Option<bool>,
    #[arg(long, value_name = "N")]
    trials_cap: Option<u64>,
    #[arg(long, value_name = "N")]
    min_errors: Option<u64>,
}

enum Failure {
    Lib(Error),
    Checks(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

#[derive(Serialize)]
struct ErrorSummary {
    error: &'static str,
    message: String,
    exit_code: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (kind, message, code) = match f {
                Failure::Lib(e) => {
                    let code = match e.kind() {
                        "config" => 2,
                        "numerical" => 3,
                        _ => 4,
                    };
                    (e.kind(), e.to_string(), code)
                }
                Failure::Checks(n) => ("validation", format!("{n} check(s) failed"), 5),
            };
            let summary = ErrorSummary {
                error: kind,
                message,
                exit_code: code,
            };
            eprintln!("{}", serde_json::to_string(&summary).unwrap_or_default());
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Outcome<()> {
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    match cli.command {
        Command::ChannelStats {
            common,
            samples,
            realizations,
        } => channel_stats(&common, samples, realizations),
        Command::BerSim { common, dump_decisions } => {
            let cfg = resolve(&common, Some(&[Engine::Simulation]))?;
            run_curves(&cfg, &command_line, "ber-sim", dump_decisions)
        }
        Command::BerAnalytic { common } => {
            let cfg = resolve(&common, Some(&[Engine::Analysis]))?;
            run_curves(&cfg, &command_line, "ber-analytic", None)
        }
        Command::Curve { common } => {
            let cfg = resolve(&common, None)?;
            run_curves(&cfg, &command_line, "curve", None)
        }
        Command::Validate { quick, seed } => {
            let level = if quick { SuiteLevel::Quick } else { SuiteLevel::Full };
            let results = validation::run_suite(level, seed)?;
            let mut failed = 0;
            for r in &results {
                println!(
                    "{} {:<36} {:>7.2}s  {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.seconds,
                    r.detail
                );
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                return Err(Failure::Checks(failed));
            }
            Ok(())
        }
    }
}

fn resolve(common: &Common, engines: Option<&[Engine]>) -> Outcome<RunConfig> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => config::load_config(path)?,
        (None, Some(name)) => config::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(list) = &common.engines {
        cfg.engines = list.iter().map(|s| s.parse()).collect::<Result<_, Error>>()?;
    }
    if let Some(e) = engines {
        cfg.engines = e.to_vec();
    }
    if let Some(b) = common.toggle_iasi {
        cfg.toggles.iasi = b;
    }
    if let Some(b) = common.toggle_isi {
        cfg.toggles.isi = b;
    }
    if let Some(b) = common.toggle_mui {
        cfg.toggles.mui = b;
    }
    if let Some(n) = common.trials_cap {
        cfg.stop.max_trials = n;
        cfg.stop.min_trials = cfg.stop.min_trials.min(n);
    }
    if let Some(n) = common.min_errors {
        cfg.stop.min_errors = n;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn run_curves(
    cfg: &RunConfig,
    command_line: &str,
    command: &str,
    dump: Option<u64>,
) -> Outcome<()> {
    let root = output_dir(cfg);
    fs::create_dir_all(&root)?;
    let manifest = root.join(report::MANIFEST_FILE);
    if manifest.exists() {
        fs::remove_file(&manifest)?;
    }
    report::write_resolved_config(&root, cfg)?;
    report::write_plot_script(&root)?;

    let runs = cfg.runs()?;
    let first = &runs[0].setup;
    report::write_pulse(&first.pulse, report::create(&root.join("pulse.csv"))?)?;
    report::write_autocorrelation(
        &autocorrelation(&first.pulse).with_interpolation(first.interpolation),
        report::create(&root.join("autocorrelation.csv"))?,
    )?;

    let multi = runs.len() > 1;
    for run in &runs {
        let dir = if multi { root.join(&run.label) } else { root.clone() };
        fs::create_dir_all(&dir)?;
        let mut points: Vec<BerPoint> = Vec::new();
        for &engine in &run.engines {
            match engine {
                Engine::Simulation => {
                    let sim = run.setup.simulation()?;
                    points.extend(sim.run_points(&run.ebn0_db)?);
                    if let Some(n) = dump {
                        write_decisions(&dir.join("decisions.jsonl"), &sim, &run.ebn0_db, n)?;
                    }
                }
                Engine::Analysis => {
                    let links = run.setup.analysis_curve(&run.ebn0_db)?;
                    report::write_breakdown(&links, report::create(&dir.join(report::BREAKDOWN_FILE))?)?;
                    points.extend(links.iter().map(BerPoint::analytic));
                }
            }
        }
        report::write_results(&points, report::create(&dir.join(report::RESULTS_FILE))?)?;
        report::append_manifest(
            &root,
            &ManifestEntry {
                version: report::VERSION,
                command: command_line,
                label: &run.label,
                seed: cfg.seed,
                config: cfg,
            },
        )?;
        print_points(command, &run.label, &points);
    }
    println!("wrote {}", root.display());
    Ok(())
}

fn write_decisions(
    path: &Path,
    sim: &uwb_link::montecarlo::Simulation,
    grid: &[f64],
    n: u64,
) -> Outcome<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        ebn0_db: f64,
        index: u64,
        bit: i8,
        #[serde(flatten)]
        components: &'a uwb_link::modem::DecisionComponents,
    }
    let mut f = std::io::BufWriter::new(report::create(path)?);
    let records = (0..n).map(|i| sim.trial(i)).collect::<Result<Vec<_>, Error>>()?;
    for &db in grid {
        let sigma = sim.noise_sigma(db);
        for r in &records {
            let c = r.with_noise(sigma);
            let row = Row {
                ebn0_db: db,
                index: r.index,
                bit: r.bit,
                components: &c,
            };
            serde_json::to_writer(&mut f, &row).map_err(Error::from)?;
            writeln!(f)?;
        }
    }
    f.flush()?;
    Ok(())
}

fn print_points(command: &str, label: &str, points: &[BerPoint]) {
    let head = if label.is_empty() {
        command.to_string()
    } else {
        format!("{command} [{label}]")
    };
    println!("{head}");
    println!(
        "  {:<10} {:>7} {:>10} {:>8} {:>11} {:>11} {:>11}",
        "engine", "Eb/N0", "trials", "errors", "ber", "ci_low", "ci_high"
    );
    for p in points {
        println!(
            "  {:<10} {:>7.2} {:>10} {:>8} {:>11.4e} {:>11.4e} {:>11.4e}{}",
            p.engine.name(),
            p.ebn0_db,
            p.trials,
            p.errors,
            p.ber,
            p.ci_low,
            p.ci_high,
            if p.cap_reached { "  (cap)" } else { "" }
        );
    }
}

fn channel_stats(common: &Common, samples: u64, realizations: u64) -> Outcome<()> {
    let cfg = resolve(common, None)?;
    let chan = &cfg.channel;
    let mut single = chan.clone();
    single.ray_model = RayModel::SinglePoisson;
    let g1 = gap_statistics(&single, samples, cfg.seed);
    let gm = gap_statistics(chan, samples, StreamKey::new(cfg.seed).child(1).raw());
    println!("mean ray gap, single Poisson    {:.4} ns  (1/λ₂ = {:.4} ns)", g1.mean_ray_gap_ns, single.mean_ray_interval());
    let expected = match chan.ray_model {
        RayModel::SinglePoisson => chan.mean_ray_interval(),
        RayModel::MixturePoisson => {
            chan.mixture_beta / chan.ray_rate_1 + (1.0 - chan.mixture_beta) / chan.ray_rate_2
        }
    };
    println!("mean ray gap, configured model  {:.4} ns  (expected {expected:.4} ns)", gm.mean_ray_gap_ns);
    println!("mean cluster gap                {:.2} ns  (1/Λ = {:.2} ns)", g1.mean_cluster_gap_ns, chan.mean_cluster_interval());
    let fit = pdp_decay_fit(chan, realizations, 30.0, StreamKey::new(cfg.seed).child(2).raw());
    match fit {
        Some(g) => println!("intra-cluster decay fit         {g:.3} ns  (γ₀ = {:.3} ns)", chan.gamma_l(0.0)),
        None => println!("intra-cluster decay fit         unavailable"),
    }
    if let Some(dir) = &cfg.output {
        fs::create_dir_all(dir)?;
        let r = generate_realization(chan, StreamKey::new(cfg.seed).child(3));
        r.write_csv(report::create(&dir.join("realization.csv"))?)?;
        report::write_resolved_config(dir, &cfg)?;
        println!("wrote {}", dir.join("realization.csv").display());
    }
    Ok(())
}
