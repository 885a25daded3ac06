use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uwb-link"))
}

const SMALL: &str = r#"
seed = 3
ebn0_db = [0.0, 10.0]
engines = ["simulation", "analysis"]

[system]
bit_rate_mbps = 15.0

[stop]
min_errors = 20
max_trials = 4000
min_trials = 1000
batch_size = 500
"#;

#[test]
fn curve_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let run = |out: &str| {
        let status = bin()
            .args(["curve", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        fs::read_to_string(dir.path().join(out).join("results.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "engine,ebn0_db,trials,errors,ber,ci_low,ci_high");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("simulation,0,") && lines[4].starts_with("analysis,10,"));

    let out = dir.path().join("a");
    for f in ["breakdown.csv", "manifest.jsonl", "config.resolved.toml", "plot_ber.py", "pulse.csv", "autocorrelation.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest = fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    let entry: serde_json::Value = serde_json::from_str(manifest.lines().next().unwrap()).unwrap();
    assert_eq!(entry["seed"], 3);
    assert_eq!(entry["config"]["stop"]["max_trials"], 4000);

    // replaying the resolved configuration reproduces the results
    let replay = dir.path().join("replay");
    let status = bin()
        .args(["curve", "--config"])
        .arg(out.join("config.resolved.toml"))
        .arg("--out")
        .arg(&replay)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(fs::read_to_string(replay.join("results.csv")).unwrap(), a);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("o");
    let status = bin()
        .args(["ber-sim", "--config"])
        .arg(&cfg)
        .args(["--trials-cap", "1000", "--seed", "9", "--toggle-iasi", "false", "--dump-decisions", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("simulation,") && l.contains(",1000,")));
    let dump = fs::read_to_string(out.join("decisions.jsonl")).unwrap();
    assert_eq!(dump.lines().count(), 6);
    let row: serde_json::Value = serde_json::from_str(dump.lines().next().unwrap()).unwrap();
    assert_eq!(row["z_iasi"], 0.0);
    let resolved = fs::read_to_string(out.join("config.resolved.toml")).unwrap();
    assert!(resolved.contains("seed = 9"));
}

#[test]
fn sweep_preset_writes_one_directory_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig2");
    let status = bin()
        .args(["ber-analytic", "--preset", "fig2_users", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for u in [1, 2, 4, 8] {
        assert!(out.join(format!("users={u}")).join("results.csv").exists());
    }
    let manifest = fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 4);
}

#[test]
fn channel_stats_reports_ray_gap() {
    let out = bin().args(["channel-stats", "--samples", "100000"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.contains("single Poisson")).unwrap();
    let value: f64 = line.split_whitespace().nth(5).unwrap().parse().unwrap();
    assert!((value - 0.337).abs() < 0.337 * 0.02, "{line}");
}

#[test]
fn quick_validate_exits_zero() {
    let out = bin().args(["validate", "--quick"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[system]\nhop_count = 400\n").unwrap();
    let out = bin().args(["curve", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("T_s ≤ T_f"));

    let out = bin().args(["curve", "--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
