use std::fs;
use std::path::Path;
use std::process::Command;

use alpforce_cli::run;
use alpforce_core::output::{read_csv, Table};
use tempfile::TempDir;

fn alp(dir: &Path, args: &[&str]) -> alpforce_cli::CommandResult {
    let mut argv = vec!["alp", "--out", dir.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

#[test]
fn unknown_command_and_flag_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(alp(dir.path(), &["frobnicate"]).exit_code, 2);
    let r = alp(dir.path(), &["trap", "--no-such-flag"]);
    assert_eq!(r.exit_code, 2);
    assert!(r.summary.contains("Usage"));
    assert!(r.artifacts.is_empty());
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(["alp", "--help"]).exit_code, 0);
}

#[test]
fn bad_config_value_names_the_key() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "temperature = -4 K\n").unwrap();
    let r = alp(dir.path(), &["--config", cfg.to_str().unwrap(), "gtilde"]);
    assert_eq!(r.exit_code, 1);
    assert!(r.summary.contains("temperature"), "{}", r.summary);

    fs::write(&cfg, "warp_factor = 9\n").unwrap();
    let r = alp(dir.path(), &["--config", cfg.to_str().unwrap(), "gtilde"]);
    assert_eq!(r.exit_code, 1);
    assert!(r.summary.contains("warp_factor"));
}

#[test]
fn bad_convention_flag_names_the_key() {
    let dir = TempDir::new().unwrap();
    let r = alp(dir.path(), &["--thermal-convention", "sideways", "gtilde"]);
    assert_eq!(r.exit_code, 1);
    assert!(r.summary.contains("thermal_convention"));
}

#[test]
fn exclusion_with_three_points() {
    let dir = TempDir::new().unwrap();
    let r = alp(dir.path(), &["exclusion", "--points", "3", "--plot"]);
    assert_eq!(r.exit_code, 0, "{}", r.summary);
    assert_eq!(r.artifacts.len(), 3);
    let t = read_csv(&dir.path().join("exclusion.csv")).unwrap();
    assert_eq!(&t.columns[..4], ["lambda_m", "m_a_eV", "g_limit", "worst_case_flag"]);
    let l = t.numeric_column("lambda_m").unwrap();
    assert_eq!(l.len(), 3);
    assert!(l.windows(2).all(|w| w[1] > w[0]));
    let script = fs::read_to_string(dir.path().join("plot_exclusion.py")).unwrap();
    assert!(script.contains("exclusion.csv"));
}

#[test]
fn budget_csv_and_json_agree() {
    let dir = TempDir::new().unwrap();
    let r = alp(dir.path(), &["budget"]);
    assert_eq!(r.exit_code, 0, "{}", r.summary);
    let csv = read_csv(&dir.path().join("budget.csv")).unwrap();
    let json = Table::from_json(&fs::read_to_string(dir.path().join("budget.json")).unwrap()).unwrap();
    assert_eq!(csv, json);
    assert_eq!(
        &csv.columns[..5],
        ["source", "S_ff_N2_per_Hz", "g_contribution", "reference_value", "ratio"]
    );
    assert_eq!(csv.metadata.thermal_convention, "table-matched");
    assert!(!csv.metadata.config_hash.is_empty());
    let ratio = csv.numeric_column("ratio").unwrap();
    assert!((ratio[0] - 1.0).abs() < 0.02);
    assert!(r.warnings.iter().any(|w| w.contains("tabulated budget RSS")));
}

#[test]
fn outputs_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        assert_eq!(
            alp(d.path(), &["exclusion", "--points", "4", "--worst-case"]).exit_code,
            0
        );
    }
    assert_eq!(
        fs::read(a.path().join("exclusion.csv")).unwrap(),
        fs::read(b.path().join("exclusion.csv")).unwrap()
    );
}

#[test]
fn json_summary_is_one_json_line() {
    let dir = TempDir::new().unwrap();
    let r = alp(dir.path(), &["--json", "gtilde", "--points", "10"]);
    assert_eq!(r.exit_code, 0);
    assert!(!r.summary.contains('\n'));
    let v: serde_json::Value = serde_json::from_str(&r.summary).unwrap();
    assert!((v["gtilde_at_omega_z"].as_f64().unwrap() - 2.5734).abs() < 1e-3);
}

#[test]
fn trap_and_zeta_sm_write_tables() {
    let dir = TempDir::new().unwrap();
    let r = alp(dir.path(), &["trap", "--points", "50"]);
    assert_eq!(r.exit_code, 0, "{}", r.summary);
    assert_eq!(read_csv(&dir.path().join("trap.csv")).unwrap().rows.len(), 50);
    let r = alp(dir.path(), &["zeta-sm", "--lambda-um", "1,3", "--bruteforce"]);
    assert_eq!(r.exit_code, 0, "{}", r.summary);
    let t = read_csv(&dir.path().join("zeta_sm.csv")).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.columns.len(), 4);
}

#[test]
fn simulate_short_inflated_run() {
    let dir = TempDir::new().unwrap();
    let r = alp(
        dir.path(),
        &["simulate", "--duration", "10", "--inflated", "--decimation", "4"],
    );
    assert_eq!(r.exit_code, 0, "{}", r.summary);
    assert!(dir.path().join("trajectory.csv").is_file());
    assert!(dir.path().join("psd.csv").is_file());
}

#[test]
fn too_short_simulation_is_rejected() {
    let dir = TempDir::new().unwrap();
    let r = alp(dir.path(), &["simulate", "--duration", "1"]);
    assert_eq!(r.exit_code, 1);
    assert!(r.summary.contains("duration"));
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let r = alp(&blocker.join("sub"), &["gtilde"]);
    assert_eq!(r.exit_code, 1);
}

#[test]
fn validate_reports_the_failing_suite() {
    let dir = TempDir::new().unwrap();
    let r = alp(dir.path(), &["validate"]);
    assert_eq!(r.exit_code, 1);
    assert!(r.summary.contains("gtilde PASS"), "{}", r.summary);
    assert!(r.summary.contains("zeta_s PASS"), "{}", r.summary);
    assert!(r.summary.contains("zeta_sm FAIL"), "{}", r.summary);
    let t = read_csv(&dir.path().join("validate.csv")).unwrap();
    assert_eq!(t.rows.len(), 200 + 3 + 5);
}

#[test]
fn binary_reads_config_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("env.cfg");
    fs::write(&cfg, "t1 = 0.1 s\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_alp"))
        .args(["--out", dir.path().to_str().unwrap(), "gtilde", "--points", "5"])
        .env("ALP_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("T1 0.1 s"), "{stdout}");

    let out = Command::new(env!("CARGO_BIN_EXE_alp")).arg("nope").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
