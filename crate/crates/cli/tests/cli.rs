//! End-to-end runs of the `p2psim` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use p2psim::csvio::{read_records, RECORD_HEADER};

fn p2psim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_p2psim")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("an error line");
    serde_json::from_str(last).expect("machine-readable error line")
}

#[test]
fn simulate_writes_cell_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.json", r#"{"topology": {"n": 150}, "iterations": 40}"#);
    let out = dir.path().join("out");
    let res = p2psim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "7", "--quiet"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(res.stdout.is_empty() && res.stderr.is_empty());

    let cell = out.join("base_seed7.csv");
    let text = fs::read_to_string(&cell).unwrap();
    assert_eq!(text.lines().next().unwrap(), RECORD_HEADER.join(","));
    assert_eq!(text.lines().count(), 41);
    let records = read_records(&cell).unwrap();
    assert_eq!(records.len(), 40);
    assert_eq!(records[0].iteration, 1);

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().starts_with("base,1,"));
}

#[test]
fn emitted_records_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.json", r#"{"topology": {"n": 150}, "iterations": 30, "growth_percent_per_10": 5}"#);
    let out = dir.path().join("out");
    assert!(p2psim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]).status.success());
    let parsed = read_records(&out.join("base_seed0.csv")).unwrap();
    let sim = whitewash_core::engine::SimConfig {
        topology: whitewash_core::engine::TopologyConfig { n: 150, ..Default::default() },
        iterations: 30,
        growth_percent_per_10: 5.0,
        ..Default::default()
    };
    let direct = whitewash_core::engine::run(&sim).unwrap();
    assert_eq!(parsed.len(), direct.len());
    let same = |a: f64, b: f64| a == b || ((a - b) / b).abs() < 1e-12;
    for (p, d) in parsed.iter().zip(&direct) {
        assert_eq!((p.iteration, p.n_nodes, p.whitewash_attempts), (d.iteration, d.n_nodes, d.whitewash_attempts));
        assert!(same(p.whitewash_fraction, d.whitewash_fraction));
        assert!(same(p.mean_offered_r_ini, d.mean_offered_r_ini));
        assert!(same(p.mean_w_estimate, d.mean_w_estimate));
        assert!(same(p.mean_w_max, d.mean_w_max));
    }
}

#[test]
fn invalid_config_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"r_ini_max0": 0.01, "r_ini_min": 0.5, "x": 3}"#);
    let res = p2psim(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!res.status.success());
    let err = error_line(&res);
    assert_eq!(err["error"], "validation");
    assert_eq!(err["details"].as_array().unwrap().len(), 2);
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\n  \"iterations\": 10,\n  \"x\": oops\n}");
    let res = p2psim(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!res.status.success());
    let err = error_line(&res);
    assert_eq!(err["error"], "parse");
    assert!(err["message"].as_str().unwrap().contains(":3:"), "{err}");
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = p2psim(&[
        "fixed-point",
        "--config",
        dir.path().join("absent.json").to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert_eq!(error_line(&res)["error"], "io");
}

#[test]
fn analytics_commands_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.json", "");
    let cases = [
        ("payoff-sweep", "payoff_sweep.csv", "x,r_ini,regime,mu,z_over_c,k_crossover"),
        ("game-report", "game_report.csv", "kappa,rounds,player,honesty"),
        ("fixed-point", "fixed_point.csv", "r_ini_max,r_ini_min,w_max,w_star"),
        ("frontier", "frontier.csv", "mu,m_ratio,r_star,x_star"),
    ];
    for (command, file, header) in cases {
        let out = dir.path().join(command);
        let res = p2psim(&[command, "--config", &empty, "--out", out.to_str().unwrap(), "--quiet"]);
        assert!(res.status.success(), "{command}: {}", String::from_utf8_lossy(&res.stderr));
        let text = fs::read_to_string(out.join(file)).unwrap();
        assert!(text.starts_with(header), "{command}: {text}");
        assert!(text.lines().count() > 1);
    }
    let report = fs::read_to_string(dir.path().join("game-report/game_report.txt")).unwrap();
    assert!(report.contains("player C check"));
}

#[test]
fn estimator_check_command_reports_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "est.json", r#"{"topology": {"kind": "regular", "n": 400}, "injected": 20}"#);
    let out = dir.path().join("out");
    let res = p2psim(&["estimator-check", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "3", "--quiet"]);
    assert!(res.status.success());
    let mut rows = csv::Reader::from_path(out.join("estimator_check.csv")).unwrap();
    let row = rows.records().next().unwrap().unwrap();
    assert_eq!(&row[0], "regular");
    assert_eq!(&row[4], "3");
    assert!(row[7].parse::<f64>().unwrap() <= 1e-9);
}

#[test]
fn unknown_subcommand_fails() {
    let res = p2psim(&["launch", "--config", "x", "--out", "y"]);
    assert!(!res.status.success());
}
