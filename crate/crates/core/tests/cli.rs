//! End-to-end runs of the command-line binary.

use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coded-caching"))
        .args(args)
        .env_remove("CODED_CACHING_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn gap_for_two_users() {
    let out = run(&["gap", "--model", "ergodic", "--files", "2", "--users", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    assert!(v["max_ratio"].as_f64().unwrap() <= 4.0);
    assert_eq!(v["holds"], true);
}

#[test]
fn curve_csv_format() {
    let out = run(&["--format", "csv", "curve", "--files", "3", "--users", "2", "--step", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r_c,r_u"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 7);
    // Two users over three equally likely files ask for 5/3 distinct files on average.
    assert!((rows[0].1 - 5.0 / 3.0).abs() < 1e-11);
    assert_eq!(rows[6], (3.0, 0.0));
    assert!(rows.windows(2).all(|w| w[1].1 <= w[0].1));
}

#[test]
fn figure_csv_goes_to_directory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_str().unwrap();
    let out = run(&["--format", "csv", "--out", path, "curve", "--figure", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("fig7_chain.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("r_c,lower,achievable,upper"));
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[1] <= v[2] + 1e-9 && v[2] <= v[3] + 1e-9, "{line}");
    }
}

#[test]
fn optimize_reports_certificate() {
    let out = run(&[
        "optimize", "--scheme", "decentralized", "--files", "30", "--users", "5", "--popularity", "zipf:0.8",
        "--cache", "4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let r: Vec<f64> = v["allocation"]["r"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(r.len(), 30);
    assert!((r.iter().sum::<f64>() - 4.0).abs() < 1e-8);
    assert!(v["allocation"]["certificate"]["max_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn simulate_decodes_and_matches_formula() {
    let out = run(&[
        "simulate", "--scheme", "centralized", "--files", "3", "--users", "3", "--cache", "1", "--requests", "1,2,3",
        "--file-bits", "60",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["summary"]["decode_ok"], true);
    assert_eq!(v["summary"]["rate"], v["formula_rate"]);

    let out = run(&[
        "simulate", "--scheme", "decentralized", "--files", "2", "--users", "2", "--cache", "1", "--requests", "1,2",
        "--file-bits", "2000", "--trials", "5", "--seed", "7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["summary"]["decode_ok"], true);
    assert!((v["summary"]["rate"].as_f64().unwrap() - 0.75).abs() < 0.05);
}

#[test]
fn oracle_agrees_with_closed_form() {
    let out = run(&["oracle", "--scheme", "centralized", "--files", "2", "--users", "2", "--levels", "1,0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["exact"], true);
    assert_eq!(v["agrees"], true);
    assert_eq!(v["oracle"].as_f64(), Some(1.0));
}

#[test]
fn config_file_sits_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "# gap run\nfiles = 2\nusers = 9\nmodel = ergodic\n").unwrap();
    let out = run(&["gap", "--config", config.to_str().unwrap(), "--users", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["n"], 2);
    assert_eq!(v["l"], 2);
}

#[test]
fn output_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.json");
    let out = run(&["--out", path.to_str().unwrap(), "gap", "--model", "static", "--files", "3", "--users", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["model"], "static");
}

#[test]
fn bad_input_fails() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["gap", "--files", "0", "--users", "2"]).status.code(), Some(1));
    assert_eq!(run(&["optimize", "--files", "3", "--users", "2", "--cache", "7"]).status.code(), Some(1));
}
