//! End-to-end checks of the command-line interface: exit codes, report
//! schema, output formats, and byte-level determinism across thread counts.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tailcluster")
}

fn workdir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tailcluster-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_cfg(name: &str, text: &str) -> PathBuf {
    let path = workdir().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn ar1_cfg() -> PathBuf {
    write_cfg(
        "ar1.cfg",
        "kind = ar1_tail_chain\nphi = 0.5\nalpha = 1.0\nwindow = 24\n",
    )
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn strip_volatile(text: &str) -> String {
    // wall time varies per run; the thread count is echoed config, not output
    text.lines()
        .filter(|l| !l.contains("wall_time_ms") && !l.contains("\"threads\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn estimate_all_writes_report_with_at_least_five_estimates() {
    let cfg = ar1_cfg();
    let out_path = workdir().join("r.json");
    let out = run(&[
        "estimate",
        "--model",
        cfg.to_str().unwrap(),
        "--rep",
        "all",
        "--n",
        "2000",
        "--seed",
        "7",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let estimates = report["estimates"].as_array().unwrap();
    assert!(estimates.len() >= 5, "{} estimates", estimates.len());
}

#[test]
fn missing_seed_exits_2() {
    let cfg = ar1_cfg();
    let out = run(&["estimate", "--model", cfg.to_str().unwrap(), "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_with_one_representation_exits_2() {
    let cfg = ar1_cfg();
    let out = run(&[
        "compare",
        "--model",
        cfg.to_str().unwrap(),
        "--rep",
        "samorodnitsky",
        "--n",
        "100",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_prints_usage_and_exits_2() {
    let out = run(&["estimate", "--seed", "1", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("USAGE"));
}

#[test]
fn invalid_model_value_exits_2_with_line() {
    let cfg = write_cfg("bad.cfg", "kind = ar1_tail_chain\nphi = 1.5\nalpha = 1.0\n");
    let out = run(&[
        "estimate",
        "--model",
        cfg.to_str().unwrap(),
        "--rep",
        "samorodnitsky",
        "--n",
        "10",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let dup = write_cfg("dup.cfg", "alpha = 1\nalpha = 2\nkind = ar1_tail_chain\nphi = 0.5\n");
    let out = run(&[
        "estimate",
        "--model",
        dup.to_str().unwrap(),
        "--rep",
        "samorodnitsky",
        "--n",
        "10",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn reports_are_byte_identical_across_runs_and_threads() {
    let cfg = ar1_cfg();
    let mut texts = Vec::new();
    for threads in ["1", "8", "1"] {
        let out_path = workdir().join(format!("det-{threads}-{}.json", texts.len()));
        let out = run(&[
            "compare",
            "--model",
            cfg.to_str().unwrap(),
            "--rep",
            "samorodnitsky,berman_tau0,albin_b1",
            "--n",
            "3000",
            "--seed",
            "42",
            "--threads",
            threads,
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        texts.push(strip_volatile(
            &std::fs::read_to_string(&out_path).unwrap(),
        ));
    }
    assert_eq!(texts[0], texts[1], "1 vs 8 workers");
    assert_eq!(texts[0], texts[2], "repeat run");
}

#[test]
fn report_validates_against_published_schema() {
    let cfg = ar1_cfg();
    let out_path = workdir().join("schema.json");
    let out = run(&[
        "compare",
        "--model",
        cfg.to_str().unwrap(),
        "--rep",
        "samorodnitsky,albin_b1",
        "--n",
        "500",
        "--seed",
        "3",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();

    let schema_path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/report_schema.json");
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();

    // structural validation against the schema's required lists and types
    for key in schema["required"].as_array().unwrap() {
        assert!(
            !report[key.as_str().unwrap()].is_null(),
            "missing top-level field {key}"
        );
    }
    assert_eq!(report["schema_version"], "1");
    for field in ["n", "seed", "threads"] {
        assert!(report["config"][field].is_u64(), "config.{field}");
    }
    let est_required = schema["properties"]["estimates"]["items"]["required"]
        .as_array()
        .unwrap();
    for e in report["estimates"].as_array().unwrap() {
        for key in est_required {
            assert!(
                !e[key.as_str().unwrap()].is_null(),
                "estimate missing {key}"
            );
        }
        assert!(e["value"].is_f64());
        assert!(e["stderr"].as_f64().unwrap() >= 0.0);
        let n_eff = e["n_effective"].as_f64().unwrap();
        let n_samp = e["n_samples"].as_u64().unwrap() as f64;
        assert!(n_eff <= n_samp + 1e-9, "n_eff {n_eff} > n {n_samp}");
    }
    for key in ["pass", "max_z", "n_flagged", "pairs"] {
        assert!(!report["consistency"][key].is_null());
    }
}

#[test]
fn json_floats_round_trip_losslessly() {
    let cfg = ar1_cfg();
    let out_path = workdir().join("rt.json");
    run(&[
        "estimate",
        "--model",
        cfg.to_str().unwrap(),
        "--rep",
        "berman_tau0",
        "--n",
        "2000",
        "--seed",
        "9",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&out_path).unwrap();
    let report: Value = serde_json::from_str(&text).unwrap();
    let v = report["estimates"][0]["value"].as_f64().unwrap();
    // the printed literal carries 17 significant digits
    let line = text
        .lines()
        .find(|l| l.trim_start().starts_with("\"value\""))
        .unwrap();
    let literal = line.split(": ").nth(1).unwrap().trim_end_matches(',');
    assert_eq!(literal.parse::<f64>().unwrap().to_bits(), v.to_bits());
    assert!(literal.contains('e'), "scientific notation expected: {literal}");
}

#[test]
fn csv_format_emits_rows_and_metadata() {
    let cfg = ar1_cfg();
    let out_path = workdir().join("r.csv");
    let out = run(&[
        "estimate",
        "--model",
        cfg.to_str().unwrap(),
        "--rep",
        "samorodnitsky,albin_b1",
        "--n",
        "500",
        "--seed",
        "3",
        "--format",
        "csv",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("# "));
    assert!(text.contains("representation,value,stderr,n_samples,n_effective"));
    assert_eq!(text.lines().filter(|l| l.starts_with("samorodnitsky")).count(), 1);
    assert_eq!(text.lines().filter(|l| l.starts_with("albin_b1")).count(), 1);
}

#[test]
fn simulate_writes_field_rows() {
    let cfg = write_cfg(
        "mm.cfg",
        "kind = moving_max\ncoeffs = 2, 1\nalpha = 1.0\nwindow = 4\n",
    );
    let out = run(&[
        "simulate",
        "--model",
        cfg.to_str().unwrap(),
        "--n",
        "2",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("sample,t0,value"));
    // 2 samples x 9 window points
    assert_eq!(text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("sample")).count(), 18);
}

#[test]
fn env_var_sets_default_threads() {
    let cfg = ar1_cfg();
    let out_path = workdir().join("env.json");
    let out = Command::new(bin())
        .env("TAILCLUSTER_THREADS", "3")
        .args([
            "estimate",
            "--model",
            cfg.to_str().unwrap(),
            "--rep",
            "samorodnitsky",
            "--n",
            "200",
            "--seed",
            "1",
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["config"]["threads"], 3);
}
