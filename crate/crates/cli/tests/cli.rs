use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn magtrace(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_magtrace"));
    cmd.args(args).env_remove("MAGTRACE_WORKERS");
    if let Some(w) = workers {
        cmd.env("MAGTRACE_WORKERS", w);
    }
    cmd.output().unwrap()
}

fn run(command: &str, config: Option<&Path>, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--out", out.to_str().unwrap()];
    if let Some(c) = config {
        args.extend(["--config", c.to_str().unwrap()]);
    }
    args.extend(extra);
    magtrace(&args, None)
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn write_config(dir: &TempDir, text: &str) -> std::path::PathBuf {
    let path = dir.path().join("config.json");
    fs::write(&path, text).unwrap();
    path
}

const SMALL: &str = r#"{
  "scaling": { "indices": [[0, 0], [1, 0], [1, 1]], "n": [500], "l1_n": [10, 100] },
  "dixmier": { "schedule": [20, 50, 100, 200, 500, 1000, 2000, 5000], "tolerance": 0.03 },
  "tuv": { "sizes": [10.5, 20.5, 30.5] },
  "compare": { "omega_samples": 4, "dixmier_tolerance": 0.05 },
  "algebra": { "half_width": 6, "pairs": 4, "cocycle_triples": 1000 }
}"#;

fn header_hash(csv: &str) -> String {
    let line = csv.lines().find(|l| l.starts_with("# config_sha256 ")).unwrap();
    line["# config_sha256 ".len()..].to_string()
}

#[test]
fn every_command_writes_its_tables() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, SMALL);
    let expected: [(&str, &[&str]); 5] = [
        ("scaling", &["scaling_pointwise.csv", "scaling_l1.csv"]),
        ("dixmier", &["dixmier_sequences.csv", "dixmier_estimates.csv"]),
        ("tuv", &["tuv.csv"]),
        ("compare", &["compare.csv"]),
        ("algebra-check", &["algebra_check.csv"]),
    ];
    for (command, files) in expected {
        let out = dir.path().join(command);
        let res = run(command, Some(&config), &out, &[]);
        assert!(res.status.success(), "{command}: {}", String::from_utf8_lossy(&res.stderr));
        let s = summary(&out);
        assert_eq!(s["command"], command);
        assert_eq!(s["pass"], true);
        for f in files {
            let text = fs::read_to_string(out.join(f)).unwrap();
            assert_eq!(header_hash(&text), s["config_sha256"].as_str().unwrap(), "{command}/{f}");
        }
    }
}

#[test]
fn default_scaling_matches_poisson_column_and_flags_critical_point() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    assert!(run("scaling", None, &out, &[]).status.success());
    let text = fs::read_to_string(out.join("scaling_pointwise.csv")).unwrap();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut oracle_rows = 0;
    for row in reader.records() {
        let row = row.unwrap();
        if &row[4] != "" && &row[5] != "" {
            let g: f64 = row[4].parse().unwrap();
            let p: f64 = row[5].parse().unwrap();
            assert!((g - p).abs() <= 1e-12 * p.abs().max(1e-300) + 1e-14, "{g} vs {p}");
            oracle_rows += 1;
        }
        let xi: f64 = row[3].parse().unwrap();
        assert_eq!(xi == 1.0, &row[6] == "no-claim");
    }
    assert!(oracle_rows > 0);
    assert!(fs::read_to_string(out.join("scaling_l1.csv")).is_ok());
}

#[test]
fn malformed_configs_exit_1_without_output() {
    let dir = TempDir::new().unwrap();
    let cases = [
        "{ not json",
        r#"{ "magnetic": { "ell": -1.0 } }"#,
        r#"{ "magnetic": { "lambda": -1.0 } }"#,
        r#"{ "unknown_section": 1 }"#,
        r#"{ "dixmier": { "schedule": [100, 50] } }"#,
        r#"{ "element": [{ "source": 0, "target": 0, "potential": "missing" }] }"#,
    ];
    for (k, text) in cases.iter().enumerate() {
        let config = dir.path().join(format!("bad{k}.json"));
        fs::write(&config, text).unwrap();
        let out = dir.path().join(format!("out{k}"));
        for command in ["scaling", "compare"] {
            let res = run(command, Some(&config), &out, &[]);
            assert_eq!(res.status.code(), Some(1), "case {k}: {text}");
            assert!(!out.exists(), "case {k} left output behind");
        }
    }
    let out = dir.path().join("missing");
    let res = run("tuv", Some(&dir.path().join("nope.json")), &out, &[]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, SMALL);
    for command in ["dixmier", "tuv", "compare", "algebra-check"] {
        let mut outputs = Vec::new();
        for workers in ["1", "3"] {
            let out = dir.path().join(format!("{command}-{workers}"));
            let res = magtrace(&[command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()], Some(workers));
            assert!(res.status.success());
            let mut files: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
            files.sort();
            outputs.push(files.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());
        }
        assert!(outputs[0] == outputs[1], "{command} differs between worker counts");
    }
}

#[test]
fn broken_cocycle_fails_algebra_check() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, r#"{ "algebra": { "half_width": 4, "pairs": 2, "cocycle_triples": 100, "break_cocycle": true } }"#);
    let out = dir.path().join("out");
    let res = run("algebra-check", Some(&config), &out, &[]);
    assert_eq!(res.status.code(), Some(2));
    let s = summary(&out);
    assert_eq!(s["pass"], false);
    let checks = s["checks"].as_array().unwrap();
    let cocycle = checks.iter().find(|c| c["identity"] == "cocycle").unwrap();
    assert_eq!(cocycle["pass"], false);
    assert!(checks.iter().filter(|c| c["identity"] != "cocycle").all(|c| c["pass"] == true));
}

#[test]
fn seed_and_schedule_overrides_change_the_hash() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, SMALL);
    let base = dir.path().join("base");
    let seeded = dir.path().join("seeded");
    let short = dir.path().join("short");
    assert!(run("dixmier", Some(&config), &base, &[]).status.success());
    assert!(run("dixmier", Some(&config), &seeded, &["--seed", "7"]).status.success());
    assert!(run("dixmier", Some(&config), &short, &["--schedule-max", "2000"]).status.success());
    let h = |d: &Path| summary(d)["config_sha256"].as_str().unwrap().to_string();
    assert_ne!(h(&base), h(&seeded));
    assert_ne!(h(&base), h(&short));
    assert_eq!(summary(&short)["schedule"].as_array().unwrap().len(), 7);
    // too few points left to extrapolate
    let res = run("dixmier", Some(&config), &dir.path().join("tiny"), &["--schedule-max", "300"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn singleton_hull_projection_compares_to_one() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        r#"{
  "hull": { "kind": "singleton" },
  "potentials": { "one": { "kind": "constant", "value": [1.0, 0.0] } },
  "element": [{ "source": 0, "target": 0, "potential": "one" }],
  "tuv": { "sizes": [10.5, 20.5, 30.5] }
}"#,
    );
    let out = dir.path().join("out");
    let res = run("compare", Some(&config), &out, &["--schedule-max", "10000"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let s = summary(&out);
    for key in ["dixmier_average", "tau_p", "scaled_tuv"] {
        let v = s[key][0].as_f64().unwrap();
        assert!((v - 1.0).abs() < 0.02, "{key} = {v}");
    }
}
