use std::fs;
use std::path::{Path, PathBuf};

use gibbsbd::cli::main_with;
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> i32 {
    let mut all = vec!["gibbsbd"];
    all.extend_from_slice(args);
    main_with(all)
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SIMULATE: &str = r#"
experiment = "simulate"
seed = 4
lambda = 0.6
t_end = 3.0
times = [1.0, 3.0]
replicas = 300
[potential]
kind = "hard_sphere"
dim = 1
radius = 0.4
[region]
lower = [0.0]
upper = [2.0]
"#;

#[test]
fn threshold_reports_one_over_pi() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let cfg = configs().join("threshold.toml");
    assert_eq!(run(&["--out-dir", out.to_str().unwrap(), "threshold", "--config", cfg.to_str().unwrap()]), 0);
    let r = report(&out);
    let lambda_star = r["results"]["lambda_star"].as_f64().unwrap();
    assert!((lambda_star - std::f64::consts::FRAC_1_PI).abs() < 1e-6);
    assert_eq!(r["config"]["potential"]["kind"], "hard_sphere");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert!(out.join("meta.json").exists());
}

#[test]
fn threshold_from_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let code = run(&["--out-dir", out.to_str().unwrap(), "threshold", "--potential", "strauss", "--dim", "1", "--radius", "1", "--strength", "1"]);
    assert_eq!(code, 0);
    let v = report(&out)["results"]["lambda_star"].as_f64().unwrap();
    assert!((v - 0.790988).abs() < 1e-6);
}

#[test]
fn same_seed_same_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sim.toml", SIMULATE);
    let mut csvs = Vec::new();
    for (i, jobs) in ["1", "3", "1"].iter().enumerate() {
        let out = tmp.path().join(format!("o{i}"));
        assert_eq!(run(&["--jobs", jobs, "--out-dir", out.to_str().unwrap(), "run", "--config", cfg.to_str().unwrap()]), 0);
        csvs.push((fs::read(out.join("counts.csv")).unwrap(), fs::read(out.join("report.json")).unwrap()));
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);
    let out = tmp.path().join("other-seed");
    assert_eq!(run(&["--seed", "5", "--out-dir", out.to_str().unwrap(), "run", "--config", cfg.to_str().unwrap()]), 0);
    assert_ne!(fs::read(out.join("counts.csv")).unwrap(), csvs[0].0);
}

#[test]
fn missing_seed_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "noseed.toml", &SIMULATE.replace("seed = 4\n", ""));
    let out = tmp.path().join("o");
    assert_eq!(run(&["--out-dir", out.to_str().unwrap(), "run", "--config", cfg.to_str().unwrap()]), 2);
    assert!(!out.exists());
}

#[test]
fn validation_enumerates_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SIMULATE.replace("seed = 4\n", "").replace("lambda = 0.6", "lambda = -0.6").replace("replicas = 300", "replicas = 0");
    let cfg = write(tmp.path(), "bad.toml", &text);
    let cli = <gibbsbd::cli::Cli as clap::Parser>::try_parse_from(["gibbsbd", "run", "--config", cfg.to_str().unwrap()]).unwrap();
    let err = gibbsbd::cli::run(&cli).err().unwrap();
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    for field in ["seed", "lambda", "replicas"] {
        assert!(msg.contains(field), "{field} not in {msg}");
    }
}

#[test]
fn subcommand_must_match_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sim.toml", SIMULATE);
    assert_eq!(run(&["--out-dir", tmp.path().join("o").to_str().unwrap(), "couple", "--spec1", cfg.to_str().unwrap()]), 2);
}

#[test]
fn failed_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
experiment = "gnz-check"
seed = 1
lambda = 1.0
[potential]
kind = "zero"
dim = 1
[region]
lower = [0.0]
upper = [1.0]
[gnz]
statistic = "one"
samples = 200
runs = 3
[tolerance]
z = 1e-12
"#;
    let cfg = write(tmp.path(), "gnz.toml", text);
    let out = tmp.path().join("o");
    assert_eq!(run(&["--out-dir", out.to_str().unwrap(), "run", "--config", cfg.to_str().unwrap()]), 1);
    let r = report(&out);
    assert_eq!(r["passed"], false);
    assert_eq!(r["checks"][0]["passed"], false);
}

#[test]
fn empty_window_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("spatial_mixing.toml")).unwrap().replace("mixing_fallback", "strict");
    let cfg = write(tmp.path(), "sm.toml", &text);
    let cli = <gibbsbd::cli::Cli as clap::Parser>::try_parse_from(["gibbsbd", "--out-dir", "unused", "run", "--config", cfg.to_str().unwrap()]).unwrap();
    let err = gibbsbd::cli::run(&cli).err().unwrap();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("window"), "{err}");
    assert_eq!(run(&["--out-dir", tmp.path().join("o").to_str().unwrap(), "run", "--config", cfg.to_str().unwrap()]), 3);
}

#[test]
fn formats() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sim.toml", SIMULATE);
    let json_dir = tmp.path().join("json");
    assert_eq!(run(&["--format", "json", "--out-dir", json_dir.to_str().unwrap(), "run", "--config", cfg.to_str().unwrap()]), 0);
    let r = report(&json_dir);
    assert_eq!(r["tables"]["counts"].as_array().unwrap().len(), 2);
    assert!(!json_dir.join("counts.csv").exists());
    let lines_dir = tmp.path().join("jsonl");
    assert_eq!(run(&["--format", "jsonl", "--out-dir", lines_dir.to_str().unwrap(), "run", "--config", cfg.to_str().unwrap()]), 0);
    let text = fs::read_to_string(lines_dir.join("counts.jsonl")).unwrap();
    let rows: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["t"], 3.0);
}

#[test]
fn couple_with_two_specs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let (a, b) = (configs().join("couple.toml"), configs().join("couple_second.toml"));
    let code = run(&["--out-dir", out.to_str().unwrap(), "couple", "--spec1", a.to_str().unwrap(), "--spec2", b.to_str().unwrap(), "--replicas", "300"]);
    assert!(code <= 1);
    let r = report(&out);
    assert_eq!(r["config"]["boundary2"]["kind"], "points");
    let csv = fs::read_to_string(out.join("disagreement.csv")).unwrap();
    assert!(csv.starts_with("t,mean_f,se,coalesced_fraction,contraction_bound\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn oracle_emits_stationary_law() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
experiment = "oracle"
seed = 2
lambda = 1.0
[potential]
kind = "zero"
dim = 1
[region]
lower = [0.0]
upper = [1.0]
[oracle]
cells = 2
"#;
    let cfg = write(tmp.path(), "o.toml", text);
    let out = tmp.path().join("o");
    assert_eq!(run(&["--format", "json", "--out-dir", out.to_str().unwrap(), "oracle", "--spec", cfg.to_str().unwrap(), "--cells", "4"]), 0);
    let r = report(&out);
    let rows = r["tables"]["stationary"].as_array().unwrap();
    assert_eq!(rows.len(), 16);
    let total: f64 = rows.iter().map(|row| row["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(r["results"]["residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn every_shipped_config_validates() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() == "couple_second.toml" {
            continue;
        }
        let config = gibbsbd::ExperimentConfig::load(&path).unwrap().resolve();
        config.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
