use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn eas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eas")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, seed: &str) -> PathBuf {
    let out = dir.join("data");
    let r = eas(&["simulate", "--preset", "ld-sparse", "--seed", seed, "--out", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    out
}

fn fit_args<'a>(data: &'a Path, extra: &[&'a str]) -> Vec<String> {
    let mut v: Vec<String> = ["fit", "--y"].iter().map(|x| x.to_string()).collect();
    v.push(s(&data.join("y.csv")).into());
    v.push("--x".into());
    v.push(s(&data.join("x.csv")).into());
    v.extend(extra.iter().map(|x| x.to_string()));
    v
}

fn run(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    eas(&refs)
}

#[test]
fn simulate_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "3");
    for f in ["y.csv", "x.csv", "y_test.csv", "x_test.csv", "coef.csv", "truth.json"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let truth: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(data.join("truth.json")).unwrap()).unwrap();
    let idx = truth["truth"].as_array().unwrap();
    assert_eq!(idx.len(), 5);
    assert!(idx.iter().all(|v| (1..=30).contains(&v.as_u64().unwrap())));
    let x = std::fs::read_to_string(data.join("x.csv")).unwrap();
    assert_eq!(x.lines().count(), 60);
    assert_eq!(x.lines().next().unwrap().split(',').count(), 30);
}

#[test]
fn fit_reports_chain() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "4");
    let r = run(&fit_args(&data, &["--epsilon", "1", "--steps", "1500", "--burnin", "300", "--seed", "9"]));
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    let models = v["models"].as_array().unwrap();
    assert!(!models.is_empty());
    let total: f64 = models.iter().map(|m| m["prob"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(v["map_model"].as_array().is_some());
    assert_eq!(v["inclusion"].as_object().unwrap().len(), 30);
    assert!(v["inclusion"].get("1").is_some() && v["inclusion"].get("0").is_none());
    let rate = v["acceptance_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    assert_eq!(v["config"]["epsilon"].as_f64(), Some(1.0));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "5");
    let base = ["--epsilon", "0.5", "--steps", "800", "--burnin", "100", "--seed", "21"];
    let a = run(&fit_args(&data, &[&base[..], &["--threads", "1"]].concat()));
    let b = run(&fit_args(&data, &[&base[..], &["--threads", "3"]].concat()));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let tune = |threads: &str| {
        eas(&[
            "tune", "--y", s(&data.join("y.csv")), "--x", s(&data.join("x.csv")), "--grid", "0.1:3:4",
            "--steps", "400", "--burnin", "50", "--seed", "2", "--threads", threads,
        ])
    };
    let (a, b) = (tune("1"), tune("4"));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn summarize_reads_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "6");
    let report = dir.path().join("fit.json");
    let r = run(&fit_args(&data, &["--epsilon", "1", "--steps", "500", "--burnin", "50", "--out", s(&report)]));
    assert!(r.status.success());
    let table = eas(&["summarize", "--input", s(&report)]);
    assert!(table.status.success());
    assert!(!table.stdout.is_empty());
    let json = eas(&["summarize", "--input", s(&report), "--format", "json"]);
    let a: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = eas(&["fit", "--y", "/nonexistent/y.csv", "--x", "/nonexistent/x.csv", "--epsilon", "1"]);
    assert_eq!(missing.status.code(), Some(2));

    let y = dir.path().join("y.csv");
    let x = dir.path().join("x.csv");
    std::fs::write(&y, "1,2\n3,4\n5,6\n").unwrap();
    std::fs::write(&x, "1,2\n3,oops\n5,6\n").unwrap();
    let bad = eas(&["fit", "--y", s(&y), "--x", s(&x), "--epsilon", "1"]);
    assert_eq!(bad.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&bad.stderr);
    assert!(msg.contains("line 2"), "{msg}");

    std::fs::write(&x, "1,2\n3,4\n").unwrap();
    let rows = eas(&["fit", "--y", s(&y), "--x", s(&x), "--epsilon", "1"]);
    assert_eq!(rows.status.code(), Some(2));

    let data = simulate(dir.path(), "7");
    let zero = run(&fit_args(&data, &["--epsilon", "1", "--init", "0,3"]));
    assert_eq!(zero.status.code(), Some(2));
    let far = run(&fit_args(&data, &["--epsilon", "1", "--init", "31"]));
    assert_eq!(far.status.code(), Some(2));
}

#[test]
fn config_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "8");
    assert_eq!(run(&fit_args(&data, &["--epsilon", "-1"])).status.code(), Some(4));
    assert_eq!(run(&fit_args(&data, &["--epsilon", "1", "--steps", "10", "--burnin", "20"])).status.code(), Some(4));
    let grid = eas(&["tune", "--y", s(&data.join("y.csv")), "--x", s(&data.join("x.csv")), "--grid", "3:1:4"]);
    assert_eq!(grid.status.code(), Some(4));
    let preset = eas(&["simulate", "--preset", "nope", "--out", s(&dir.path().join("z"))]);
    assert_eq!(preset.status.code(), Some(4));
    assert_eq!(eas(&["fit", "--epsilon", "1"]).status.code(), Some(4));
}

#[test]
fn unreachable_admissibility_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "9");
    let r = run(&fit_args(&data, &["--epsilon", "1e12", "--steps", "50", "--burnin", "0"]));
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
}
