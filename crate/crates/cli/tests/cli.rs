use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nttkit(args: &[&str], cfg_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nttkit"))
        .args(args)
        .current_dir(cfg_dir)
        .env("NTTKIT_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const LAPLACE: &str = r#"{"experiment": "eigen-laplace", "d": 8, "n": 10, "ranks": [1], "seeds": [1]}"#;

#[test]
fn laplace_run_reaches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "laplace.json", LAPLACE);
    let out = tmp.path().join("run");
    let o = nttkit(&["run", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["status"], "complete");
    assert_eq!(m["experiment"], "eigen-laplace");
    let mut rd = csv::Reader::from_path(out.join("results.csv")).unwrap();
    let headers = rd.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "relerr").unwrap();
    let rows: Vec<_> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    let relerr: f64 = rows[0][col].parse().unwrap();
    assert!(relerr <= 1e-8, "relerr {relerr}");
}

#[test]
fn schema_violations_exit_2_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = [
        r#"{"experiment": "eigen-laplace", "d": 8, "n": 10, "ranks": [-1], "seeds": [1]}"#,
        r#"{"experiment": "eigen-laplace", "d": 8, "n": 10, "ranks": [1], "seeds": [1], "colour": 3}"#,
        r#"{"experiment": "unknown"}"#,
        r#"{"experiment": "complete", "shape": [4, 4], "ranks": [1, 2, 2, 1], "samples": 10, "seeds": [0]}"#,
        "not json",
    ];
    for (i, body) in bad.iter().enumerate() {
        let cfg = write(tmp.path(), &format!("bad{i}.json"), body);
        let out = tmp.path().join(format!("out{i}"));
        let o = nttkit(&["run", &cfg, "--out", out.to_str().unwrap()], tmp.path());
        assert_eq!(o.status.code(), Some(2), "config {body}");
        assert!(!out.exists(), "artifacts written for {body}");
    }
    let o = nttkit(&["run", "missing.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn runtime_failure_exits_1_with_partial_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "too_many.json",
        r#"{"experiment": "complete", "shape": [4, 4, 4], "ranks": [1, 2, 2, 1], "samples": 100, "seeds": [0]}"#,
    );
    let out = tmp.path().join("run");
    let o = nttkit(&["run", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let m = manifest(&out);
    assert_eq!(m["status"], "partial");
    assert!(m["error"].as_str().is_some_and(|e| !e.is_empty()));
}

#[test]
fn reruns_are_byte_identical_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "phase.json",
        r#"{"experiment": "phase", "order": 3, "rank": 2, "sizes": [6], "samples": [60, 150],
            "trials": 3, "seed": 5, "optimizer": {"max_iters": 80}}"#,
    );
    let mut outputs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let out = tmp.path().join(name);
        let o = nttkit(&["run", &cfg, "--jobs", jobs, "--out", out.to_str().unwrap()], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("results.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn traces_are_written_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "complete.json",
        r#"{"experiment": "complete", "shape": [6, 6, 6], "ranks": [1, 2, 2, 1], "samples": 150,
            "noise": [0.0], "seeds": [0, 1], "optimizer": {"max_iters": 30}}"#,
    );
    let out = tmp.path().join("run");
    let o = nttkit(&["run", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traces: Vec<_> = fs::read_dir(out.join("traces")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(traces.len(), 2);
    let body = fs::read_to_string(out.join("traces").join(&traces[0])).unwrap();
    assert!(body.starts_with("iter,"), "{body}");
    assert!(!out.join("timings.csv").exists());
}

#[test]
fn out_key_sets_default_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let body = LAPLACE.replace('}', r#", "out": "from-config"}"#);
    let cfg = write(tmp.path(), "laplace.json", &body);
    let o = nttkit(&["run", &cfg], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("from-config/manifest.json").exists());
    let recorded = &manifest(&tmp.path().join("from-config"))["config"];
    assert_eq!(recorded, &serde_json::from_str::<Value>(&body).unwrap());
}

#[test]
fn report_summarizes_one_or_many_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "laplace.json", LAPLACE);
    let runs = tmp.path().join("runs");
    for name in ["first", "second"] {
        let out = runs.join(name);
        assert!(nttkit(&["run", &cfg, "--out", out.to_str().unwrap()], tmp.path()).status.success());
    }
    fs::create_dir_all(runs.join("empty")).unwrap();

    let single = nttkit(&["report", runs.join("first").to_str().unwrap()], tmp.path());
    assert!(single.status.success());
    let text = String::from_utf8(single.stdout).unwrap();
    assert!(text.contains("eigen-laplace") && text.contains("relerr"), "{text}");

    let many = nttkit(&["report", runs.to_str().unwrap()], tmp.path());
    assert!(many.status.success());
    assert_eq!(String::from_utf8(many.stdout).unwrap().matches("== eigen-laplace").count(), 2);

    let none = nttkit(&["report", runs.join("empty").to_str().unwrap()], tmp.path());
    assert_eq!(none.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&none.stderr).contains("no manifest"));
}
