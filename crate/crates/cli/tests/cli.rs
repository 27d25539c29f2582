use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_curvlab"));
    c.env_remove("CURVLAB_JOBS");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawn curvlab")
}

fn write_config(dir: &TempDir, body: &str) -> PathBuf {
    let p = dir.path().join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

#[test]
fn check_sphere_and_its_negative() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"operators": [{"named": "sphere", "n": 4}, {"named": "sphere", "n": 4, "scale": -1}],
            "specs": ["PIC", "SET_E"], "starts": 8}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out.join("check.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert_eq!(rows.len(), 4);
    let expect = [("PIC", "MEMBER", 4.0), ("SET_E", "MEMBER", 2.0), ("PIC", "NON_MEMBER", -4.0), ("SET_E", "NON_MEMBER", -4.0)];
    for (row, (spec, decision, margin)) in rows.iter().zip(expect) {
        assert_eq!(row[col("spec")], spec);
        assert_eq!(row[col("decision")], decision);
        let m: f64 = row[col("margin")].parse().unwrap();
        // SET_E of I is 2 + 2 l^2 m^2, of -I it is -2 l^2 - 2 m^2
        assert!((m - margin).abs() < 1e-8, "{spec}: {m}");
        let w = row[col("witness")].clone();
        assert!(out.join(&w).is_file(), "missing {w}");
    }
    let meta = read_json(&out.join("check.meta.json"));
    assert_eq!(meta["result"]["rows"], 4);
    assert_eq!(meta["command"], "check");
}

#[test]
fn empty_operator_list_gives_header_only() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run(&["check", "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("check.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("id,operator,source,n,spec,margin"));
}

#[test]
fn flow_from_sphere_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, r#"{"operators": [{"named": "sphere", "n": 4}], "flow": {"sample_every": 10}}"#);
    let out = dir.path().join("out");
    let o = run(&["flow", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("closed_form=pass"));
    let summary = read_json(&out.join("flow.json"));
    assert_eq!(summary[0]["closed_form"]["passed"], true);
    assert_eq!(summary[0]["terminated_by"], "max_trace");
    let (header, rows) = csv_rows(&out.join("flow_0000.csv"));
    assert_eq!(header[0], "t");
    assert!(rows.len() > 2);
    let sidecar = read_json(&out.join("flow_0000.json"));
    assert_eq!(sidecar["command"], "flow");
    assert!(sidecar["result"]["flow"].is_object());
}

#[test]
fn flow_from_zero_stays_at_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"operators": [{"named": "zero", "n": 4}], "flow": {"stop": {"max_time": 1.0}}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["flow", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = read_json(&out.join("flow.json"));
    assert_eq!(summary[0]["scal_end"], 0.0);
    assert_eq!(summary[0]["t_end"], 1.0);
}

#[test]
fn verify_algebra_and_integrator_pass() {
    let dir = TempDir::new().unwrap();
    for suite in ["algebra", "integrator"] {
        let out = dir.path().join(suite);
        let o = run(&["verify", suite, "--samples", "20", "--out", out.to_str().unwrap()], dir.path());
        assert!(o.status.success(), "{suite}: {}", stderr(&o));
        let text = String::from_utf8_lossy(&o.stdout);
        assert!(text.lines().any(|l| l.starts_with("PASS ")), "{text}");
        assert!(!text.lines().any(|l| l.starts_with("FAIL ")), "{text}");
    }
}

#[test]
fn unknown_suite_exit_code() {
    let dir = TempDir::new().unwrap();
    let o = run(&["verify", "nonsense"], dir.path());
    assert_eq!(o.status.code(), Some(9));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error kind=unknown_suite code=9 message=\""), "{err}");
    assert!(err.contains("algebra"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    for args in [&["check", "--bogus"][..], &[][..], &["check", "--seed", "minus-one"][..]] {
        let o = run(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).starts_with("error kind=usage code=2"), "{}", stderr(&o));
    }
    let o = run(&["--help"], dir.path());
    assert!(o.status.success());
}

#[test]
fn config_and_io_errors() {
    let dir = TempDir::new().unwrap();
    let bad = write_config(&dir, r#"{"seed": 1, "unknown_key": 2}"#);
    let o = run(&["check", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = run(&["check", "--config", "does-not-exist.json"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let o = run(&["check", "--starts", "0"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn flags_beat_environment_beats_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, r#"{"seed": 5, "starts": 4, "jobs": 1}"#);
    let meta = |args: &[&str], env: Option<&str>| {
        let out = dir.path().join("out");
        let mut c = bin();
        c.args(["check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .args(args)
            .current_dir(dir.path());
        if let Some(j) = env {
            c.env("CURVLAB_JOBS", j);
        }
        let o = c.output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        read_json(&out.join("check.meta.json"))["config"].clone()
    };
    let base = meta(&[], None);
    assert_eq!((base["seed"].as_u64(), base["jobs"].as_u64()), (Some(5), Some(1)));
    let env = meta(&[], Some("2"));
    assert_eq!(env["jobs"], 2);
    let flags = meta(&["--seed", "9", "--jobs", "3", "--starts", "6", "--tol", "0.001"], Some("2"));
    assert_eq!(flags["seed"], 9);
    assert_eq!(flags["jobs"], 3);
    assert_eq!(flags["starts"], 6);
    assert_eq!(flags["tol"], 0.001);
}

#[test]
fn outputs_leave_no_temporaries() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"operators": [{"named": "sphere", "n": 4}], "specs": ["PIC"], "starts": 4,
            "sweep": {"n": [4], "sigma": [0.5], "count": 2}}"#,
    );
    let out = dir.path().join("out");
    for cmd in ["check", "sweep"] {
        let o = run(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], dir.path());
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["check.csv", "check.json", "check.meta.json", "sweep.csv", "sweep.json", "sweep.meta.json", "witnesses"]
    );
    let (_, rows) = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 1);
}

#[test]
fn check_is_reproducible_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"seed": 3, "starts": 8,
            "generators": [{"kind": "sphere_perturbed", "sigma": 0.8, "n": 4, "count": 4, "seed": 1}],
            "specs": ["TILDE_C", "HAT_C"]}"#,
    );
    let bytes = |jobs: &str| {
        let out = dir.path().join(format!("out{jobs}"));
        let o = run(
            &["check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", jobs],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("check.csv")).unwrap()
    };
    assert_eq!(bytes("1"), bytes("4"));
}
