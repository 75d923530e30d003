use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn lieflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lieflow")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, cmd: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    lieflow(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn summary(out: &Path) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    v["summary"].clone()
}

fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn gh_fixture_steers_below_threshold() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run_in(&out, "steer", &fixture("gh_steering.json"), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert!(s["max_terminal_error"].as_f64().unwrap() < 1e-2);
    for f in ["history.csv", "terminal.csv", "pmp.json", "schedule.csv", "schedule.json", "trajectory.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
}

#[test]
fn torus_fixture_steers_below_threshold() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run_in(&out, "steer", &fixture("torus_steering.toml"), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(summary(&out)["max_terminal_error"].as_f64().unwrap() < 1e-2);
}

#[test]
fn two_moons_fixture_fits_labels() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run_in(&out, "train", &fixture("two_moons.toml"), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(summary(&out)["fraction"].as_f64().unwrap() >= 0.9);
    let preds = fs::read_to_string(out.join("predictions.csv")).unwrap();
    assert!(preds.lines().any(|l| l.starts_with("member,x0,x1,label0,prediction0,error")));
    assert_eq!(preds.lines().filter(|l| !l.starts_with('#')).count(), 101);
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let cfg = fixture("gh_steering.json");
    assert_eq!(code(&run_in(&a, "steer", &cfg, &[])), 0);
    assert_eq!(code(&run_in(&b, "steer", &cfg, &[])), 0);
    assert_eq!(code(&run_in(&c, "steer", &cfg, &["--threads", "1"])), 0);
    let files = sorted_files(&a);
    assert!(files.len() >= 7);
    for f in &files {
        let name = f.file_name().unwrap();
        let bytes = fs::read(f).unwrap();
        assert_eq!(bytes, fs::read(b.join(name)).unwrap(), "{name:?} differs between runs");
        assert_eq!(bytes, fs::read(c.join(name)).unwrap(), "{name:?} differs with one thread");
    }
}

#[test]
fn every_artifact_carries_hash_and_version() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(code(&run_in(&out, "steer", &fixture("torus_steering.toml"), &[])), 0);
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let hash = s["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    for f in sorted_files(&out) {
        let text = fs::read_to_string(&f).unwrap();
        assert!(text.contains(&hash), "{f:?} lacks the config hash");
        assert!(text.contains(env!("CARGO_PKG_VERSION")), "{f:?} lacks the version");
    }
}

#[test]
fn seed_override_changes_hash() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = fixture("torus_steering.toml");
    run_in(&a, "steer", &cfg, &[]);
    run_in(&b, "steer", &cfg, &["--seed", "5"]);
    let h = |d: &Path| fs::read_to_string(d.join("history.csv")).unwrap().lines().nth(1).unwrap().to_string();
    assert_ne!(h(&a), h(&b));
}

#[test]
fn malformed_json_exits_2_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "bad.json", "{\"schema_version\": 1, \"family\": ");
    let out = tmp.path().join("out");
    let o = run_in(&out, "steer", &cfg, &[]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn unknown_field_exits_2() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("gh_steering.json")).unwrap().replace("\"beta\"", "\"gamma\": 1, \"beta\"");
    let cfg = write_config(&tmp, "extra.json", &text);
    let out = tmp.path().join("out");
    assert_eq!(code(&run_in(&out, "steer", &cfg, &[])), 2);
    assert!(!out.exists());
}

#[test]
fn missing_config_and_bad_flags_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(code(&lieflow(&["steer", "--out", out.to_str().unwrap()])), 2);
    assert_eq!(code(&lieflow(&["steer", "--config", "/nonexistent.json"])), 2);
    assert_eq!(code(&lieflow(&["frobnicate"])), 2);
    let cfg = fixture("torus_steering.toml");
    assert_eq!(code(&run_in(&out, "steer", &cfg, &["--threads", "0"])), 2);
    assert!(!out.exists());
}

#[test]
fn trivial_steering_stops_immediately() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "trivial.toml",
        r#"
        schema_version = 1
        family = "gh:2"
        horizon = 1.0
        steps = 10
        beta = 1e-4
        sources = { points = [[0.0, 0.0], [1.0, 0.5]] }
        targets = { points = [[0.0, 0.0], [1.0, 0.5]] }
        "#,
    );
    let out = tmp.path().join("out");
    assert_eq!(code(&run_in(&out, "steer", &cfg, &[])), 0);
    let s = summary(&out);
    assert_eq!(s["iterations"].as_u64(), Some(0));
    assert_eq!(s["max_terminal_error"].as_f64(), Some(0.0));
}

#[test]
fn unconverged_steering_exits_1_with_artifacts() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("gh_steering.json")).unwrap().replace("\"max_iter\": 500", "\"max_iter\": 2");
    let cfg = write_config(&tmp, "short.json", &text);
    let out = tmp.path().join("out");
    assert_eq!(code(&run_in(&out, "steer", &cfg, &[])), 1);
    assert!(out.join("history.csv").exists());
    assert_eq!(summary(&out)["success"].as_bool(), Some(false));
}

#[test]
fn single_point_at_base_label_trains_immediately() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "one.json",
        r#"{"schema_version": 1, "nu": [0.0], "horizon": 1.0, "steps": 10, "beta": 1e-4,
            "dataset": {"points": {"x": [[0.3, -0.2]], "labels": [[0.0]]}}}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(code(&run_in(&out, "train", &cfg, &[])), 0);
    assert_eq!(summary(&out)["iterations"].as_u64(), Some(0));
}

#[test]
fn empty_dataset_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "empty.json",
        r#"{"schema_version": 1, "horizon": 1.0, "steps": 10, "beta": 1e-4,
            "dataset": {"points": {"x": [], "labels": []}}}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(code(&run_in(&out, "train", &cfg, &[])), 2);
    assert!(!out.exists());
}

#[test]
fn verify_geometry_passes_and_unknown_suite_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = lieflow(&["verify", "geometry", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(r["report"]["passed"].as_bool(), Some(true));

    let other = tmp.path().join("other");
    assert_eq!(code(&lieflow(&["verify", "topology", "--out", other.to_str().unwrap()])), 2);
    assert!(!other.exists());
}

#[test]
fn verify_fields_flags_shallow_depth_without_failing() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = lieflow(&["verify", "fields", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    let props = r["report"]["properties"].as_array().unwrap();
    let shallow = props.iter().find(|p| p["name"] == "rank-gh2-n2-depth1").unwrap();
    assert_eq!(shallow["status"], "expected-insufficient-depth");
}

#[test]
fn verify_exit_code_matches_report() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = lieflow(&["verify", "all", "--out", out.to_str().unwrap()]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    let passed = r["report"]["passed"].as_bool().unwrap();
    assert_eq!(code(&o), if passed { 0 } else { 1 });
}

#[test]
fn approx_hermite_ladder() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "ladder.toml",
        "schema_version = 1\nbasis = \"hermite\"\nfunction = \"gaussian-bump\"\norders = [4, 8, 12, 16]\n",
    );
    let out = tmp.path().join("out");
    let o = run_in(&out, "approx", &cfg, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("ladder.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "n,sup_error,deriv_sup");
    assert_eq!(rows.len(), 5);
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("truncation.json")).unwrap()).unwrap();
    let first = &t["reports"][0];
    for key in ["order", "sup_error", "deriv_sup", "ell", "grid"] {
        assert!(first.get(key).is_some(), "truncation report lacks {key}");
    }
}

#[test]
fn approx_fourier_and_laplace_ladders() {
    let tmp = TempDir::new().unwrap();
    for (basis, function, orders) in [("fourier", "periodic-c2", "[4, 8, 16, 32]"), ("laplace", "sphere-exp", "[2, 4, 6]")] {
        let cfg = write_config(
            &tmp,
            &format!("{basis}.toml"),
            &format!("schema_version = 1\nbasis = \"{basis}\"\nfunction = \"{function}\"\norders = {orders}\ngrid = 61\n"),
        );
        let out = tmp.path().join(basis);
        let o = run_in(&out, "approx", &cfg, &[]);
        assert_eq!(code(&o), 0, "{basis}: {}", String::from_utf8_lossy(&o.stdout));
    }
}

#[test]
fn approx_rejects_mismatched_basis() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "mismatch.toml",
        "schema_version = 1\nbasis = \"fourier\"\nfunction = \"gaussian-bump\"\norders = [4]\n",
    );
    let out = tmp.path().join("out");
    assert_eq!(code(&run_in(&out, "approx", &cfg, &[])), 2);
    assert!(!out.exists());
}
