use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn osclab(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_osclab"))
        .args(args)
        .current_dir(dir)
        .env_remove("OSCLAB_OUT")
        .output()
        .expect("spawn osclab");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).expect("manifest")).expect("json")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn tiling_run_writes_complete_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[tiling]\nsamples = 2000\n");
    let (code, stdout, _) = osclab(&["tiling", "--config", &cfg, "--out", "t", "--lambda", "10"], tmp.path());
    assert_eq!(code, 0, "{stdout}");
    let out = tmp.path().join("t");
    let m = manifest(&out);
    assert_eq!(m["command"], "tiling");
    let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for f in ["tiling.csv", "tiling.dat", "summary.json", "manifest.json"] {
        assert!(files.contains(&f), "{f} missing from {files:?}");
    }
    for f in &files {
        assert!(out.join(f).exists(), "{f} listed but absent");
    }
    assert!(m["checks"].as_array().unwrap().iter().all(|c| c["status"] == "pass"));
    let csv = std::fs::read_to_string(out.join("tiling.csv")).unwrap();
    assert!(csv.lines().count() > 6);
}

#[test]
fn lambda_below_one_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, _) = osclab(&["tiling", "--out", "t", "--lambda", "0.5"], tmp.path());
    assert_eq!(code, 2);
    let m = manifest(&tmp.path().join("t"));
    assert!(m["error"].as_str().unwrap().contains("lambda"));
}

#[test]
fn decay_needs_four_lambdas() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, _) = osclab(&["decay", "--out", "d", "--lambda", "25,50,100"], tmp.path());
    assert_eq!(code, 2);
    assert!(manifest(&tmp.path().join("d"))["error"].as_str().unwrap().contains("at least 4"));
}

#[test]
fn unusable_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("blocker"), "").unwrap();
    let (code, _, stderr) = osclab(&["window", "--out", "blocker/sub"], tmp.path());
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("osclab:"));
}

#[test]
fn config_errors_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[run]\nseed = 3\n\n[kernel]\nlambda = 100\nsmaples = 4\n");
    let (code, _, stderr) = osclab(&["kernel", "--config", &cfg, "--out", "k"], tmp.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("line 6"), "{stderr}");

    let cfg = write_config(tmp.path(), "[kernel]\nc_split = 2.0\n");
    let (code, _, stderr) = osclab(&["kernel", "--config", &cfg, "--out", "k"], tmp.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_osclab"))
        .args(["window"])
        .current_dir(tmp.path())
        .env("OSCLAB_OUT", tmp.path().join("from-env"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("from-env/window.json").exists());
    assert!(!tmp.path().join("osclab-out").exists());
}

#[test]
fn injected_sign_flip_fails_selftest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[selftest]\nquick = true\ninject = \"flip-sign\"\n");
    let (code, stdout, _) = osclab(&["selftest", "--config", &cfg, "--out", "s"], tmp.path());
    assert_eq!(code, 1, "{stdout}");
    let m = manifest(&tmp.path().join("s"));
    let det = m["checks"].as_array().unwrap().iter().find(|c| c["name"] == "example-determinants").unwrap();
    assert_eq!(det["status"], "fail");
}

#[test]
fn quick_selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[selftest]\nquick = true\n");
    let (code, stdout, _) = osclab(&["selftest", "--config", &cfg, "--out", "s"], tmp.path());
    assert_eq!(code, 0, "{stdout}");
    assert!(tmp.path().join("s/selftest.json").exists());
}

#[test]
fn serial_runs_repeat_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[reconstruct]\nsignals = 3\n");
    let mut outputs = Vec::new();
    for dir in ["a", "b"] {
        let (code, stdout, _) = osclab(&["reconstruct", "--config", &cfg, "--serial", "--seed", "5", "--lambda", "1,10", "--out", dir], tmp.path());
        assert_eq!(code, 0, "{stdout}");
        outputs.push(std::fs::read_to_string(tmp.path().join(dir).join("reconstruct.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let m = manifest(&tmp.path().join("a"));
    assert_eq!(m["serial"], true);
    assert_eq!(m["seed"], 5);
}

#[test]
fn certify_reports_witnesses() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[certify]\ngrid_density = 5\ncircle_points = 16\n");
    let (code, stdout, _) = osclab(&["certify", "--config", &cfg, "--out", "c"], tmp.path());
    assert_eq!(code, 0, "{stdout}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("c/certify.json")).unwrap()).unwrap();
    assert!(report["c_lower"].as_f64().unwrap() > 0.4);
    assert!(std::fs::read_to_string(tmp.path().join("c/witnesses.csv")).unwrap().lines().count() > 1);
}

#[test]
fn unknown_subcommand_is_usage() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, _) = osclab(&["frobnicate"], tmp.path());
    assert_eq!(code, 2);
    let (code, stdout, _) = osclab(&["--help"], tmp.path());
    assert_eq!(code, 0);
    assert!(stdout.contains("selftest"));
}
