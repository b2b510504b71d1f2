use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn otflow(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_otflow"));
    cmd.args(args).env_remove("OTFLOW_OUT_DIR");
    if let Some(dir) = out_env {
        cmd.env("OTFLOW_OUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn small_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/common.toml")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_passes_and_prints_one_line_per_invariant() {
    let out = otflow(&["check"], None);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().filter(|l| l.starts_with("PASS ")).count() >= 5);
    assert!(!text.contains("FAIL"));
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = otflow(&["run", "--config", "missing.file"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = otflow(&["run", "--bogus"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(otflow(&["--help"], None).status.code(), Some(0));
}

#[test]
fn single_then_eval_reproduces_final_mmd() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let out = otflow(
        &[
            "single", "--config", cfg.to_str().unwrap(), "--method", "implicit", "--seed", "0", "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let record = dir.path().join("records/implicit_seed0.json");
    let recorded = otflow::harness::RunRecord::read(&record).unwrap().final_mmd;

    let out = otflow(&["eval", record.to_str().unwrap(), "--quiet"], None);
    assert_eq!(out.status.code(), Some(0));
    let recomputed: f64 = stdout(&out).trim().parse().unwrap();
    assert!((recomputed - recorded).abs() <= 1e-12);
}

#[test]
fn output_directory_falls_back_to_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let base = ["run", "--config", cfg.to_str().unwrap(), "--seed", "1", "--method", "adam", "--quiet"];

    assert_eq!(otflow(&base, Some(env_dir.path())).status.code(), Some(0));
    assert!(env_dir.path().join("summary.csv").exists());
    assert!(env_dir.path().join("records/adam_seed1.json").exists());

    let mut with_flag = base.to_vec();
    with_flag.extend(["--out", flag_dir.path().to_str().unwrap()]);
    let stale = env_dir.path().join("summary.csv");
    std::fs::remove_file(&stale).unwrap();
    assert_eq!(otflow(&with_flag, Some(env_dir.path())).status.code(), Some(0));
    assert!(flag_dir.path().join("summary.csv").exists());
    assert!(!stale.exists());
}

#[test]
fn unknown_method_is_a_usage_error() {
    let cfg = small_config();
    let out = otflow(&["single", "--config", cfg.to_str().unwrap(), "--method", "sgd"], None);
    assert_eq!(out.status.code(), Some(1));
}
