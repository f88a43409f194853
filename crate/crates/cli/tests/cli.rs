use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 7

[corpus]
test_fraction = 0.25

[corpus.source.synthetic]
vocab_size = 200
n = 160
length = { kind = "uniform", min = 30, max = 34 }

[model]
kind = "naive_bayes"
alpha = 1.0

[[explain.methods]]
name = "random"

[meta_attack]
modes = ["oracle"]

[evalx]
enabled = false
"#;

fn faithlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faithlab"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("small.toml"), SMALL).unwrap();
    tmp
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_dir(dir: &Path) -> std::path::PathBuf {
    let out = faithlab(
        dir,
        &["--config", "small.toml", "--out", "out", "show-config"],
    );
    assert!(out.status.success());
    let cfg =
        faithlab::harness::ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap())
            .unwrap();
    dir.join(cfg.run_dir())
}

#[test]
fn eval_eraser_without_a_model_names_the_missing_artifact() {
    let tmp = setup();
    let gen = faithlab(
        tmp.path(),
        &["--config", "small.toml", "--out", "out", "gen-data"],
    );
    assert!(gen.status.success(), "{}", stderr(&gen));
    let out = faithlab(
        tmp.path(),
        &["--config", "small.toml", "--out", "out", "eval-eraser"],
    );
    assert!(!out.status.success());
    let msg = stderr(&out);
    assert!(
        msg.contains("model.json") && msg.contains("eval-eraser"),
        "{msg}"
    );
}

#[test]
fn unknown_subcommands_and_flags_fail_with_usage() {
    let tmp = setup();
    for args in [&["frobnicate"][..], &["--bogus", "run"][..], &[][..]] {
        let out = faithlab(tmp.path(), args);
        assert!(!out.status.success(), "{args:?}");
        assert!(stderr(&out).contains("Usage"), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn bad_overrides_are_rejected() {
    let tmp = setup();
    for set in [
        "explain.fraction",
        "explain.fraction=2.0",
        "no_such_field=1",
    ] {
        let out = faithlab(tmp.path(), &["--set", set, "show-config"]);
        assert!(!out.status.success(), "{set}");
        assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));
    }
}

#[test]
fn overrides_and_flags_reach_the_config() {
    let tmp = setup();
    let out = faithlab(
        tmp.path(),
        &[
            "--config",
            "small.toml",
            "--seed",
            "99",
            "--set",
            "explain.fraction=0.2",
            "show-config",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let cfg =
        faithlab::harness::ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap())
            .unwrap();
    assert_eq!(cfg.seed, 99);
    assert_eq!(cfg.explain.fraction, 0.2);
    assert_eq!(cfg.corpus.test_fraction, 0.25);
}

#[test]
fn step_by_step_matches_run_and_report_is_idempotent() {
    let tmp = setup();
    let steps = [
        "gen-data",
        "train",
        "explain",
        "eval-eraser",
        "attack-eraser",
        "report",
    ];
    for s in steps {
        let out = faithlab(tmp.path(), &["--config", "small.toml", "--out", "out", s]);
        assert!(out.status.success(), "{s}: {}", stderr(&out));
    }
    let dir = run_dir(tmp.path());
    let table = fs::read(dir.join("table1.csv")).unwrap();
    let summary = fs::read(dir.join("confidence_summary.json")).unwrap();

    let again = faithlab(
        tmp.path(),
        &["--config", "small.toml", "--out", "out", "report"],
    );
    assert!(again.status.success());
    assert_eq!(fs::read(dir.join("table1.csv")).unwrap(), table);
    assert_eq!(
        fs::read(dir.join("confidence_summary.json")).unwrap(),
        summary
    );

    let whole = faithlab(
        tmp.path(),
        &[
            "--config",
            "small.toml",
            "--out",
            "whole",
            "--threads",
            "2",
            "run",
        ],
    );
    assert!(whole.status.success(), "{}", stderr(&whole));
    let name = dir.file_name().unwrap();
    assert_eq!(
        fs::read(tmp.path().join("whole").join(name).join("table1.csv")).unwrap(),
        table
    );
}

#[test]
fn report_on_an_empty_directory_fails() {
    let tmp = setup();
    let out = faithlab(tmp.path(), &["--run-dir", "nowhere", "report"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("config.toml"), "{}", stderr(&out));
}
