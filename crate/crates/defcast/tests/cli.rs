//! End-to-end checks of the `defcast` binary and its exit codes.

use std::path::Path;
use std::process::Command;

fn defcast(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_defcast")).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_every_artifact_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "ev.toml",
        "protocol = \"evaluators\"\nhorizon = 300\nseeds = [5, 6]\n\
         experts = [\"uniform@log\", \"constant:0.3@square\"]\nreality = \"greedy:log\"\n",
    );
    let out = dir.path().join("out");
    let (code, stdout, _) = defcast(&["run", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    for seed in [5, 6] {
        let seed_dir = out.join(format!("seed-{seed}"));
        for file in ["transcript.jsonl", "ledger.json", "ledger.txt", "regret.csv"] {
            assert!(seed_dir.join(file).exists(), "missing {file}");
        }
        let (code, stdout, _) = defcast(&["verify", seed_dir.join("transcript.jsonl").to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(stdout.ends_with("verified\n"));
        let (code, stdout, _) = defcast(&["report", seed_dir.join("ledger.json").to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(stdout.contains("all bounds hold"));
    }
}

#[test]
fn same_seed_gives_identical_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "st.toml",
        "protocol = \"standard\"\nhorizon = 200\nseeds = [9]\nloss = \"square\"\n\
         experts = [\"uniform\", \"drift:0.2:0.01\"]\nreality = \"bernoulli:0.4:2\"\n",
    );
    let read = |sub: &str| {
        let out = dir.path().join(sub);
        assert_eq!(defcast(&["run", &config, "--out", out.to_str().unwrap()]).0, 0);
        std::fs::read_to_string(out.join("seed-9/transcript.jsonl")).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn learning_rate_above_mixability_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.toml",
        "protocol = \"evaluators\"\nhorizon = 10\n\
         experts = [\"uniform@log\", \"constant:0.5@square:eta=2.5\"]\nreality = \"greedy:square\"\n",
    );
    let (code, _, stderr) = defcast(&["run", &config]);
    assert_eq!(code, 2);
    assert!(stderr.contains("constant:0.5"), "{stderr}");
}

#[test]
fn fixed_learner_violates_its_bound() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "fixed.toml",
        "protocol = \"standard\"\nhorizon = 200\nloss = \"log\"\nlearner = \"fixed:0.05\"\n\
         experts = [\"constant:0.9\"]\nreality = \"script:1:cycle\"\n",
    );
    let out = dir.path().join("out");
    let (code, stdout, _) = defcast(&["run", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1, "{stdout}");
    let (code, stdout, _) = defcast(&["verify", out.join("seed-0/transcript.jsonl").to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stdout.contains("FAILED at step 1"), "{stdout}");
}

#[test]
fn check_loss_exit_codes() {
    assert_eq!(defcast(&["check-loss", "square", "--eta", "2"]).0, 0);
    assert_eq!(defcast(&["check-loss", "square", "--eta", "2.2"]).0, 1);
    assert_eq!(defcast(&["check-loss", "genlog:0.5"]).0, 0);
    assert_eq!(defcast(&["check-loss", "scaled:2:log"]).0, 0);
    assert_eq!(defcast(&["check-loss", "hinge"]).0, 2);
    assert_eq!(defcast(&["check-loss", "log", "--eta", "-1"]).0, 2);
}

#[test]
fn malformed_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let (code, stdout, _) = defcast(&["verify", empty.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("verified"));

    let garbage = dir.path().join("garbage.jsonl");
    std::fs::write(&garbage, "{\"t\": 1, \"advice\": 3}\n").unwrap();
    let (code, _, stderr) = defcast(&["verify", garbage.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 1"), "{stderr}");

    assert_eq!(defcast(&["verify", dir.path().join("absent.jsonl").to_str().unwrap()]).0, 2);
    let unknown = write_config(dir.path(), "unknown.toml", "protocol = \"evaluators\"\ncolour = \"red\"\n");
    assert_eq!(defcast(&["run", &unknown]).0, 2);
    assert_eq!(defcast(&["frobnicate"]).0, 2);
}

#[test]
fn tolerance_environment_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_defcast"))
        .env("DEFCAST_MONO_TOL", "lots")
        .args(["verify", empty.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
