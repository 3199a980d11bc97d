//! Files, configuration and commands for `defcast`.
//!
//! Exit codes: 0 when every check passes, 1 when a bound or certificate
//! fails, 2 for usage, configuration and parse errors.
//!
//! Tolerances can be overridden through the environment:
//! `DEFCAST_BOUND_TOL` (regret bounds, default `1e-6`) and
//! `DEFCAST_MONO_TOL` (growth of `Q` per step, default `1e-9`).

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use defcast_core::loss::{
    check_assumptions, check_eta_mixable, check_northeast_of_shift, check_proper, LossFunction, LossSpec,
};
use defcast_core::protocols::{run_game, GameRecord, ProtocolError, Tolerances, VirtualPanel};
use defcast_core::specialist::run_specialist_game;
use rayon::prelude::*;

pub mod config;
pub mod report;
pub mod transcript;

pub use config::{ProtocolKind, RunConfig, Setup};
pub use report::{write_regret_curve, LedgerDoc};
pub use transcript::{read_transcript, transcript_to_string, write_transcript};

pub const BOUND_TOL_VAR: &str = "DEFCAST_BOUND_TOL";
pub const MONO_TOL_VAR: &str = "DEFCAST_MONO_TOL";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot write output: {0}")]
    Output(String),
    #[error(transparent)]
    Game(#[from] ProtocolError),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), msg: e.to_string() }
    }
}

/// What a command concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Violation,
}

impl Verdict {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Violation
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Violation => 1,
        }
    }
}

pub fn exit_code(result: &Result<Verdict, CliError>) -> i32 {
    match result {
        Ok(v) => v.exit_code(),
        Err(_) => 2,
    }
}

fn env_tol(var: &str, default: f64) -> Result<f64, CliError> {
    match std::env::var(var) {
        Err(_) => Ok(default),
        Ok(text) => match text.trim().parse::<f64>() {
            Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
            _ => Err(CliError::Config(format!("{var}={text} is not a nonnegative number"))),
        },
    }
}

/// Default tolerances, overridden by the environment.
pub fn tolerances_from_env() -> Result<Tolerances, CliError> {
    let d = Tolerances::default();
    Ok(Tolerances { bound: env_tol(BOUND_TOL_VAR, d.bound)?, monotone: env_tol(MONO_TOL_VAR, d.monotone)? })
}

/// Plays the configured game once with the given run seed.
pub fn play(cfg: &RunConfig, seed: u64) -> Result<GameRecord, CliError> {
    let mut base: Vec<_> = cfg.experts.iter().cloned().map(|e| e.with_run_seed(seed)).collect();
    let mut reality = cfg.reality.clone().with_run_seed(seed);
    let record = match &cfg.setup {
        Setup::Evaluators => run_game(&mut base, &mut reality, cfg.horizon, cfg.learner)?,
        Setup::Relation(rel) => {
            let mut panel = VirtualPanel::new(base, rel.clone())?;
            run_game(&mut panel, &mut reality, cfg.horizon, cfg.learner)?
        }
        Setup::Specialist(sc) => run_specialist_game(sc, &mut base, &mut reality, cfg.horizon)?,
    };
    Ok(record)
}

fn protocol_name(kind: ProtocolKind) -> String {
    format!("{kind:?}").to_lowercase()
}

/// Result of one seed of `run`.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub doc: LedgerDoc,
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// `run <config>`: plays every seed, writes `seed-<s>/{transcript.jsonl,
/// ledger.json, ledger.txt, regret.csv}` and passes iff all bounds hold.
pub fn cmd_run(config: &Path, out_dir: Option<&Path>) -> Result<(Verdict, Vec<SeedOutcome>), CliError> {
    let tol = tolerances_from_env()?;
    let cfg = RunConfig::load(config)?;
    let root = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    let records: Vec<(u64, GameRecord)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| play(&cfg, seed).map(|r| (seed, r)))
        .collect::<Result<_, _>>()?;
    let name = protocol_name(cfg.protocol);
    let mut outcomes = Vec::new();
    for (seed, record) in records {
        let dir = root.join(format!("seed-{seed}"));
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let doc = LedgerDoc::new(&name, seed, tol.bound, &record.ledger.report(tol.bound));
        write(&dir.join("transcript.jsonl"), &transcript_to_string(&record.transcript))?;
        write(&dir.join("ledger.json"), &doc.to_json())?;
        write(&dir.join("ledger.txt"), &doc.to_table())?;
        let labels: Vec<String> = record.ledger.rows().iter().map(|r| r.label.clone()).collect();
        let curve = dir.join("regret.csv");
        let file = fs::File::create(&curve).map_err(|e| CliError::io(&curve, e))?;
        write_regret_curve(std::io::BufWriter::new(file), &record.transcript, &labels)?;
        outcomes.push(SeedOutcome { seed, dir, doc });
    }
    let pass = outcomes.iter().all(|o| o.doc.all_pass);
    Ok((Verdict::from_pass(pass), outcomes))
}

/// `verify <transcript>`: re-checks a transcript from scratch.
pub fn cmd_verify(path: &Path) -> Result<(Verdict, String), CliError> {
    let tol = tolerances_from_env()?;
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let transcript = read_transcript(BufReader::new(file))?;
    let report = defcast_core::protocols::verify_transcript(&transcript, tol)?;
    let mut text = format!(
        "steps {}  experts {}  ln Q_T {}\n",
        report.steps,
        transcript.n_experts().unwrap_or(0),
        report.log_q.last().copied().unwrap_or(0.0)
    );
    if let Some(t) = report.monotonicity_break {
        text += &format!(
            "Q-monotonicity break at step {t}: ln Q went from {} to {}\n",
            report.log_q[t - 1],
            report.log_q[t]
        );
    }
    if let Some(t) = report.step_break {
        text += &format!("prediction at step {t} lets Q grow under some outcome\n");
    }
    if let Some((t, row)) = report.bound_break {
        text += &format!("regret bound of expert {row} broken at step {t}\n");
    }
    let doc = LedgerDoc::new("transcript", 0, tol.bound, &report.ledger);
    text += &doc.to_table();
    match report.first_failing_step() {
        None => text += "verified\n",
        Some(t) => text += &format!("FAILED at step {t}\n"),
    }
    Ok((Verdict::from_pass(report.passed()), text))
}

/// `check-loss <spec> [--eta η]`: numerical certificates for one loss.
pub fn cmd_check_loss(spec: &str, eta: Option<f64>, grid: usize) -> Result<(Verdict, String), CliError> {
    let loss: LossSpec = spec.parse().map_err(|e| CliError::Config(format!("loss `{spec}`: {e}")))?;
    let eta_max = loss.mixability_constant().map_err(|e| CliError::Config(e.to_string()))?;
    let eta = eta.unwrap_or(eta_max);
    if !(eta.is_finite() && eta > 0.0) {
        return Err(CliError::Config(format!("eta {eta} must be positive")));
    }
    if grid < 3 {
        return Err(CliError::Config(String::from("grid needs at least 3 points")));
    }
    let assumptions = check_assumptions(&loss, grid);
    let checks = [
        ("continuous", assumptions.continuous),
        ("some prediction has both losses finite", assumptions.some_finite),
        ("no prediction has both losses infinite", assumptions.never_both_infinite),
        ("proper", check_proper(&loss, grid)),
        ("eta-mixable", check_eta_mixable(&loss, eta, grid)),
        ("northeast of every shifted curve", check_northeast_of_shift(&loss, eta, grid)),
    ];
    let mut text = format!("loss {loss}  eta {eta}  mixability constant {eta_max}  grid {grid}\n");
    for (name, ok) in checks {
        text += &format!("{:<40} {}\n", name, if ok { "pass" } else { "FAIL" });
    }
    Ok((Verdict::from_pass(checks.iter().all(|c| c.1)), text))
}

/// `report <ledger.json>`: prints a stored ledger as a table.
pub fn cmd_report(path: &Path) -> Result<(Verdict, String), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc = LedgerDoc::from_json(&text)?;
    Ok((Verdict::from_pass(doc.all_pass), doc.to_table()))
}
