use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use defcast::{cmd_check_loss, cmd_report, cmd_run, cmd_verify, exit_code, CliError, Verdict};
use defcast_core::loss::DEFAULT_GRID;

/// Games of prediction with expert evaluators' advice.
///
/// Exit status: 0 all checks pass, 1 a bound or certificate fails,
/// 2 usage or input error. DEFCAST_BOUND_TOL and DEFCAST_MONO_TOL override
/// the default tolerances (1e-6 and 1e-9).
#[derive(Parser)]
#[command(name = "defcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play the games described by a TOML config and write transcripts,
    /// ledgers and regret curves.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute losses, bounds and Q from a recorded transcript.
    Verify { transcript: PathBuf },
    /// Certify properness, mixability and the shifted-curve geometry of a loss.
    CheckLoss {
        spec: String,
        /// Learning rate; defaults to the loss's mixability constant.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
    },
    /// Print a stored ledger document.
    Report { ledger: PathBuf },
}

fn print_text(result: Result<(Verdict, String), CliError>) -> Result<Verdict, CliError> {
    result.map(|(v, text)| {
        print!("{text}");
        v
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out.as_deref()).map(|(v, seeds)| {
            for s in &seeds {
                let worst = s.doc.rows.iter().map(|r| r.slack.0).fold(f64::INFINITY, f64::min);
                println!(
                    "seed {}: {} ({} steps, min slack {:e}) -> {}",
                    s.seed,
                    if s.doc.all_pass { "pass" } else { "FAIL" },
                    s.doc.steps,
                    worst,
                    s.dir.display()
                );
            }
            v
        }),
        Command::Verify { transcript } => print_text(cmd_verify(&transcript)),
        Command::CheckLoss { spec, eta, grid } => print_text(cmd_check_loss(&spec, eta, grid)),
        Command::Report { ledger } => print_text(cmd_report(&ledger)),
    };
    if let Err(e) = &result {
        eprintln!("defcast: {e}");
    }
    ExitCode::from(exit_code(&result) as u8)
}
