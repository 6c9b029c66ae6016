use std::path::PathBuf;
use std::process::{Command, ExitCode};

use clap::{Args, Parser, Subcommand};
use oqho_cli::{load_scenario, run_loaded, Outcome, Overrides, EXIT_NUMERICAL, EXIT_PASS, EXIT_SCHEMA};

#[derive(Parser)]
#[command(name = "oqho", version, about = "Run kernel-measure scenarios for open quantum harmonic oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its artifacts.
    Run(Target),
    /// Check a scenario against the schema without running it.
    Validate(Target),
}

#[derive(Args)]
struct Target {
    scenario: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides `refinement_levels`.
    #[arg(long)]
    levels: Option<usize>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

impl Target {
    fn overrides(&self) -> Overrides {
        Overrides { output_dir: self.output_dir.clone(), levels: self.levels, seed: self.seed }
    }
}

const CORETYPE: &str = "OPENBLAS_CORETYPE";

/// Re-executes under a safe OpenBLAS kernel if the backend fails its self-check.
fn ensure_backend() -> Result<(), i32> {
    if oqho_core::linalg::backend_self_check().is_ok() {
        return Ok(());
    }
    if std::env::var_os(CORETYPE).is_some() {
        eprintln!("error: linear algebra backend failed its self-check with {CORETYPE} set");
        return Err(EXIT_NUMERICAL);
    }
    let exe = std::env::current_exe().map_err(|_| EXIT_NUMERICAL)?;
    let status = Command::new(exe).args(std::env::args_os().skip(1)).env(CORETYPE, "Haswell").status();
    match status {
        Ok(s) => Err(s.code().unwrap_or(EXIT_NUMERICAL)),
        Err(e) => {
            eprintln!("error: cannot re-execute with {CORETYPE}=Haswell: {e}");
            Err(EXIT_NUMERICAL)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_SCHEMA as u8 } else { EXIT_PASS as u8 });
        }
    };
    if let Err(code) = ensure_backend() {
        return ExitCode::from(code as u8);
    }
    let (target, run) = match &cli.command {
        Cmd::Run(t) => (t, true),
        Cmd::Validate(t) => (t, false),
    };
    let sc = match load_scenario(&target.scenario, &target.overrides()) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("schema error: {e}");
            return ExitCode::from(EXIT_SCHEMA as u8);
        }
    };
    if !run {
        println!("{}: valid {} scenario", target.scenario.display(), sc.task);
        return ExitCode::from(EXIT_PASS as u8);
    }
    let outcome = run_loaded(&sc);
    match &outcome {
        Outcome::Completed { artifacts, passed } => {
            for c in &artifacts.checks {
                println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("{} -> {}", if *passed { "pass" } else { "fail" }, sc.output_dir.display());
        }
        Outcome::Numerical(msg) => eprintln!("numerical failure: {msg}"),
        Outcome::Schema(e) => eprintln!("schema error: {e}"),
    }
    ExitCode::from(outcome.exit_code() as u8)
}
