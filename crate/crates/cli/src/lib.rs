//! Scenario runner for the oqho-core solvers: parse a scenario, run its task
//! over the refinement levels, and write CSV artifacts plus a summary.

pub mod output;
pub mod scenario;
pub mod tasks;

use std::path::Path;

pub use output::Artifacts;
pub use scenario::{Overrides, Scenario, SchemaError};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum Outcome {
    /// The task ran; the flag is whether every enabled check passed.
    Completed { artifacts: Artifacts, passed: bool },
    Schema(SchemaError),
    /// A library error or unwritable output, reported in the summary.
    Numerical(String),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Completed { passed: true, .. } => EXIT_PASS,
            Outcome::Completed { passed: false, .. } | Outcome::Numerical(_) => EXIT_NUMERICAL,
            Outcome::Schema(_) => EXIT_SCHEMA,
        }
    }
}

/// Parses `path` and applies the overrides: the `validate` command.
pub fn load_scenario(path: &Path, overrides: &Overrides) -> Result<Scenario, SchemaError> {
    let mut sc = Scenario::load(path)?;
    sc.apply(overrides)?;
    Ok(sc)
}

/// Runs a parsed scenario and writes its artifacts.
pub fn run_loaded(sc: &Scenario) -> Outcome {
    let result = sc.build_model().and_then(|model| tasks::run_task(sc, &model));
    match result {
        Ok(artifacts) => {
            if let Err(e) = output::write_all(sc, &artifacts) {
                return Outcome::Numerical(format!("writing artifacts to {}: {e}", sc.output_dir.display()));
            }
            let passed = artifacts.passed();
            Outcome::Completed { artifacts, passed }
        }
        Err(e) => {
            let msg = e.to_string();
            if let Err(io) = output::write_error(sc, &msg) {
                return Outcome::Numerical(format!("{msg}; summary not written: {io}"));
            }
            Outcome::Numerical(msg)
        }
    }
}

pub fn run_scenario(path: &Path, overrides: &Overrides) -> Outcome {
    match load_scenario(path, overrides) {
        Ok(sc) => run_loaded(&sc),
        Err(e) => Outcome::Schema(e),
    }
}
