//! Artifact files of a scenario run. Every CSV starts with `# schema=1`;
//! reals use 17 significant digits and empty fields mean "not applicable".

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use oqho_core::convergence::ConvergenceTable;
use oqho_core::io::{fmt_f64, write_measure_csv, SCHEMA_VERSION};
use oqho_core::KernelMeasure;

use crate::scenario::Scenario;

pub const NODE_HEADER: &str = "node,time,symplectic,reality,reconstruction,roundtrip,cross_route,asymmetry,step,branch_switch";
pub const CASE_HEADER: &str = "case,kind,value,bound,passed";
pub const CONVERGENCE_HEADER: &str = "study,level,steps,h,error,order,warning";

/// Per-node diagnostics at the base refinement level.
#[derive(Debug, Clone, Default)]
pub struct NodeRow {
    pub node: usize,
    pub time: f64,
    pub symplectic: Option<f64>,
    pub reality: Option<f64>,
    pub reconstruction: Option<f64>,
    /// Distance of a composed forward/inverse map from its input.
    pub roundtrip: Option<f64>,
    /// Distance between two routes to the same kernel.
    pub cross_route: Option<f64>,
    pub asymmetry: Option<f64>,
    pub step: Option<f64>,
    pub branch_switch: Option<bool>,
}

/// One sampled case of the validate, laplace and oracle tasks.
#[derive(Debug, Clone)]
pub struct CaseRow {
    pub case: usize,
    pub kind: &'static str,
    pub value: f64,
    pub bound: f64,
}

impl CaseRow {
    pub fn passed(&self) -> bool {
        self.value <= self.bound
    }
}

#[derive(Debug, Clone)]
pub enum Report {
    Nodes(Vec<NodeRow>),
    Cases(Vec<CaseRow>),
}

impl Default for Report {
    fn default() -> Self {
        Report::Nodes(Vec::new())
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            passed: value <= bound,
            detail: format!("{} <= {}", fmt_f64(value), fmt_f64(bound)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Study {
    pub name: String,
    pub table: ConvergenceTable,
}

/// Everything a task produces besides the exit status.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub measures: Vec<(String, KernelMeasure)>,
    pub report: Report,
    pub studies: Vec<Study>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Artifacts {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn create(dir: &Path, name: &str) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn write_report<W: Write>(report: &Report, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# schema={SCHEMA_VERSION}")?;
    match report {
        Report::Nodes(rows) => {
            writeln!(out, "{NODE_HEADER}")?;
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.node,
                    fmt_f64(r.time),
                    opt(r.symplectic),
                    opt(r.reality),
                    opt(r.reconstruction),
                    opt(r.roundtrip),
                    opt(r.cross_route),
                    opt(r.asymmetry),
                    opt(r.step),
                    r.branch_switch.map(|b| u8::from(b).to_string()).unwrap_or_default(),
                )?;
            }
        }
        Report::Cases(rows) => {
            writeln!(out, "{CASE_HEADER}")?;
            for r in rows {
                writeln!(out, "{},{},{},{},{}", r.case, r.kind, fmt_f64(r.value), fmt_f64(r.bound), u8::from(r.passed()))?;
            }
        }
    }
    Ok(())
}

pub fn write_convergence<W: Write>(studies: &[Study], mut out: W) -> std::io::Result<()> {
    writeln!(out, "# schema={SCHEMA_VERSION}")?;
    writeln!(out, "{CONVERGENCE_HEADER}")?;
    for s in studies {
        for (k, row) in s.table.rows.iter().enumerate() {
            writeln!(
                out,
                "{},{k},{},{},{},{},{}",
                s.name,
                row.level.steps,
                fmt_f64(row.level.h),
                fmt_f64(row.level.error),
                opt(row.order),
                u8::from(row.warning),
            )?;
        }
    }
    Ok(())
}

fn write_header<W: Write>(sc: &Scenario, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "scenario {}", sc.name)?;
    writeln!(out, "task {}", sc.task)?;
    writeln!(out, "seed {}", sc.seed)?;
    let levels: Vec<String> = sc.level_steps().iter().map(|s| s.to_string()).collect();
    writeln!(out, "levels {}", levels.join(" "))
}

pub fn write_summary<W: Write>(sc: &Scenario, art: &Artifacts, mut out: W) -> std::io::Result<()> {
    write_header(sc, &mut out)?;
    for c in &art.checks {
        writeln!(out, "{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    for n in &art.notes {
        writeln!(out, "note {n}")?;
    }
    let failed = art.checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "status {} ({} of {} checks passed)", if failed == 0 { "pass" } else { "fail" }, art.checks.len() - failed, art.checks.len())
}

/// Summary of a run aborted by a numerical error.
pub fn write_error_summary<W: Write>(sc: &Scenario, error: &str, mut out: W) -> std::io::Result<()> {
    write_header(sc, &mut out)?;
    writeln!(out, "error {error}")?;
    writeln!(out, "status error")
}

/// Writes all artifact files into the scenario's output directory.
pub fn write_all(sc: &Scenario, art: &Artifacts) -> std::io::Result<Vec<PathBuf>> {
    let dir = &sc.output_dir;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (label, q) in &art.measures {
        let name = format!("{label}.csv");
        write_measure_csv(q, create(dir, &name)?).map_err(std::io::Error::other)?;
        written.push(dir.join(name));
    }
    let mut w = create(dir, "report.csv")?;
    write_report(&art.report, &mut w)?;
    w.flush()?;
    let mut w = create(dir, "convergence.csv")?;
    write_convergence(&art.studies, &mut w)?;
    w.flush()?;
    let mut w = create(dir, "summary.txt")?;
    write_summary(sc, art, &mut w)?;
    w.flush()?;
    written.extend(["report.csv", "convergence.csv", "summary.txt"].map(|n| dir.join(n)));
    Ok(written)
}

pub fn write_error(sc: &Scenario, error: &str) -> std::io::Result<()> {
    fs::create_dir_all(&sc.output_dir)?;
    let mut w = create(&sc.output_dir, "summary.txt")?;
    write_error_summary(sc, error, &mut w)?;
    w.flush()
}
