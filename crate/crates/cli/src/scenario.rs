//! Scenario files: flat TOML key-value pairs with matrices as row lists.
//!
//! ```toml
//! task = "forward"
//! horizon = 1.0
//! steps = 16
//! refinement_levels = 3
//! theta = [[0.0, 1.0], [-1.0, 0.0]]
//! energy = [[0.5, 0.0], [0.0, 0.5]]
//! coupling = [[0.7, 0.0], [0.0, 0.7]]
//! pi = [[0.6, 0.0], [0.0, 0.3]]
//! ```
//!
//! Exactly one model source is required: `model_file`, `random_model = [n, m]`,
//! inline `theta` + `energy` + `coupling`, or inline `theta` + `drift` +
//! `dispersion` (with optional `pr_override`). Grammar details are in the README.

use std::fmt;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use oqho_core::linalg::RMat;
use oqho_core::OqhoModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct SchemaError(pub String);

fn schema(msg: impl Into<String>) -> SchemaError {
    SchemaError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Forward,
    Inverse,
    Roundtrip,
    Spde,
    Validate,
    Laplace,
    Oracle,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Task::Forward => "forward",
            Task::Inverse => "inverse",
            Task::Roundtrip => "roundtrip",
            Task::Spde => "spde",
            Task::Validate => "validate",
            Task::Laplace => "laplace",
            Task::Oracle => "oracle",
        };
        f.write_str(s)
    }
}

/// The cost driver `F` (forward, roundtrip) or QEF measure `N` (inverse).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Driver {
    /// `F ≡ 0`.
    Zero,
    /// `F_t = Π` at the corner `(t, t)`.
    Atomic,
    /// `Π` times Lebesgue measure on the diagonal of `[0, t]²`.
    Lebesgue,
    /// `F = inverse(N)` for the diagonal-Lebesgue `N`: the representative of
    /// its class on which `inverse ∘ forward` is the identity.
    Class,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    task: Task,
    horizon: Option<f64>,
    steps: Option<usize>,
    seed: Option<u64>,
    refinement_levels: Option<usize>,
    output_dir: Option<PathBuf>,
    model_file: Option<PathBuf>,
    random_model: Option<[usize; 2]>,
    theta: Option<Vec<Vec<f64>>>,
    energy: Option<Vec<Vec<f64>>>,
    coupling: Option<Vec<Vec<f64>>>,
    drift: Option<Vec<Vec<f64>>>,
    dispersion: Option<Vec<Vec<f64>>>,
    pr_override: Option<bool>,
    pi: Option<Vec<Vec<f64>>>,
    driver: Option<Driver>,
    cutoff: Option<usize>,
    cases: Option<usize>,
    tolerance: Option<f64>,
    lambda_nodes: Option<usize>,
    bernoulli_order: Option<usize>,
    laplace_samples: Option<usize>,
}

/// Model files: `n`, `m`, row-major `theta`, then either `K` and `M` or
/// `A` and `B` with an explicit `pr_override` flag.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelFile {
    n: usize,
    m: usize,
    theta: Vec<f64>,
    #[serde(rename = "K")]
    energy: Option<Vec<f64>>,
    #[serde(rename = "M")]
    coupling: Option<Vec<f64>>,
    #[serde(rename = "A")]
    drift: Option<Vec<f64>>,
    #[serde(rename = "B")]
    dispersion: Option<Vec<f64>>,
    pr_override: Option<bool>,
}

#[derive(Debug, Clone)]
pub enum ModelSource {
    EnergyCoupling { theta: RMat, energy: RMat, coupling: RMat },
    DriftDispersion { theta: RMat, drift: RMat, dispersion: RMat, pr_override: bool },
    /// `OqhoModel::random(n, m)` from the scenario seed.
    Random { n: usize, m: usize },
}

/// A validated scenario. Builds nothing numerical beyond matrix shapes.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub task: Task,
    pub horizon: f64,
    pub steps: usize,
    pub seed: u64,
    pub refinement_levels: usize,
    pub output_dir: PathBuf,
    pub model: ModelSource,
    pub pi: Option<RMat>,
    pub driver: Driver,
    pub cutoff: usize,
    pub cases: usize,
    pub tolerance: Option<f64>,
    pub lambda_nodes: usize,
    pub bernoulli_order: usize,
    pub laplace_samples: usize,
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub levels: Option<usize>,
    pub seed: Option<u64>,
}

impl ModelSource {
    /// State dimension `n`.
    pub fn n(&self) -> usize {
        match self {
            ModelSource::EnergyCoupling { theta, .. } | ModelSource::DriftDispersion { theta, .. } => theta.nrows(),
            ModelSource::Random { n, .. } => *n,
        }
    }

    fn check_shapes(&self) -> Result<(), SchemaError> {
        let even = |name: &str, d: usize| {
            if d == 0 || d % 2 != 0 {
                Err(schema(format!("{name} dimension {d} must be even and positive")))
            } else {
                Ok(())
            }
        };
        let shape = |name: &str, m: &RMat, dim: (usize, usize)| {
            if m.dim() != dim {
                Err(schema(format!("`{name}` is {}x{}, expected {}x{}", m.nrows(), m.ncols(), dim.0, dim.1)))
            } else {
                Ok(())
            }
        };
        let n = self.n();
        match self {
            ModelSource::EnergyCoupling { theta, energy, coupling } => {
                even("state", n)?;
                shape("theta", theta, (n, n))?;
                shape("energy", energy, (n, n))?;
                even("field", coupling.nrows())?;
                shape("coupling", coupling, (coupling.nrows(), n))
            }
            ModelSource::DriftDispersion { theta, drift, dispersion, .. } => {
                even("state", n)?;
                shape("theta", theta, (n, n))?;
                shape("drift", drift, (n, n))?;
                even("field", dispersion.ncols())?;
                shape("dispersion", dispersion, (n, dispersion.ncols()))
            }
            ModelSource::Random { n, m } => {
                even("state", *n)?;
                even("field", *m)
            }
        }
    }
}

pub const DEFAULT_HORIZON: f64 = 1.0;
pub const DEFAULT_STEPS: usize = 16;
pub const DEFAULT_CUTOFF: usize = 40;
pub const DEFAULT_CASES: usize = 20;
pub const DEFAULT_LAPLACE_SAMPLES: usize = 10;

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<RMat, SchemaError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(schema(format!("`{name}` must be a nonempty list of rows")));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != cols) {
        return Err(schema(format!("`{name}` row {r} has {} entries, expected {cols}", rows[r].len())));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(schema(format!("`{name}` has a non-finite entry")));
    }
    Ok(Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j]))
}

fn row_major(name: &str, data: &[f64], rows: usize, cols: usize) -> Result<RMat, SchemaError> {
    if data.len() != rows * cols {
        return Err(schema(format!("`{name}` has {} entries, expected {rows}x{cols}", data.len())));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(schema(format!("`{name}` has a non-finite entry")));
    }
    Ok(Array2::from_shape_vec((rows, cols), data.to_vec()).expect("length checked"))
}

fn parse_model_file(text: &str) -> Result<ModelSource, SchemaError> {
    let raw: RawModelFile = toml::from_str(text).map_err(|e| schema(format!("model file: {}", e.message())))?;
    let (n, m) = (raw.n, raw.m);
    let theta = row_major("theta", &raw.theta, n, n)?;
    match (raw.energy, raw.coupling, raw.drift, raw.dispersion) {
        (Some(k), Some(mm), None, None) => {
            if raw.pr_override.is_some() {
                return Err(schema("model file: `pr_override` only applies to `A`, `B`"));
            }
            Ok(ModelSource::EnergyCoupling {
                theta,
                energy: row_major("K", &k, n, n)?,
                coupling: row_major("M", &mm, m, n)?,
            })
        }
        (None, None, Some(a), Some(b)) => Ok(ModelSource::DriftDispersion {
            theta,
            drift: row_major("A", &a, n, n)?,
            dispersion: row_major("B", &b, n, m)?,
            pr_override: raw
                .pr_override
                .ok_or_else(|| schema("model file: `A`, `B` need an explicit `pr_override` flag"))?,
        }),
        _ => Err(schema("model file: give either `K` and `M` or `A` and `B`")),
    }
}

impl Scenario {
    /// Parses scenario text; `base` resolves relative `model_file` paths.
    pub fn parse(text: &str, name: &str, base: &Path) -> Result<Self, SchemaError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| schema(e.message().trim().to_string()))?;
        let mat = |name: &str, v: &Option<Vec<Vec<f64>>>| v.as_deref().map(|r| matrix(name, r)).transpose();
        let theta = mat("theta", &raw.theta)?;
        let energy = mat("energy", &raw.energy)?;
        let coupling = mat("coupling", &raw.coupling)?;
        let drift = mat("drift", &raw.drift)?;
        let dispersion = mat("dispersion", &raw.dispersion)?;
        let inline = [&theta, &energy, &coupling, &drift, &dispersion].iter().any(|m| m.is_some());
        let sources = usize::from(raw.model_file.is_some()) + usize::from(raw.random_model.is_some()) + usize::from(inline);
        if sources != 1 {
            return Err(schema("exactly one of `model_file`, `random_model` or inline matrices is required"));
        }
        if raw.pr_override.is_some() && drift.is_none() {
            return Err(schema("`pr_override` only applies to inline `drift`, `dispersion`"));
        }
        let model = if let Some(file) = &raw.model_file {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| schema(format!("cannot read model file {}: {e}", path.display())))?;
            parse_model_file(&text)?
        } else if let Some([n, m]) = raw.random_model {
            ModelSource::Random { n, m }
        } else {
            let theta = theta.ok_or_else(|| schema("inline model needs `theta`"))?;
            match (energy, coupling, drift, dispersion) {
                (Some(energy), Some(coupling), None, None) => ModelSource::EnergyCoupling { theta, energy, coupling },
                (None, None, Some(drift), Some(dispersion)) => ModelSource::DriftDispersion {
                    theta,
                    drift,
                    dispersion,
                    pr_override: raw.pr_override.unwrap_or(false),
                },
                _ => return Err(schema("inline model needs `energy` and `coupling`, or `drift` and `dispersion`")),
            }
        };
        model.check_shapes()?;
        let horizon = raw.horizon.unwrap_or(DEFAULT_HORIZON);
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(schema(format!("`horizon` must be positive and finite, got {horizon}")));
        }
        let steps = raw.steps.unwrap_or(DEFAULT_STEPS);
        if steps == 0 {
            return Err(schema("`steps` must be ≥ 1"));
        }
        let refinement_levels = raw.refinement_levels.unwrap_or(1);
        if refinement_levels == 0 {
            return Err(schema("`refinement_levels` must be ≥ 1"));
        }
        let pi = mat("pi", &raw.pi)?;
        if let Some(p) = &pi {
            let n = model.n();
            if p.dim() != (n, n) {
                return Err(schema(format!("`pi` is {}x{}, expected {n}x{n}", p.nrows(), p.ncols())));
            }
        }
        let driver = raw.driver.unwrap_or(match raw.task {
            Task::Inverse => Driver::Lebesgue,
            _ => Driver::Atomic,
        });
        let needs_pi = match raw.task {
            Task::Forward | Task::Roundtrip => driver != Driver::Zero,
            Task::Inverse | Task::Spde => true,
            Task::Validate | Task::Laplace | Task::Oracle => false,
        };
        if needs_pi && pi.is_none() {
            return Err(schema(format!("task `{}` with driver {driver:?} requires `pi`", raw.task)));
        }
        if raw.task == Task::Inverse && driver != Driver::Lebesgue {
            return Err(schema("task `inverse` takes the diagonal-Lebesgue `N` only (driver = \"lebesgue\")"));
        }
        if raw.task == Task::Spde && raw.driver.is_some() {
            return Err(schema("task `spde` always uses the atomic driver; remove `driver`"));
        }
        if let Some(t) = raw.tolerance {
            if !(t.is_finite() && t > 0.0) {
                return Err(schema(format!("`tolerance` must be positive, got {t}")));
            }
        }
        let cutoff = raw.cutoff.unwrap_or(DEFAULT_CUTOFF);
        let cases = raw.cases.unwrap_or(DEFAULT_CASES);
        let lambda_nodes = raw.lambda_nodes.unwrap_or(oqho_core::solvers::DEFAULT_LAMBDA_NODES);
        let bernoulli_order = raw.bernoulli_order.unwrap_or(oqho_core::solvers::DEFAULT_BERNOULLI_ORDER);
        let laplace_samples = raw.laplace_samples.unwrap_or(DEFAULT_LAPLACE_SAMPLES);
        for (key, v) in [("cases", cases), ("lambda_nodes", lambda_nodes), ("bernoulli_order", bernoulli_order), ("laplace_samples", laplace_samples)] {
            if v == 0 {
                return Err(schema(format!("`{key}` must be ≥ 1")));
            }
        }
        Ok(Scenario {
            name: name.to_string(),
            task: raw.task,
            horizon,
            steps,
            seed: raw.seed.unwrap_or(0),
            refinement_levels,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            model,
            pi,
            driver,
            cutoff,
            cases,
            tolerance: raw.tolerance,
            lambda_nodes,
            bernoulli_order,
            laplace_samples,
        })
    }

    /// Reads and parses a scenario file named after its stem.
    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|e| schema(format!("cannot read {}: {e}", path.display())))?;
        let name = path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
        Self::parse(&text, &name, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), SchemaError> {
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(l) = o.levels {
            if l == 0 {
                return Err(schema("`--levels` must be ≥ 1"));
            }
            self.refinement_levels = l;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Step counts `N, 2N, 4N, …` of the refinement study.
    pub fn level_steps(&self) -> Vec<usize> {
        (0..self.refinement_levels).map(|k| self.steps << k).collect()
    }

    /// Builds the model; construction failures are numerical (exit 3).
    pub fn build_model(&self) -> oqho_core::Result<OqhoModel> {
        match &self.model {
            ModelSource::EnergyCoupling { theta, energy, coupling } => {
                OqhoModel::from_energy_coupling(theta, energy, coupling)
            }
            ModelSource::DriftDispersion { theta, drift, dispersion, pr_override } => {
                OqhoModel::from_drift_dispersion(theta, drift, dispersion, *pr_override)
            }
            // a dedicated stream keeps the model independent of later draws
            ModelSource::Random { n, m } => OqhoModel::random(*n, *m, &mut ChaCha8Rng::seed_from_u64(self.seed ^ MODEL_STREAM)),
        }
    }
}

const MODEL_STREAM: u64 = 0x6d6f_6465_6c00_0000;
