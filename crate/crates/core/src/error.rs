use thiserror::Error;

/// Errors raised by model construction, kernel algebra and the bridge solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not antisymmetric (residual {residual:.3e})")]
    NotAntisymmetric { residual: f64 },

    #[error("matrix is not symmetric (residual {residual:.3e})")]
    NotSymmetric { residual: f64 },

    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("CCR matrix is numerically singular (condition number {condition:.3e})")]
    SingularTheta { condition: f64 },

    #[error("drift matrix is not Hurwitz (spectral abscissa {abscissa:.6e}, eigenvalues {eigenvalues:?})")]
    NotHurwitz { abscissa: f64, eigenvalues: Vec<(f64, f64)> },

    #[error("physical realizability violated (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    PhysicalRealizability { residual: f64, tolerance: f64 },

    #[error("Laplace argument s = {re}+{im}i lies outside the strip 0 < Re s < {bound:.6e}")]
    OutsideStrip { re: f64, im: f64, bound: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("exponential argument norm {norm:.3e} exceeds the safety bound {bound}")]
    ExponentialOverflow { norm: f64, bound: f64 },

    #[error("matrix logarithm branch is ambiguous: eigenvalue {re:.6e}{im:+.6e}i on the negative real axis")]
    BranchAmbiguity { re: f64, im: f64 },

    #[error("matrix logarithm left the anchored branch (distance {distance:.3e} from anchor)")]
    BranchCrossing { distance: f64 },

    #[error("logarithm reconstruction residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Reconstruction { residual: f64, tolerance: f64 },

    #[error("measure not recoverable from kernel: residual {residual:.3e}, rank {rank}/{unknowns}, condition {condition:.3e}")]
    NotRecoverable { residual: f64, rank: usize, unknowns: usize, condition: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("step norm {norm:.3e} at node {node} exceeds {bound} (refine the grid)")]
    StepNorm { node: usize, norm: f64, bound: f64 },

    #[error("adjoint bound {bound:.3e} exceeds the series convergence limit {limit:.3e}{}", node.map(|u| format!(" at node {u}")).unwrap_or_default())]
    SeriesBound { bound: f64, limit: f64, node: Option<usize> },

    #[error("ill-conditioned system (condition number {condition:.3e} > {limit:.1e})")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("dimension budget exceeded: {dim} > {budget}")]
    DimensionBudget { dim: usize, budget: usize },

    #[error("missing data: {0}")]
    Missing(String),

    #[error("linear algebra backend: {0}")]
    Backend(#[from] ndarray_linalg::error::LinalgError),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
