pub mod convergence;
pub mod error;
pub mod fock;
pub mod grid;
pub mod io;
pub mod lie;
pub mod linalg;
pub mod measure;
pub mod model;
pub mod quad;
pub mod solvers;

pub use error::{Error, Result};
pub use grid::{make_grid, TimeGrid};
pub use model::{LaplacePoint, OqhoModel};
pub use measure::{CcrKernel, ChkMatrix, KernelMeasure};
pub use lie::{CskMatrix, MeasureSolve};
pub use solvers::{CskPath, MeasurePath};
