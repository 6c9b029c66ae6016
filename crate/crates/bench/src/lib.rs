//! Fixtures shared by the benchmarks in `benches/`.

use std::sync::Arc;

use ndarray::array;
use oqho_core::linalg::{CMat, RMat, C64};
use oqho_core::model::damped_mode;
use oqho_core::{make_grid, CcrKernel, KernelMeasure};

/// A lightly coupled single mode on `[0, 1]` with `steps` steps.
pub fn mild_kernel(steps: usize) -> Arc<CcrKernel> {
    let model = damped_mode(0.5, 0.7).expect("damped mode is Hurwitz");
    Arc::new(CcrKernel::build(&model, make_grid(1.0, steps).expect("positive steps")))
}

pub fn pi() -> RMat {
    array![[0.6, 0.0], [0.0, 0.3]]
}

/// Deterministic dense complex matrix with entries in `[-1, 1]`, scaled by `scale`.
pub fn dense(n: usize, scale: f64) -> CMat {
    CMat::from_shape_fn((n, n), |(i, j)| {
        let x = ((i * 31 + j * 17) % 23) as f64 / 11.0 - 1.0;
        let y = ((i * 7 + j * 29) % 19) as f64 / 9.0 - 1.0;
        C64::new(x * scale, y * scale)
    })
}

/// Symmetric measure on the full grid built from [`dense`].
pub fn full_measure(ccr: &CcrKernel, scale: f64) -> KernelMeasure {
    let d = dense(ccr.dim(), scale);
    let sym = (&d + &d.t()) * C64::new(0.5, 0.0);
    KernelMeasure::from_weights(*ccr.grid(), ccr.n(), &sym).expect("square weights")
}
