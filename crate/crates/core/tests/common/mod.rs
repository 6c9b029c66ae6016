#![allow(dead_code)]

pub mod reference;

use std::sync::Arc;

use ndarray::s;
use oqho_core::linalg::{fro, CMat, RMat, C64};
use oqho_core::{make_grid, CcrKernel, KernelMeasure, OqhoModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_model(seed: u64, n: usize, m: usize) -> OqhoModel {
    OqhoModel::random(n, m, &mut rng(seed)).expect("Hurwitz draw")
}

pub fn kernel(model: &OqhoModel, horizon: f64, steps: usize) -> Arc<CcrKernel> {
    Arc::new(CcrKernel::build(model, make_grid(horizon, steps).unwrap()))
}

pub fn random_cmat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_shape_fn((rows, cols), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_rmat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> RMat {
    RMat::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Random complex symmetric measure supported on `[0, t_support]²`.
pub fn random_measure(ccr: &CcrKernel, support: usize, rng: &mut ChaCha8Rng) -> KernelMeasure {
    let l = ccr.n() * (support + 1);
    let raw = random_cmat(l, l, rng);
    KernelMeasure::from_lead(*ccr.grid(), ccr.n(), support, (&raw + &raw.t()) * C64::new(0.5, 0.0)).unwrap()
}

/// Random measure rescaled so that `‖4iΛQ‖_F = target`.
pub fn measure_with_generator_norm(ccr: &CcrKernel, support: usize, target: f64, rng: &mut ChaCha8Rng) -> KernelMeasure {
    let q = random_measure(ccr, support, rng);
    let g = generator(ccr, &q);
    q.scale(C64::new(target / fro(&g), 0.0))
}

/// Dense `4iΛ·W`.
pub fn generator(ccr: &CcrKernel, q: &KernelMeasure) -> CMat {
    ccr.big_complex().dot(&q.weights()) * C64::new(0.0, 4.0)
}

pub fn rel(a: &CMat, b: &CMat) -> f64 {
    fro(&(a - b)) / fro(b).max(1e-300)
}

/// Leading `rows × cols` corner.
pub fn corner(a: &CMat, rows: usize, cols: usize) -> CMat {
    a.slice(s![..rows, ..cols]).to_owned()
}
