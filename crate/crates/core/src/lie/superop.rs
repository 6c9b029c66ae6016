//! Functions of the adjoint map `ad_x = [x, ·]` applied to a matrix.
//!
//! `Υ(ad_x)` and `sinhc(ad_x)` are evaluated as averages of the conjugation
//! `e^{λx} y e^{−λx}` over Gauss–Legendre nodes in `λ`; `℧(ad_x)` by its
//! Bernoulli series.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{c, commutator, eigen, expm, fro, inverse, norm1, norm_inf, CMat, C64};
use crate::lie::scalar::{bernoulli_over_factorial, ups_scalar};
use crate::quad::gauss_legendre;

pub const DEFAULT_NODES: usize = 16;
/// Eigenvector condition number above which conjugation falls back to
/// explicit exponentials at each node.
pub const SPECTRAL_CONDITION_LIMIT: f64 = 1e8;
/// `℧(ad_x)` requires `‖ad_x‖ < MHO_MARGIN·2π`.
pub const MHO_MARGIN: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conjugation {
    /// Eigenbasis when well conditioned, otherwise exponentials.
    Auto,
    Spectral,
    Exponential,
}

#[derive(Debug, Clone)]
pub struct SuperopResult {
    pub value: CMat,
    /// `‖Q_n − Q_2n‖_F` for the quadrature forms, the series tail bound for ℧.
    pub error_estimate: f64,
    pub spectral: bool,
}

fn check_pair(x: &CMat, y: &CMat) -> Result<()> {
    let n = x.nrows();
    if x.ncols() != n || y.dim() != (n, n) {
        return Err(Error::Dimension(format!("superoperator on {:?} and {:?}", x.dim(), y.dim())));
    }
    Ok(())
}

struct Eigenbasis {
    d: Vec<C64>,
    v: CMat,
    v_inv: CMat,
}

fn eigenbasis(x: &CMat) -> Result<Option<Eigenbasis>> {
    let (d, v) = eigen(x)?;
    let v_inv = match inverse(&v) {
        Ok(m) => m,
        Err(_) => return Ok(None),
    };
    let cond = norm1(&v) * norm1(&v_inv);
    if !(cond <= SPECTRAL_CONDITION_LIMIT) {
        return Ok(None);
    }
    Ok(Some(Eigenbasis { d: d.to_vec(), v, v_inv }))
}

/// `Σ_k w_k e^{λ_k x} y e^{−λ_k x}` over the interval `[a, b]` mapped nodes,
/// evaluated at `nodes` and `2·nodes` points.
fn conjugation_average(
    x: &CMat,
    y: &CMat,
    a: f64,
    b: f64,
    nodes: usize,
    method: Conjugation,
) -> Result<SuperopResult> {
    check_pair(x, y)?;
    if nodes == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
    }
    let n = x.nrows();
    if n == 0 {
        return Ok(SuperopResult { value: y.clone(), error_estimate: 0.0, spectral: true });
    }
    let basis = match method {
        Conjugation::Exponential => None,
        Conjugation::Auto => eigenbasis(x)?,
        Conjugation::Spectral => Some(
            eigenbasis(x)?.ok_or(Error::IllConditioned { condition: f64::INFINITY, limit: SPECTRAL_CONDITION_LIMIT })?,
        ),
    };
    let scale = 1.0 / (b - a);
    let rule = |m: usize| -> Vec<(f64, f64)> {
        let (t, w) = gauss_legendre(m);
        t.iter().zip(&w).map(|(t, w)| (a + 0.5 * (b - a) * (t + 1.0), 0.5 * (b - a) * w * scale)).collect()
    };
    let (coarse, fine) = (rule(nodes), rule(2 * nodes));
    match basis {
        Some(eb) => {
            let yt = eb.v_inv.dot(y).dot(&eb.v);
            let weigh = |pts: &[(f64, f64)]| -> CMat {
                CMat::from_shape_fn((n, n), |(i, j)| {
                    let gap = eb.d[i] - eb.d[j];
                    let f: C64 = pts.iter().map(|(l, w)| (gap * *l).exp() * *w).sum();
                    f * yt[[i, j]]
                })
            };
            let lo = weigh(&coarse);
            let hi = weigh(&fine);
            let value = eb.v.dot(&lo).dot(&eb.v_inv);
            let err = fro(&eb.v.dot(&(&hi - &lo)).dot(&eb.v_inv));
            Ok(SuperopResult { value, error_estimate: err, spectral: true })
        }
        None => {
            let eval = |pts: &[(f64, f64)]| -> Result<CMat> {
                let mut acc = CMat::zeros((n, n));
                for (l, w) in pts {
                    let e = expm(&(x * c(*l)))?;
                    let einv = expm(&(x * c(-*l)))?;
                    acc.scaled_add(c(*w), &e.dot(y).dot(&einv));
                }
                Ok(acc)
            };
            let value = eval(&coarse)?;
            let err = fro(&(&eval(&fine)? - &value));
            Ok(SuperopResult { value, error_estimate: err, spectral: false })
        }
    }
}

/// `Υ(ad_x)(y) = ∫₀¹ e^{λx} y e^{−λx} dλ`.
pub fn ups_superop(x: &CMat, y: &CMat, nodes: usize) -> Result<SuperopResult> {
    conjugation_average(x, y, 0.0, 1.0, nodes, Conjugation::Auto)
}

/// `sinhc(ad_x)(y) = ½∫_{−1}^{1} e^{λx} y e^{−λx} dλ`.
pub fn sinhc_superop(x: &CMat, y: &CMat, nodes: usize) -> Result<SuperopResult> {
    conjugation_average(x, y, -1.0, 1.0, nodes, Conjugation::Auto)
}

pub fn ups_superop_with(x: &CMat, y: &CMat, nodes: usize, method: Conjugation) -> Result<SuperopResult> {
    conjugation_average(x, y, 0.0, 1.0, nodes, method)
}

pub fn sinhc_superop_with(x: &CMat, y: &CMat, nodes: usize, method: Conjugation) -> Result<SuperopResult> {
    conjugation_average(x, y, -1.0, 1.0, nodes, method)
}

/// Bound on the induced norm of `ad_x`: `‖ad_x‖ ≤ 2‖x‖₂ ≤ 2√(‖x‖₁‖x‖∞)`.
pub fn ad_bound(x: &CMat) -> f64 {
    2.0 * (norm1(x) * norm_inf(x)).sqrt()
}

/// Truncated Bernoulli series `Σ_{k≤order} (b_k/k!) ad_xᵏ(y)`.
pub fn mho_superop(x: &CMat, y: &CMat, order: usize) -> Result<SuperopResult> {
    check_pair(x, y)?;
    if order < 1 {
        return Err(Error::InvalidArgument("Bernoulli order must be at least 1".into()));
    }
    let bound = ad_bound(x);
    let limit = MHO_MARGIN * 2.0 * PI;
    if bound >= limit {
        return Err(Error::SeriesBound { bound, limit, node: None });
    }
    let beta = bernoulli_over_factorial(order + 1);
    let mut acc = y.clone();
    let mut term = y.clone();
    for (k, b) in beta.iter().enumerate().skip(1) {
        term = commutator(x, &term);
        if *b != 0.0 {
            acc.scaled_add(c(*b), &term);
        }
        if k == order {
            break;
        }
    }
    // |b_k/k!| ≤ 2(2π)^{−k} for k ≥ 2
    let q = bound / (2.0 * PI);
    let tail = 2.0 * fro(y) * q.powi(order as i32 + 1) / (1.0 - q);
    Ok(SuperopResult { value: acc, error_estimate: tail, spectral: false })
}

#[derive(Debug, Clone, Copy)]
pub struct MagnusReport {
    /// `max_k ‖D_h e^{Φ} − Υ(ad_Φ)(Φ̇) e^{Φ}‖ / ‖e^{Φ}‖`
    pub left_residual: f64,
    /// `max_k ‖D_h e^{Φ} − e^{Φ} Υ(−ad_Φ)(Φ̇)‖ / ‖e^{Φ}‖`
    pub right_residual: f64,
}

/// Compares central differences of `t ↦ exp(Φ(t))` with both forms of the
/// exponential-derivative formula at interior samples.
pub fn magnus_derivative_check(path: &[CMat], h: f64) -> Result<MagnusReport> {
    if path.len() < 3 {
        return Err(Error::InvalidArgument(format!("path needs ≥ 3 samples, got {}", path.len())));
    }
    let exps: Vec<CMat> = path.iter().map(expm).collect::<Result<_>>()?;
    let mut left = 0.0f64;
    let mut right = 0.0f64;
    for k in 1..path.len() - 1 {
        let dphi = (&path[k + 1] - &path[k - 1]) * c(0.5 / h);
        let dexp = (&exps[k + 1] - &exps[k - 1]) * c(0.5 / h);
        let scale = fro(&exps[k]).max(1.0);
        let l = ups_superop(&path[k], &dphi, DEFAULT_NODES)?.value.dot(&exps[k]);
        let r = exps[k].dot(&ups_superop(&(-&path[k]), &dphi, DEFAULT_NODES)?.value);
        left = left.max(fro(&(&dexp - &l)) / scale);
        right = right.max(fro(&(&dexp - &r)) / scale);
    }
    Ok(MagnusReport { left_residual: left, right_residual: right })
}

/// Closed-form `Υ(ad_x)(y)` from an eigendecomposition; test oracle.
pub fn ups_superop_spectral_closed_form(x: &CMat, y: &CMat) -> Result<CMat> {
    let eb = eigenbasis(x)?.ok_or(Error::IllConditioned { condition: f64::INFINITY, limit: SPECTRAL_CONDITION_LIMIT })?;
    let yt = eb.v_inv.dot(y).dot(&eb.v);
    let n = x.nrows();
    let z = CMat::from_shape_fn((n, n), |(i, j)| ups_scalar(eb.d[i] - eb.d[j]) * yt[[i, j]]);
    Ok(eb.v.dot(&z).dot(&eb.v_inv))
}
