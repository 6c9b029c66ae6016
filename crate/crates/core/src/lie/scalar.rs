//! Scalar generating functions `Υ(z) = (e^z − 1)/z`, `℧ = 1/Υ` and
//! `sinhc(z) = sinh(z)/z`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Below this modulus the functions switch to their Taylor polynomials.
pub const SERIES_RADIUS: f64 = 1e-3;

/// `e^z − 1` without cancellation near `z = 0`.
pub fn expm1_complex(z: C64) -> C64 {
    let (x, y) = (z.re, z.im);
    let half = (0.5 * y).sin();
    let re = x.exp_m1() * y.cos() - 2.0 * half * half;
    let im = x.exp() * y.sin();
    C64::new(re, im)
}

pub fn ups_scalar(z: C64) -> C64 {
    if z.norm() < SERIES_RADIUS {
        // Σ_{k<8} z^k/(k+1)!
        let mut sum = C64::new(0.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for k in 0..8 {
            sum += term;
            term = term * z / (k as f64 + 2.0);
        }
        return sum;
    }
    expm1_complex(z) / z
}

pub fn sinhc_scalar(z: C64) -> C64 {
    if z.norm() < SERIES_RADIUS {
        let z2 = z * z;
        let mut sum = C64::new(0.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for k in 0..8 {
            sum += term;
            term = term * z2 / ((2 * k + 2) as f64 * (2 * k + 3) as f64);
        }
        return sum;
    }
    z.sinh() / z
}

/// `℧(z) = z/(e^z − 1)` on `|z| < 2π`; the nearest poles are `±2πi`.
pub fn mho_scalar(z: C64) -> Result<C64> {
    let r = z.norm();
    if r >= 2.0 * PI {
        return Err(Error::SeriesBound { bound: r, limit: 2.0 * PI, node: None });
    }
    if r < SERIES_RADIUS {
        let b = bernoulli_over_factorial(8);
        let mut sum = C64::new(0.0, 0.0);
        let mut pow = C64::new(1.0, 0.0);
        for bk in b {
            sum += pow * bk;
            pow *= z;
        }
        return Ok(sum);
    }
    Ok(z / expm1_complex(z))
}

/// `b_k/k!` for `k = 0..len`, where `Σ b_k z^k/k! = z/(e^z − 1)` (so `b₁ = −½`).
pub fn bernoulli_over_factorial(len: usize) -> Vec<f64> {
    // Σ_{j≤m} β_j/(m+1−j)! = 0 for m ≥ 1
    let mut inv_fact = vec![1.0; len + 2];
    for k in 1..len + 2 {
        inv_fact[k] = inv_fact[k - 1] / k as f64;
    }
    let mut beta = Vec::with_capacity(len);
    for m in 0..len {
        if m == 0 {
            beta.push(1.0);
            continue;
        }
        if m > 1 && m % 2 == 1 {
            beta.push(0.0);
            continue;
        }
        let s: f64 = (0..m).map(|j| beta[j] * inv_fact[m + 1 - j]).sum();
        beta.push(-s);
    }
    beta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_origin() {
        let zero = C64::new(0.0, 0.0);
        assert_eq!(ups_scalar(zero), C64::new(1.0, 0.0));
        assert_eq!(sinhc_scalar(zero), C64::new(1.0, 0.0));
        assert_eq!(mho_scalar(zero).unwrap(), C64::new(1.0, 0.0));
    }

    #[test]
    fn bernoulli_leading_terms() {
        let b = bernoulli_over_factorial(7);
        assert_eq!(b[0], 1.0);
        assert_eq!(b[1], -0.5);
        assert!((b[2] - 1.0 / 12.0).abs() < 1e-16);
        assert_eq!(b[3], 0.0);
        assert!((b[4] * 720.0 + 1.0).abs() < 1e-14);
        assert!((b[6] * 30240.0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn switch_is_continuous() {
        for arg in [0.0, 1.0, 2.5, -2.0] {
            let dir = C64::from_polar(1.0, arg);
            let lo = dir * (SERIES_RADIUS * (1.0 - 1e-12));
            let hi = dir * (SERIES_RADIUS * (1.0 + 1e-12));
            assert!((ups_scalar(lo) - ups_scalar(hi)).norm() < 1e-14);
            assert!((sinhc_scalar(lo) - sinhc_scalar(hi)).norm() < 1e-14);
            assert!((mho_scalar(lo).unwrap() - mho_scalar(hi).unwrap()).norm() < 1e-14);
        }
    }

    #[test]
    fn mho_rejects_pole_disc() {
        assert!(mho_scalar(C64::new(0.0, 2.0 * PI)).is_err());
        assert!(mho_scalar(C64::new(7.0, 0.0)).is_err());
    }

    #[test]
    fn expm1_small_arguments() {
        let z = C64::new(1e-12, -2e-12);
        let e = expm1_complex(z);
        assert!((e - z).norm() < 1e-23);
    }
}
