//! Quadrature rules: fixed Gauss–Legendre and adaptive Gauss–Kronrod for
//! matrix-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{fro, CMat, C64};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7–K15 panel: returns (Kronrod estimate, |K − G| error estimate).
fn gk15<F: FnMut(f64) -> CMat>(f: &mut F, a: f64, b: f64) -> (CMat, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = &fc * WGK[7];
    let mut gauss = &fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let sum = &f1 + &f2;
        kron.scaled_add(C64::new(WGK[j], 0.0), &sum);
        if j % 2 == 1 {
            gauss.scaled_add(C64::new(WG[j / 2], 0.0), &sum);
        }
    }
    kron.mapv_inplace(|x| x * half);
    gauss.mapv_inplace(|x| x * half);
    let err = fro(&(&kron - &gauss));
    (kron, err)
}

struct Panel {
    lo: f64,
    hi: f64,
    val: CMat,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
/// Largest error first; ties broken by position so the order is total.
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err).then(other.lo.total_cmp(&self.lo))
    }
}

/// Whether bisecting further cannot lower the panel's error estimate.
fn at_noise_floor(p: &Panel) -> bool {
    p.err <= 50.0 * f64::EPSILON * fro(&p.val) || (p.hi - p.lo) < 1e-12 * (1.0 + p.lo.abs())
}

/// Globally adaptive G7–K15: bisects the panel with the largest error estimate
/// until the summed estimate is below `tol`. `budget` counts panel evaluations.
pub fn adaptive_gk<F: FnMut(f64) -> CMat>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    budget: &mut usize,
) -> Result<(CMat, f64)> {
    adaptive_gk_split(f, a, b, 1, tol, budget)
}

/// [`adaptive_gk`] started from `pieces` equal panels. Oscillatory integrands
/// need pieces no longer than a half period, or the G7 and K15 estimates can
/// agree on an aliased value.
pub fn adaptive_gk_split<F: FnMut(f64) -> CMat>(
    f: &mut F,
    a: f64,
    b: f64,
    pieces: usize,
    tol: f64,
    budget: &mut usize,
) -> Result<(CMat, f64)> {
    let mut eval = |lo: f64, hi: f64, budget: &mut usize| -> Result<Panel> {
        if *budget == 0 {
            return Err(Error::NoConvergence(format!(
                "adaptive quadrature budget exhausted on [{lo}, {hi}]"
            )));
        }
        *budget -= 1;
        let (val, err) = gk15(f, lo, hi);
        Ok(Panel { lo, hi, val, err })
    };
    let pieces = pieces.max(1);
    let width = (b - a) / pieces as f64;
    let mut live = BinaryHeap::with_capacity(pieces);
    let mut err = 0.0;
    for k in 0..pieces {
        let hi = if k + 1 == pieces { b } else { a + width * (k + 1) as f64 };
        let p = eval(a + width * k as f64, hi, budget)?;
        err += p.err;
        live.push(p);
    }
    // panels at the noise floor are retired; the rest are split worst first
    let mut retired: Vec<Panel> = Vec::new();
    while err > tol {
        let Some(p) = live.pop() else {
            return Err(Error::NoConvergence(format!(
                "quadrature cannot reach tolerance {tol:.3e} on [{a}, {b}], estimate {err:.3e}"
            )));
        };
        if at_noise_floor(&p) {
            retired.push(p);
            continue;
        }
        let mid = 0.5 * (p.lo + p.hi);
        let (l, r) = (eval(p.lo, mid, budget)?, eval(mid, p.hi, budget)?);
        err += l.err + r.err - p.err;
        live.push(l);
        live.push(r);
    }
    // left-to-right summation, independent of the split history
    let mut panels: Vec<Panel> = live.into_vec().into_iter().chain(retired).collect();
    panels.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    let err = panels.iter().map(|p| p.err).sum();
    let mut total = panels[0].val.clone();
    for p in &panels[1..] {
        total += &p.val;
    }
    Ok((total, err))
}
