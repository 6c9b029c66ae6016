//! Open quantum harmonic oscillator data, its two-point CCR matrix and the
//! two-sided Laplace transform of that matrix.

use ndarray_linalg::SVD;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{expm, fro, identity, inverse, real_eigenvalues, to_complex, CMat, RMat, C64};
use crate::quad::adaptive_gk_split;

pub const HURWITZ_MARGIN: f64 = 1e-10;
const SINGULAR_THETA_CONDITION: f64 = 1e12;

/// `[[0, I], [-I, 0]]` of order `m`.
pub fn canonical_j(m: usize) -> RMat {
    let h = m / 2;
    let mut j = RMat::zeros((m, m));
    for k in 0..h {
        j[[k, h + k]] = 1.0;
        j[[h + k, k]] = -1.0;
    }
    j
}

/// Direct sum of `[[0, 1], [-1, 0]]` blocks of order `n`.
pub fn canonical_theta(n: usize) -> RMat {
    let mut t = RMat::zeros((n, n));
    for k in 0..n / 2 {
        t[[2 * k, 2 * k + 1]] = 1.0;
        t[[2 * k + 1, 2 * k]] = -1.0;
    }
    t
}

/// `‖AΘ + ΘAᵀ + BJBᵀ‖_F`.
pub fn pr_residual(theta: &RMat, drift: &RMat, dispersion: &RMat, jmat: &RMat) -> f64 {
    let lhs = drift.dot(theta) + theta.dot(&drift.t()) + dispersion.dot(jmat).dot(&dispersion.t());
    fro(&lhs)
}

fn antisymmetry_residual(a: &RMat) -> f64 {
    fro(&(a + &a.t()))
}

fn condition_number(a: &RMat) -> Result<f64> {
    let (_, sv, _) = a.svd(false, false)?;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

#[derive(Debug, Clone)]
pub struct OqhoModel {
    n: usize,
    m: usize,
    theta: RMat,
    jmat: RMat,
    energy: RMat,
    coupling: RMat,
    drift: RMat,
    dispersion: RMat,
    theta_condition: f64,
    abscissa: f64,
    eigenvalues: Vec<C64>,
}

impl OqhoModel {
    /// `A = 2Θ(K + MᵀJM)`, `B = 2ΘMᵀ`; the PR identity holds by construction.
    pub fn from_energy_coupling(theta: &RMat, energy: &RMat, coupling: &RMat) -> Result<Self> {
        let n = theta.nrows();
        check_theta(theta)?;
        if energy.dim() != (n, n) {
            return Err(Error::Dimension(format!("energy must be {n}x{n}, got {:?}", energy.dim())));
        }
        let sym = fro(&(energy - &energy.t()));
        if sym > 1e-12 * (1.0 + fro(energy)) {
            return Err(Error::NotSymmetric { residual: sym });
        }
        let m = coupling.nrows();
        if coupling.ncols() != n || m == 0 || m % 2 != 0 {
            return Err(Error::Dimension(format!(
                "coupling must be m x {n} with m even and positive, got {:?}",
                coupling.dim()
            )));
        }
        let jmat = canonical_j(m);
        let energy = (energy + &energy.t()) * 0.5;
        let drift = 2.0 * theta.dot(&(&energy + &coupling.t().dot(&jmat).dot(coupling)));
        let dispersion = 2.0 * theta.dot(&coupling.t());
        Self::assemble(theta.clone(), jmat, energy, coupling.clone(), drift, dispersion)
    }

    /// Builds a model from `(A, B)` directly. Without `pr_override` the PR
    /// identity must hold within [`OqhoModel::pr_tolerance`].
    pub fn from_drift_dispersion(
        theta: &RMat,
        drift: &RMat,
        dispersion: &RMat,
        pr_override: bool,
    ) -> Result<Self> {
        let n = theta.nrows();
        check_theta(theta)?;
        if drift.dim() != (n, n) || dispersion.nrows() != n {
            return Err(Error::Dimension("drift must be n x n and dispersion n x m".into()));
        }
        let m = dispersion.ncols();
        if m == 0 || m % 2 != 0 {
            return Err(Error::Dimension(format!("field dimension m = {m} must be even and positive")));
        }
        let jmat = canonical_j(m);
        if !pr_override {
            let residual = pr_residual(theta, drift, dispersion, &jmat);
            let tolerance = pr_tolerance(theta, drift, dispersion);
            if residual > tolerance {
                return Err(Error::PhysicalRealizability { residual, tolerance });
            }
        }
        // invert the parameterization: Mᵀ = ½Θ⁻¹B, K = ½Θ⁻¹A − MᵀJM
        let theta_inv = inverse(theta)?;
        let coupling = 0.5 * theta_inv.dot(dispersion).t().to_owned();
        let energy = 0.5 * theta_inv.dot(drift) - coupling.t().dot(&jmat).dot(&coupling);
        Self::assemble(theta.clone(), jmat, energy, coupling, drift.clone(), dispersion.clone())
    }

    fn assemble(
        theta: RMat,
        jmat: RMat,
        energy: RMat,
        coupling: RMat,
        drift: RMat,
        dispersion: RMat,
    ) -> Result<Self> {
        let n = theta.nrows();
        let m = jmat.nrows();
        let theta_condition = condition_number(&theta)?;
        let eigenvalues = real_eigenvalues(&drift)?.to_vec();
        let abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if abscissa > -HURWITZ_MARGIN {
            return Err(Error::NotHurwitz {
                abscissa,
                eigenvalues: eigenvalues.iter().map(|z| (z.re, z.im)).collect(),
            });
        }
        Ok(Self {
            n,
            m,
            theta,
            jmat,
            energy,
            coupling,
            drift,
            dispersion,
            theta_condition,
            abscissa,
            eigenvalues,
        })
    }

    /// Uniform entries on `[-1, 1]` for `Θ` (antisymmetrized), `K`
    /// (symmetrized) and `M`, redrawn until the drift is Hurwitz.
    pub fn random<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Self> {
        for _ in 0..10_000 {
            let raw = RMat::from_shape_fn((n, n), |_| rng.random_range(-1.0..=1.0));
            let theta = (&raw - &raw.t()) * 0.5;
            let raw = RMat::from_shape_fn((n, n), |_| rng.random_range(-1.0..=1.0));
            let energy = (&raw + &raw.t()) * 0.5;
            let coupling = RMat::from_shape_fn((m, n), |_| rng.random_range(-1.0..=1.0));
            if condition_number(&theta)? > 1e6 {
                continue;
            }
            match Self::from_energy_coupling(&theta, &energy, &coupling) {
                Ok(model) => return Ok(model),
                Err(Error::NotHurwitz { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::NoConvergence("no Hurwitz draw in 10000 attempts".into()))
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn theta(&self) -> &RMat {
        &self.theta
    }
    pub fn jmat(&self) -> &RMat {
        &self.jmat
    }
    pub fn energy(&self) -> &RMat {
        &self.energy
    }
    pub fn coupling(&self) -> &RMat {
        &self.coupling
    }
    pub fn drift(&self) -> &RMat {
        &self.drift
    }
    pub fn dispersion(&self) -> &RMat {
        &self.dispersion
    }
    pub fn theta_condition(&self) -> f64 {
        self.theta_condition
    }
    pub fn drift_eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    /// `max Re λ(A)`, negative by construction.
    pub fn spectral_abscissa(&self) -> f64 {
        self.abscissa
    }

    /// Width of the Laplace convergence strip, `|max Re λ(A)|`.
    pub fn strip_width(&self) -> f64 {
        -self.abscissa
    }

    /// `BJBᵀ`.
    pub fn diffusion(&self) -> RMat {
        self.dispersion.dot(&self.jmat).dot(&self.dispersion.t())
    }

    pub fn check_pr(&self) -> f64 {
        pr_residual(&self.theta, &self.drift, &self.dispersion, &self.jmat)
    }

    pub fn pr_tolerance(&self) -> f64 {
        pr_tolerance(&self.theta, &self.drift, &self.dispersion)
    }

    /// `Λ(τ) = e^{τA}Θ` for `τ ≥ 0`, `Θe^{−τAᵀ}` for `τ < 0`.
    pub fn ccr_two_point(&self, tau: f64) -> RMat {
        ccr_two_point_raw(&self.theta, &self.drift, tau)
    }

    /// `Λ̂(s) = −(sI − A)⁻¹ BJBᵀ (sI + Aᵀ)⁻¹` on the strip `0 < Re s < |abscissa|`.
    pub fn laplace_lambda(&self, s: C64) -> Result<LaplacePoint> {
        let width = self.strip_width();
        let margin = s.re.min(width - s.re);
        if !(margin > 0.0) {
            return Err(Error::OutsideStrip { re: s.re, im: s.im, bound: width });
        }
        let n = self.n;
        let eye = identity::<C64>(n);
        let a = to_complex(&self.drift);
        let left = &eye * s - &a;
        let right = &eye * s + &a.t();
        let left_inv = inverse(&left)?;
        let right_inv = inverse(&right)?;
        let value = -left_inv.dot(&to_complex(&self.diffusion())).dot(&right_inv);
        if !value.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Singular(format!("resolvent singular at s = {s}")));
        }
        Ok(LaplacePoint { s, value, strip_margin: margin })
    }

    /// Adaptive quadrature of `∫_ℝ e^{−st}Λ(t) dt` to error `tol` relative to
    /// the envelope `‖Θ‖(1/(w + Re s) + 1/(w − Re s))`, `w` the strip width.
    /// Returns the value and an absolute error estimate.
    pub fn laplace_lambda_quadrature(&self, s: C64, tol: f64) -> Result<(CMat, f64)> {
        let width = self.strip_width();
        if !(s.re > 0.0 && s.re < width) {
            return Err(Error::OutsideStrip { re: s.re, im: s.im, bound: width });
        }
        let theta = self.theta.clone();
        let a = self.drift.clone();
        let at = self.drift.t().to_owned();
        let mut budget = 500_000usize;
        let tol = tol * fro(&theta) * (1.0 / (width + s.re) + 1.0 / (width - s.re));
        let omega = s.im.abs() + self.eigenvalues.iter().map(|l| l.im.abs()).fold(0.0, f64::max);
        // right tail decays like e^{(abscissa − Re s)t}, left like e^{(abscissa + Re s)t}
        let right = integrate_tail(
            &mut |t| (to_complex(&expm(&(&a * t)).unwrap().dot(&theta))) * (-s * t).exp(),
            width + s.re,
            omega,
            tol,
            &mut budget,
        )?;
        let left = integrate_tail(
            &mut |t| (to_complex(&theta.dot(&expm(&(&at * t)).unwrap()))) * (s * t).exp(),
            width - s.re,
            omega,
            tol,
            &mut budget,
        )?;
        Ok((&right.0 + &left.0, right.1 + left.1))
    }
}

fn pr_tolerance(theta: &RMat, drift: &RMat, dispersion: &RMat) -> f64 {
    1e-12 * (1.0 + fro(drift) * fro(theta) + fro(dispersion).powi(2))
}

fn check_theta(theta: &RMat) -> Result<()> {
    let n = theta.nrows();
    if theta.ncols() != n || n == 0 || n % 2 != 0 {
        return Err(Error::Dimension(format!(
            "theta must be square of even positive order, got {:?}",
            theta.dim()
        )));
    }
    let residual = antisymmetry_residual(theta);
    if residual > 1e-14 * (1.0 + fro(theta)) {
        return Err(Error::NotAntisymmetric { residual });
    }
    let condition = condition_number(theta)?;
    if !(condition < SINGULAR_THETA_CONDITION) {
        return Err(Error::SingularTheta { condition });
    }
    Ok(())
}

pub(crate) fn ccr_two_point_raw(theta: &RMat, drift: &RMat, tau: f64) -> RMat {
    if tau >= 0.0 {
        expm(&(drift * tau)).expect("finite drift").dot(theta)
    } else {
        theta.dot(&expm(&(drift.t().to_owned() * (-tau))).expect("finite drift"))
    }
}

/// `∫₀^∞ f` on consecutive panels of length `1/decay`, stopping once the
/// panel integrand has fallen below `tol`. Panels start split into half
/// periods of the angular frequency `omega`.
fn integrate_tail<F: FnMut(f64) -> CMat>(
    f: &mut F,
    decay: f64,
    omega: f64,
    tol: f64,
    budget: &mut usize,
) -> Result<(CMat, f64)> {
    let panel = 1.0 / decay.max(1e-3);
    let pieces = (panel * omega / std::f64::consts::PI).ceil().max(1.0) as usize;
    let mut total: Option<CMat> = None;
    let mut err = 0.0;
    let mut lo = 0.0;
    for _ in 0..10_000 {
        let hi = lo + panel;
        let (v, e) = adaptive_gk_split(f, lo, hi, pieces, tol * 0.05, budget)?;
        err += e;
        total = Some(match total {
            Some(t) => t + &v,
            None => v,
        });
        let tail_norm = fro(&f(hi));
        lo = hi;
        // remaining integral ≤ tail_norm / decay for the exponential envelope
        if tail_norm / decay.max(1e-3) < tol * 0.05 {
            err += tail_norm / decay.max(1e-3);
            return Ok((total.unwrap(), err));
        }
    }
    Err(Error::NoConvergence("Laplace tail did not decay".into()))
}

#[derive(Debug, Clone)]
pub struct LaplacePoint {
    pub s: C64,
    pub value: CMat,
    /// Distance of `Re s` from the nearer strip boundary.
    pub strip_margin: f64,
}

pub fn build_from_energy_coupling(theta: &RMat, energy: &RMat, coupling: &RMat) -> Result<OqhoModel> {
    OqhoModel::from_energy_coupling(theta, energy, coupling)
}

pub fn check_pr(model: &OqhoModel) -> f64 {
    model.check_pr()
}

pub fn ccr_two_point(model: &OqhoModel, tau: f64) -> RMat {
    model.ccr_two_point(tau)
}

pub fn laplace_lambda(model: &OqhoModel, s: C64) -> Result<LaplacePoint> {
    model.laplace_lambda(s)
}

pub fn laplace_lambda_quadrature(model: &OqhoModel, s: C64, tol: f64) -> Result<(CMat, f64)> {
    model.laplace_lambda_quadrature(s, tol)
}

pub fn spectral_abscissa(model: &OqhoModel) -> f64 {
    model.spectral_abscissa()
}

/// A lossy single mode (`n = m = 2`): `Θ = J`, `K = k·I`, `M = μ·I`.
pub fn damped_mode(energy: f64, coupling: f64) -> Result<OqhoModel> {
    let theta = canonical_theta(2);
    OqhoModel::from_energy_coupling(&theta, &(identity::<f64>(2) * energy), &(identity::<f64>(2) * coupling))
}
