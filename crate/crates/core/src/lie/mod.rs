//! Exponential and logarithm calculus on complex Hamiltonian kernels.
//!
//! A kernel generated by a measure with support index `u` has nonzero
//! columns only among the first `L = n(u+1)`. Its exponential is the
//! identity outside those columns, so a [`CskMatrix`] stores the `D×L`
//! column panel and all operations stay on that panel.

pub mod scalar;
pub mod superop;

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{s, Array2};
use ndarray_linalg::SVD;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{
    c, eigen, eigenvalues, expm_phi1, fro, identity, inverse, logm, norm1, spectral_bound, ColumnExp, CMat, RMat, C64,
    I,
};
use crate::measure::{lambda_product, CcrKernel, ChkMatrix, KernelMeasure};

/// `exp` refuses arguments with `‖·‖₁` above this bound.
pub const EXP_SAFETY_BOUND: f64 = 50.0;
/// Relative reconstruction tolerance `‖exp(log S) − S‖ / ‖S‖`.
pub const LOG_RECONSTRUCTION_TOL: f64 = 1e-9;
/// Relative residual above which a measure counts as not recoverable.
pub const RECOVERY_TOL: f64 = 1e-6;
pub const SYMPLECTIC_TOL: f64 = 1e-10;

/// Complex symplectic kernel, identity outside its first `n(support+1)` columns.
#[derive(Debug, Clone)]
pub struct CskMatrix {
    ccr: Arc<CcrKernel>,
    support: usize,
    cols: CMat,
}

impl CskMatrix {
    pub fn identity(ccr: Arc<CcrKernel>) -> Self {
        let n = ccr.n();
        let cols = identity::<C64>(ccr.dim()).slice(s![.., ..n]).to_owned();
        Self { ccr, support: 0, cols }
    }

    pub fn from_cols(ccr: Arc<CcrKernel>, support: usize, cols: CMat) -> Result<Self> {
        if cols.dim() != (ccr.dim(), ccr.n() * (support + 1)) {
            return Err(Error::Dimension(format!("CSK panel {:?} does not match support {support}", cols.dim())));
        }
        Ok(Self { ccr, support, cols })
    }

    pub fn from_dense(ccr: Arc<CcrKernel>, mat: &CMat) -> Result<Self> {
        let dim = ccr.dim();
        if mat.dim() != (dim, dim) {
            return Err(Error::Dimension(format!("CSK must be {dim}x{dim}, got {:?}", mat.dim())));
        }
        let n = ccr.n();
        let eye = identity::<C64>(dim);
        let mut support = 0;
        for j in (0..ccr.grid().len()).rev() {
            let blk = s![.., j * n..(j + 1) * n];
            if mat.slice(blk) != eye.slice(blk) {
                support = j;
                break;
            }
        }
        let l = n * (support + 1);
        Self::from_cols(ccr, support, mat.slice(s![.., ..l]).to_owned())
    }

    pub fn ccr(&self) -> &Arc<CcrKernel> {
        &self.ccr
    }
    pub fn grid(&self) -> &TimeGrid {
        self.ccr.grid()
    }
    pub fn support_index(&self) -> usize {
        self.support
    }
    pub fn cols(&self) -> &CMat {
        &self.cols
    }
    pub fn dim(&self) -> usize {
        self.cols.nrows()
    }

    /// Column panel widened to support `u` with identity columns.
    pub fn cols_padded(&self, u: usize) -> CMat {
        let n = self.ccr.n();
        let l = n * (u + 1);
        let own = self.cols.ncols();
        if l <= own {
            return self.cols.clone();
        }
        let mut out = CMat::zeros((self.dim(), l));
        out.slice_mut(s![.., ..own]).assign(&self.cols);
        for k in own..l {
            out[[k, k]] = c(1.0);
        }
        out
    }

    pub fn padded(&self, u: usize) -> Self {
        let u = u.max(self.support);
        Self { ccr: self.ccr.clone(), support: u, cols: self.cols_padded(u) }
    }

    /// Leading `n(u+1)` square block, `u ≥ support`.
    pub fn lead(&self, u: usize) -> CMat {
        let l = self.ccr.n() * (u + 1);
        self.cols_padded(u).slice(s![..l, ..l]).to_owned()
    }

    pub fn mat(&self) -> CMat {
        let mut out = identity::<C64>(self.dim());
        out.slice_mut(s![.., ..self.cols.ncols()]).assign(&self.cols);
        out
    }

    /// `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        let u = self.support.max(other.support);
        let a = self.cols_padded(u);
        let b = other.cols_padded(u);
        let l = a.ncols();
        let mut out = a.dot(&b.slice(s![..l, ..]));
        {
            let mut lower = out.slice_mut(s![l.., ..]);
            lower += &b.slice(s![l.., ..]);
        }
        Self { ccr: self.ccr.clone(), support: u, cols: out }
    }

    /// `self⁻¹`, using `[[A, 0], [B, I]]⁻¹ = [[A⁻¹, 0], [−BA⁻¹, I]]`.
    pub fn inverse(&self) -> Result<Self> {
        Ok(Self { cols: panel_inverse(&self.cols)?, ..self.clone() })
    }

    pub fn conj(&self) -> Self {
        Self { cols: self.cols.mapv(|z| z.conj()), ..self.clone() }
    }

    /// `‖SΛSᵀ − Λ‖_F`.
    pub fn symplectic_residual(&self) -> f64 {
        let s_full = self.mat();
        let lam = self.ccr.big_complex();
        fro(&(s_full.dot(lam).dot(&s_full.t()) - lam))
    }

    /// `tol·(1 + ‖Λ‖_F‖S‖²_F)`.
    pub fn symplectic_tolerance(&self, tol: f64) -> f64 {
        let s_norm = fro(&self.mat());
        tol * (1.0 + fro(self.ccr.big()) * s_norm * s_norm)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let u = self.support.max(other.support);
        fro(&(self.cols_padded(u) - other.cols_padded(u)))
    }
}

pub(crate) fn panel_inverse(cols: &CMat) -> Result<CMat> {
    let l = cols.ncols();
    let a_inv = inverse(&cols.slice(s![..l, ..]).to_owned())?;
    let lower = -cols.slice(s![l.., ..]).dot(&a_inv);
    let mut out = CMat::zeros(cols.dim());
    out.slice_mut(s![..l, ..]).assign(&a_inv);
    out.slice_mut(s![l.., ..]).assign(&lower);
    Ok(out)
}

/// `exp(scale·ham)` as a column panel.
pub(crate) fn exp_panel(x: &CMat) -> Result<CMat> {
    let norm = norm1(x);
    if !(norm <= EXP_SAFETY_BOUND) {
        return Err(Error::ExponentialOverflow { norm, bound: EXP_SAFETY_BOUND });
    }
    let ce = ColumnExp::new(x.view(), 0)?;
    let mut out = ce.update;
    for k in 0..out.ncols() {
        out[[k, k]] += c(1.0);
    }
    Ok(out)
}

/// `exp(scale·ham)`. When `ham` carries its generating measure the
/// symplectic identity `SΛSᵀ = Λ` is checked against [`SYMPLECTIC_TOL`].
pub fn chk_exp(h: &ChkMatrix, scale: C64, ccr: &Arc<CcrKernel>) -> Result<CskMatrix> {
    h.grid().ensure_same(ccr.grid())?;
    let x = h.cols() * scale;
    let cols = exp_panel(&x)?;
    let s = CskMatrix { ccr: ccr.clone(), support: h.support_index(), cols };
    if h.source().is_some() {
        let residual = s.symplectic_residual();
        let tolerance = s.symplectic_tolerance(SYMPLECTIC_TOL);
        if residual > tolerance {
            return Err(Error::Reconstruction { residual, tolerance });
        }
    }
    Ok(s)
}

/// Eigenvalues within this angle of the negative real axis are treated as on it.
const BRANCH_ANGLE: f64 = 1e-8;

/// Principal logarithm of a square matrix, moved to the sheet nearest
/// `anchor` when one is given.
pub fn log_anchored(t: &CMat, anchor: Option<&CMat>) -> Result<CMat> {
    log_anchored_flagged(t, anchor).map(|(h, _)| h)
}

/// As [`log_anchored`], also reporting whether a non-principal sheet was chosen.
pub(crate) fn log_anchored_flagged(t: &CMat, anchor: Option<&CMat>) -> Result<(CMat, bool)> {
    let eigs = eigenvalues(t)?;
    let on_cut = eigs.iter().find(|z| z.arg().abs() > PI - BRANCH_ANGLE || z.norm() == 0.0);
    match (anchor, on_cut) {
        (None, Some(z)) => Err(Error::BranchAmbiguity { re: z.re, im: z.im }),
        (None, None) => Ok((logm(t)?, false)),
        (Some(a), cut) => {
            if cut.is_none() {
                let h = logm(t)?;
                if spectral_bound(&(&h - a)) < PI {
                    return Ok((h, false));
                }
            }
            // per-eigenvalue sheet selection in the eigenbasis of t
            let (d, v) = eigen(t)?;
            let v_inv = inverse(&v)?;
            let at = v_inv.dot(a).dot(&v);
            let mu: Vec<C64> = d
                .iter()
                .enumerate()
                .map(|(i, z)| {
                    let p = z.ln();
                    let k = ((at[[i, i]] - p).im / (2.0 * PI)).round();
                    p + I * (2.0 * PI * k)
                })
                .collect();
            let h = v.dot(&Array2::from_diag(&ndarray::Array1::from(mu))).dot(&v_inv);
            let distance = spectral_bound(&(&h - a));
            if distance >= PI {
                return Err(Error::BranchCrossing { distance });
            }
            Ok((h, true))
        }
    }
}

/// Logarithm of a column panel `[[T₁₁, 0], [T₂₁, I]]`:
/// `H₁₁ = log T₁₁`, `H₂₁ = T₂₁ φ₁(H₁₁)⁻¹`. Returns the panel and the
/// relative reconstruction residual of the leading block.
pub(crate) fn log_panel(cols: &CMat, anchor: Option<&CMat>, full_rows: bool) -> Result<LogPanel> {
    let l = cols.ncols();
    let t11 = cols.slice(s![..l, ..]).to_owned();
    let anchor11 = anchor.map(|a| a.slice(s![..l, ..]).to_owned());
    let (h11, switched_sheet) = log_anchored_flagged(&t11, anchor11.as_ref())?;
    let (e, phi) = expm_phi1(&h11)?;
    let residual = fro(&(&e - &t11)) / fro(&t11);
    if !(residual <= LOG_RECONSTRUCTION_TOL) {
        return Err(Error::Reconstruction { residual, tolerance: LOG_RECONSTRUCTION_TOL });
    }
    let rows = if full_rows { cols.nrows() } else { l };
    let mut out = CMat::zeros((rows, l));
    out.slice_mut(s![..l, ..]).assign(&h11);
    if full_rows && cols.nrows() > l {
        let h21 = cols.slice(s![l.., ..]).dot(&inverse(&phi)?);
        out.slice_mut(s![l.., ..]).assign(&h21);
    }
    Ok(LogPanel { cols: out, residual, switched_sheet })
}

pub(crate) struct LogPanel {
    pub cols: CMat,
    pub residual: f64,
    pub switched_sheet: bool,
}

/// Matrix logarithm of a CSK as a CHK, branch-tracked toward `anchor`.
pub fn csk_log(s: &CskMatrix, anchor: Option<&ChkMatrix>) -> Result<ChkMatrix> {
    let n = s.ccr.n();
    let (cols, anchor_cols) = match anchor {
        Some(a) => {
            let u = s.support.max(a.support_index());
            let l = n * (u + 1);
            let mut ac = CMat::zeros((s.dim(), l));
            ac.slice_mut(s![.., ..a.cols().ncols()]).assign(a.cols());
            (s.cols_padded(u), Some(ac))
        }
        None => (s.cols.clone(), None),
    };
    let support = cols.ncols() / n - 1;
    let panel = log_panel(&cols, anchor_cols.as_ref(), true)?;
    ChkMatrix::from_cols(*s.grid(), n, support, panel.cols)
}

/// A measure recovered from a CHK, with the diagnostics of the solve.
#[derive(Debug, Clone)]
pub struct MeasureSolve {
    pub measure: KernelMeasure,
    /// `‖Λ·W − ham‖_F` before symmetrization.
    pub residual: f64,
    /// `‖W − Wᵀ‖_F` before symmetrization.
    pub asymmetry: f64,
    /// Condition number of the active column block of `Λ`.
    pub condition: f64,
    pub rank: usize,
}

/// Least-squares solve of `Λ·W = ham` on the active columns, followed by
/// `W ← ½(W + Wᵀ)`.
pub fn solve_measure_from_chk(h: &ChkMatrix, ccr: &CcrKernel) -> Result<MeasureSolve> {
    h.grid().ensure_same(ccr.grid())?;
    let n = ccr.n();
    let l = h.cols().ncols();
    let lam: RMat = ccr.big().slice(s![.., ..l]).to_owned();
    let (u, sv, vt) = lam.svd(true, true)?;
    let (u, vt) = (u.expect("requested U"), vt.expect("requested Vᵀ"));
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let cutoff = smax * 1e-12;
    let rank = sv.iter().filter(|&&x| x > cutoff).count();
    let condition = if smin == 0.0 { f64::INFINITY } else { smax / smin };
    // W = V Σ⁺ Uᵀ H on the numerical range
    let uh = u.slice(s![.., ..l]).t().mapv(c).dot(h.cols());
    let mut scaled = uh;
    for (i, mut row) in scaled.rows_mut().into_iter().enumerate() {
        let inv = if sv[i] > cutoff { 1.0 / sv[i] } else { 0.0 };
        row.mapv_inplace(|z| z * inv);
    }
    let w = vt.t().mapv(c).dot(&scaled);
    let residual = fro(&(lam.mapv(c).dot(&w) - h.cols()));
    let asymmetry = fro(&(&w - &w.t()));
    let scale = fro(h.cols());
    if residual > RECOVERY_TOL * scale.max(f64::MIN_POSITIVE) && scale > 0.0 || rank < l {
        return Err(Error::NotRecoverable { residual, rank, unknowns: l, condition });
    }
    let measure = KernelMeasure::symmetrized(*h.grid(), n, h.support_index(), &w);
    Ok(MeasureSolve { measure, residual, asymmetry, condition, rank })
}

/// Inverses of the leading blocks `Λ[..n(u+1), ..n(u+1)]`, built on demand.
pub(crate) struct LeadingSolver<'a> {
    ccr: &'a CcrKernel,
    inverses: Vec<Option<CMat>>,
}

impl<'a> LeadingSolver<'a> {
    pub fn new(ccr: &'a CcrKernel) -> Self {
        Self { ccr, inverses: vec![None; ccr.grid().len()] }
    }

    pub fn inverse(&mut self, u: usize) -> Result<&CMat> {
        if self.inverses[u].is_none() {
            let l = self.ccr.n() * (u + 1);
            let lam: RMat = self.ccr.big().slice(s![..l, ..l]).to_owned();
            self.inverses[u] = Some(inverse(&lam)?.mapv(c));
        }
        Ok(self.inverses[u].as_ref().unwrap())
    }

    /// Symmetric `W` with `Λ₁₁W = rhs` on the leading block of node `u`,
    /// plus the pre-symmetrization asymmetry.
    pub fn solve(&mut self, u: usize, rhs: &CMat) -> Result<(KernelMeasure, f64)> {
        let grid = *self.ccr.grid();
        let n = self.ccr.n();
        let w = self.inverse(u)?.dot(rhs);
        let asym = fro(&(&w - &w.t()));
        Ok((KernelMeasure::symmetrized(grid, n, u, &w), asym))
    }
}

/// `Q` with `exp(4iΛQ) = exp(4iΛQ₁)·exp(4iΛQ₂)`.
pub fn bch_product(q1: &KernelMeasure, q2: &KernelMeasure, ccr: &Arc<CcrKernel>) -> Result<KernelMeasure> {
    let s1 = chk_exp(&lambda_product(ccr, q1)?, I * 4.0, ccr)?;
    let s2 = chk_exp(&lambda_product(ccr, q2)?, I * 4.0, ccr)?;
    let h = csk_log(&s1.mul(&s2), None)?;
    let solved = solve_measure_from_chk(&h.scale(C64::new(0.0, -0.25)), ccr)?;
    Ok(solved.measure)
}
