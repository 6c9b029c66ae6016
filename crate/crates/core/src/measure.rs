//! Node-supported kernel measures on `[0,T]²`, the big CCR kernel, and the
//! measure algebra (products and the bracket `4i(Q₁ΛQ₂ − Q₂ΛQ₁)`).
//!
//! A measure with support index `u` is stored as its leading
//! `n(u+1) × n(u+1)` block; every other block is zero.

use std::f64::consts::PI;

use ndarray::{s, Array1, ArrayView2};
use ndarray_linalg::Eigh;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{c, expm, fro, fro_view, CMat, RMat, C64, I};
use crate::model::{ccr_two_point_raw, OqhoModel};

/// Entries at or below this magnitude count as empty for support tests.
pub const MASS_THRESHOLD: f64 = 1e-14;

/// Block matrix of the two-point CCR values, block `(j, k) = Λ(t_j − t_k)`.
#[derive(Debug, Clone)]
pub struct CcrKernel {
    grid: TimeGrid,
    n: usize,
    theta: RMat,
    drift: RMat,
    big: RMat,
    big_c: CMat,
}

impl CcrKernel {
    pub fn build(model: &OqhoModel, grid: TimeGrid) -> Self {
        Self::from_drift(model.theta(), model.drift(), grid)
    }

    /// Kernel of `Λ(τ) = e^{τA}Θ` for an arbitrary drift. Used for
    /// degenerate (e.g. lossless) dynamics that are not valid models.
    pub fn from_drift(theta: &RMat, drift: &RMat, grid: TimeGrid) -> Self {
        let n = theta.nrows();
        let len = grid.len();
        let h = grid.step();
        let lags: Vec<RMat> = (0..len).map(|d| ccr_two_point_raw(theta, drift, d as f64 * h)).collect();
        let dim = n * len;
        let mut big = RMat::zeros((dim, dim));
        for j in 0..len {
            for k in 0..len {
                let mut dst = big.slice_mut(s![j * n..(j + 1) * n, k * n..(k + 1) * n]);
                if j >= k {
                    dst.assign(&lags[j - k]);
                } else {
                    // Λ(−τ) = −Λ(τ)ᵀ, kept exact
                    dst.assign(&(-&lags[k - j].t()));
                }
            }
        }
        let big_c = big.mapv(c);
        Self { grid, n, theta: theta.clone(), drift: drift.clone(), big, big_c }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dim(&self) -> usize {
        self.big.nrows()
    }
    pub fn theta(&self) -> &RMat {
        &self.theta
    }
    pub fn drift(&self) -> &RMat {
        &self.drift
    }
    pub fn big(&self) -> &RMat {
        &self.big
    }
    pub fn big_complex(&self) -> &CMat {
        &self.big_c
    }

    /// `Λ` restricted to nodes `0..=u`.
    pub fn leading(&self, u: usize) -> ArrayView2<'_, C64> {
        let l = self.n * (u + 1);
        self.big_c.slice(s![..l, ..l])
    }

    pub fn block(&self, j: usize, k: usize) -> RMat {
        let n = self.n;
        self.big.slice(s![j * n..(j + 1) * n, k * n..(k + 1) * n]).to_owned()
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        fro(&(&self.big + &self.big.t()))
    }

    pub fn singular_values(&self) -> Result<Array1<f64>> {
        use ndarray_linalg::SVD;
        let (_, sv, _) = self.big.svd(false, false)?;
        Ok(sv)
    }

    /// 2-norm condition number of the full kernel.
    pub fn condition(&self) -> Result<f64> {
        let sv = self.singular_values()?;
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(if min == 0.0 { f64::INFINITY } else { max / min })
    }

    /// `e^{hA}`, the one-step transition on this grid.
    pub fn step_transition(&self) -> RMat {
        expm(&(&self.drift * self.grid.step())).expect("finite drift")
    }
}

pub fn build_ccr_kernel(model: &OqhoModel, grid: TimeGrid) -> CcrKernel {
    CcrKernel::build(model, grid)
}

/// Discretized complex symmetric matrix-valued measure.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMeasure {
    grid: TimeGrid,
    n: usize,
    support: usize,
    lead: CMat,
}

impl KernelMeasure {
    pub fn zero(grid: TimeGrid, n: usize) -> Self {
        Self { grid, n, support: 0, lead: CMat::zeros((n, n)) }
    }

    /// From a leading block with `support` as its last node; the block is
    /// symmetrized exactly.
    pub fn from_lead(grid: TimeGrid, n: usize, support: usize, lead: CMat) -> Result<Self> {
        let l = n * (support + 1);
        if support > grid.steps() || lead.dim() != (l, l) {
            return Err(Error::Dimension(format!(
                "leading block {:?} does not match support {support} with n = {n}",
                lead.dim()
            )));
        }
        let residual = fro(&(&lead - &lead.t()));
        if residual > 1e-10 * (1.0 + fro(&lead)) {
            return Err(Error::NotSymmetric { residual });
        }
        let lead = (&lead + &lead.t()) * c(0.5);
        Ok(Self { grid, n, support, lead })
    }

    /// `½(lead + leadᵀ)` without a symmetry precondition.
    pub(crate) fn symmetrized(grid: TimeGrid, n: usize, support: usize, lead: &CMat) -> Self {
        Self { grid, n, support, lead: (lead + &lead.t()) * c(0.5) }
    }

    /// From the full block matrix; the support index is the last node index
    /// whose row or column carries a nonzero entry.
    pub fn from_weights(grid: TimeGrid, n: usize, weights: &CMat) -> Result<Self> {
        let dim = n * grid.len();
        if weights.dim() != (dim, dim) {
            return Err(Error::Dimension(format!("weights must be {dim}x{dim}, got {:?}", weights.dim())));
        }
        let mut support = 0;
        for j in (0..grid.len()).rev() {
            let rows = weights.slice(s![j * n..(j + 1) * n, ..]);
            let cols = weights.slice(s![.., j * n..(j + 1) * n]);
            if rows.iter().chain(cols.iter()).any(|z| *z != C64::new(0.0, 0.0)) {
                support = j;
                break;
            }
        }
        let l = n * (support + 1);
        Self::from_lead(grid, n, support, weights.slice(s![..l, ..l]).to_owned())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dim(&self) -> usize {
        self.n * self.grid.len()
    }
    pub fn support_index(&self) -> usize {
        self.support
    }
    pub fn lead(&self) -> &CMat {
        &self.lead
    }
    pub fn lead_dim(&self) -> usize {
        self.lead.nrows()
    }

    /// Leading block padded with zeros to `n(u+1)`, `u ≥ support`.
    pub fn lead_padded(&self, u: usize) -> CMat {
        let l = self.n * (u + 1);
        let own = self.lead_dim();
        if l == own {
            return self.lead.clone();
        }
        let mut out = CMat::zeros((l, l));
        let k = own.min(l);
        out.slice_mut(s![..k, ..k]).assign(&self.lead.slice(s![..k, ..k]));
        out
    }

    pub fn weights(&self) -> CMat {
        self.lead_padded(self.grid.steps())
    }

    pub fn block(&self, j: usize, k: usize) -> CMat {
        let n = self.n;
        if j > self.support || k > self.support {
            return CMat::zeros((n, n));
        }
        self.lead.slice(s![j * n..(j + 1) * n, k * n..(k + 1) * n]).to_owned()
    }

    pub fn norm(&self) -> f64 {
        fro(&self.lead)
    }

    pub fn real_part(&self) -> Self {
        Self { lead: self.lead.mapv(|z| c(z.re)), ..self.clone() }
    }

    pub fn imag_norm(&self) -> f64 {
        self.lead.iter().map(|z| z.im * z.im).sum::<f64>().sqrt()
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { lead: &self.lead * z, ..self.clone() }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: C64, other: &Self, b: C64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let u = self.support.max(other.support);
        let lead = self.lead_padded(u) * a + other.lead_padded(u) * b;
        Ok(Self { grid: self.grid, n: self.n, support: u, lead })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(c(1.0), other, c(1.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(c(1.0), other, c(-1.0))
    }

    /// Copy with the support index raised to `u` (zero padding).
    pub fn extended(&self, u: usize) -> Self {
        let u = u.max(self.support).min(self.grid.steps());
        Self { lead: self.lead_padded(u), support: u, ..self.clone() }
    }

    /// True when all blocks outside `[0..=u]²` are at most [`MASS_THRESHOLD`].
    pub fn is_nonanticipative(&self, u: usize) -> bool {
        let l = self.n * (u + 1);
        if l >= self.lead_dim() {
            return true;
        }
        self.lead.indexed_iter().all(|((i, j), z)| (i < l && j < l) || z.norm() <= MASS_THRESHOLD)
    }

    /// Bilinear moments `∫∫ φ_a(σ) Q(dσ×dτ) φ_b(τ)` against the cosine
    /// basis `φ_a(t) = cos(aπt/T)·e_i`, `a < modes`; a `modes·n` square
    /// complex matrix that is independent of the grid resolution.
    pub fn weak_moments(&self, modes: usize) -> CMat {
        let n = self.n;
        let horizon = self.grid.horizon();
        let len = self.support + 1;
        let mut basis = CMat::zeros((len * n, modes * n));
        for j in 0..len {
            let t = self.grid.node(j);
            for a in 0..modes {
                let v = if horizon > 0.0 { (a as f64 * PI * t / horizon).cos() } else { 1.0 };
                for i in 0..n {
                    basis[[j * n + i, a * n + i]] = c(v);
                }
            }
        }
        basis.t().dot(&self.lead).dot(&basis)
    }
}

/// `‖moments(a) − moments(b)‖_F / ‖moments(b)‖_F` with three cosine modes.
pub fn weak_distance(a: &KernelMeasure, b: &KernelMeasure) -> f64 {
    let ma = a.weak_moments(3);
    let mb = b.weak_moments(3);
    let denom = fro(&mb);
    let diff = fro(&(&ma - &mb));
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}

pub fn atom_measure(grid: TimeGrid, j: usize, k: usize, block: &CMat) -> Result<KernelMeasure> {
    let n = block.nrows();
    if block.ncols() != n || n == 0 {
        return Err(Error::Dimension(format!("atom block must be square, got {:?}", block.dim())));
    }
    if j > grid.steps() || k > grid.steps() {
        return Err(Error::Index(format!("atom at ({j}, {k}) outside nodes 0..={}", grid.steps())));
    }
    let u = j.max(k);
    let l = n * (u + 1);
    let mut lead = CMat::zeros((l, l));
    if j == k {
        let residual = fro(&(block - &block.t()));
        if residual > 1e-14 * (1.0 + fro(block)) {
            return Err(Error::NotSymmetric { residual });
        }
        lead.slice_mut(s![j * n..(j + 1) * n, j * n..(j + 1) * n]).assign(block);
    } else {
        lead.slice_mut(s![j * n..(j + 1) * n, k * n..(k + 1) * n]).assign(block);
        lead.slice_mut(s![k * n..(k + 1) * n, j * n..(j + 1) * n]).assign(&block.t());
    }
    KernelMeasure::from_lead(grid, n, u, lead)
}

fn check_psd(pi: &RMat) -> Result<()> {
    let n = pi.nrows();
    if pi.ncols() != n {
        return Err(Error::Dimension(format!("Π must be square, got {:?}", pi.dim())));
    }
    let residual = fro(&(pi - &pi.t()));
    if residual > 1e-14 * (1.0 + fro(pi)) {
        return Err(Error::NotSymmetric { residual });
    }
    let (eigs, _) = pi.eigh(ndarray_linalg::UPLO::Lower)?;
    let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = eigs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if min < -1e-12 * (1.0 + scale) {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
    }
    Ok(())
}

/// Trapezoidal discretization of `μ([0, t_u] ∩ A ∩ B)·Π`.
pub fn diagonal_lebesgue_measure(grid: TimeGrid, u: usize, pi: &RMat) -> Result<KernelMeasure> {
    check_psd(pi)?;
    if u > grid.steps() {
        return Err(Error::Index(format!("node {u} outside 0..={}", grid.steps())));
    }
    let n = pi.nrows();
    if u == 0 {
        return Ok(KernelMeasure::zero(grid, n));
    }
    let h = grid.step();
    let l = n * (u + 1);
    let mut lead = CMat::zeros((l, l));
    let pic = pi.mapv(c);
    for j in 0..=u {
        let w = if j == 0 || j == u { 0.5 * h } else { h };
        lead.slice_mut(s![j * n..(j + 1) * n, j * n..(j + 1) * n]).assign(&(&pic * c(w)));
    }
    KernelMeasure::from_lead(grid, n, u, lead)
}

/// Single atom `Π` at `(t_u, t_u)`.
pub fn atomic_corner_measure(grid: TimeGrid, u: usize, pi: &RMat) -> Result<KernelMeasure> {
    check_psd(pi)?;
    atom_measure(grid, u, u, &pi.mapv(c))
}

/// Splits a raw block matrix into its symmetric part and the scalar
/// `i Σ_{jk} ⟨Λ(t_j − t_k), Q₋(j,k)⟩` carried by the antisymmetric part.
pub fn split_sym_antisym(raw: &CMat, ccr: &CcrKernel) -> Result<(KernelMeasure, C64)> {
    let dim = ccr.dim();
    if raw.dim() != (dim, dim) {
        return Err(Error::Dimension(format!("raw measure must be {dim}x{dim}, got {:?}", raw.dim())));
    }
    let sym = (raw + &raw.t()) * c(0.5);
    let anti = (raw - &raw.t()) * c(0.5);
    let mut pairing = C64::new(0.0, 0.0);
    ndarray::Zip::from(ccr.big()).and(&anti).for_each(|l, q| pairing += q * *l);
    let measure = KernelMeasure::from_weights(*ccr.grid(), ccr.n(), &sym)?;
    Ok((measure, I * pairing))
}

/// Complex Hamiltonian kernel `Λ·W`. Only the first `n(support+1)`
/// columns can be nonzero; those are stored in `cols`.
#[derive(Debug, Clone)]
pub struct ChkMatrix {
    grid: TimeGrid,
    n: usize,
    support: usize,
    cols: CMat,
    source: Option<KernelMeasure>,
}

impl ChkMatrix {
    pub fn from_cols(grid: TimeGrid, n: usize, support: usize, cols: CMat) -> Result<Self> {
        let dim = n * grid.len();
        if cols.dim() != (dim, n * (support + 1)) {
            return Err(Error::Dimension(format!(
                "CHK columns {:?} do not match support {support}",
                cols.dim()
            )));
        }
        Ok(Self { grid, n, support, cols, source: None })
    }

    /// From a dense `D×D` matrix; fails if columns beyond the support are nonzero.
    pub fn from_dense(grid: TimeGrid, n: usize, ham: &CMat) -> Result<Self> {
        let dim = n * grid.len();
        if ham.dim() != (dim, dim) {
            return Err(Error::Dimension(format!("CHK must be {dim}x{dim}, got {:?}", ham.dim())));
        }
        let mut support = 0;
        for j in (0..grid.len()).rev() {
            if ham.slice(s![.., j * n..(j + 1) * n]).iter().any(|z| *z != C64::new(0.0, 0.0)) {
                support = j;
                break;
            }
        }
        let l = n * (support + 1);
        Self::from_cols(grid, n, support, ham.slice(s![.., ..l]).to_owned())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dim(&self) -> usize {
        self.cols.nrows()
    }
    pub fn support_index(&self) -> usize {
        self.support
    }
    pub fn cols(&self) -> &CMat {
        &self.cols
    }
    pub fn source(&self) -> Option<&KernelMeasure> {
        self.source.as_ref()
    }

    pub fn ham(&self) -> CMat {
        let mut out = CMat::zeros((self.dim(), self.dim()));
        out.slice_mut(s![.., ..self.cols.ncols()]).assign(&self.cols);
        out
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { cols: &self.cols * z, source: None, ..self.clone() }
    }

    /// Recomputes `Λ·W` from the retained source and returns the deviation.
    pub fn verify_source(&self, ccr: &CcrKernel) -> Option<f64> {
        let src = self.source.as_ref()?;
        let again = lambda_product(ccr, src).ok()?;
        Some(fro(&(&again.cols - &self.cols)))
    }
}

pub fn lambda_product(ccr: &CcrKernel, q: &KernelMeasure) -> Result<ChkMatrix> {
    ccr.grid.ensure_same(&q.grid)?;
    if ccr.n != q.n {
        return Err(Error::Dimension(format!("kernel n = {} vs measure n = {}", ccr.n, q.n)));
    }
    let l = q.lead_dim();
    let cols = ccr.big_c.slice(s![.., ..l]).dot(&q.lead);
    Ok(ChkMatrix { grid: q.grid, n: q.n, support: q.support, cols, source: Some(q.clone()) })
}

pub fn chk_apply(h: &ChkMatrix, f: &Array1<C64>) -> Result<Array1<C64>> {
    if f.len() != h.dim() {
        return Err(Error::Dimension(format!("vector length {} vs CHK dimension {}", f.len(), h.dim())));
    }
    Ok(h.cols.dot(&f.slice(s![..h.cols.ncols()])))
}

/// `W₁·Λ·W₂` as a full block matrix.
pub fn measure_triple_product(q1: &KernelMeasure, ccr: &CcrKernel, q2: &KernelMeasure) -> Result<CMat> {
    ccr.grid.ensure_same(&q1.grid)?;
    ccr.grid.ensure_same(&q2.grid)?;
    let (l1, l2) = (q1.lead_dim(), q2.lead_dim());
    let core = q1.lead.dot(&ccr.big_c.slice(s![..l1, ..l2])).dot(&q2.lead);
    let mut out = CMat::zeros((ccr.dim(), ccr.dim()));
    out.slice_mut(s![..l1, ..l2]).assign(&core);
    Ok(out)
}

/// `4i(Q₁ΛQ₂ − Q₂ΛQ₁)`. Since `Λᵀ = −Λ`, `Q₂ΛQ₁ = −(Q₁ΛQ₂)ᵀ`, so the
/// result is `4i(P + Pᵀ)` with `P = Q₁ΛQ₂` and is symmetric exactly.
pub fn bracket(q1: &KernelMeasure, q2: &KernelMeasure, ccr: &CcrKernel) -> Result<KernelMeasure> {
    ccr.grid.ensure_same(&q1.grid)?;
    ccr.grid.ensure_same(&q2.grid)?;
    let u = q1.support.max(q2.support);
    let l = ccr.n * (u + 1);
    let p = q1.lead_padded(u).dot(&ccr.big_c.slice(s![..l, ..l])).dot(&q2.lead_padded(u));
    let lead = (&p + &p.t()) * (I * 4.0);
    Ok(KernelMeasure { grid: q1.grid, n: q1.n, support: u, lead })
}

pub fn is_nonanticipative(q: &KernelMeasure, u: usize) -> bool {
    q.is_nonanticipative(u)
}

/// Frobenius norm of a view, re-exported for report code.
pub fn block_norm(a: ArrayView2<'_, C64>) -> f64 {
    fro_view(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::linalg::{commutator, identity};
    use crate::model::{canonical_theta, damped_mode};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_measure(grid: TimeGrid, n: usize, rng: &mut ChaCha8Rng) -> KernelMeasure {
        let dim = n * grid.len();
        let raw = CMat::from_shape_fn((dim, dim), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        KernelMeasure::from_weights(grid, n, &((&raw + &raw.t()) * c(0.5))).unwrap()
    }

    #[test]
    fn single_time_kernel_is_theta() {
        let model = damped_mode(0.5, 0.7).unwrap();
        let k = build_ccr_kernel(&model, TimeGrid::single_time());
        assert_eq!(k.big(), model.theta());
    }

    #[test]
    fn scalar_decay_kernel_closed_form() {
        let theta = canonical_theta(2);
        let k = CcrKernel::from_drift(&theta, &(-identity::<f64>(2)), make_grid(1.0, 4).unwrap());
        for j in 0..5 {
            for l in 0..5 {
                let tau = (j as f64 - l as f64) * 0.25;
                let want = &theta * (-tau.abs()).exp();
                assert!(fro(&(k.block(j, l) - want)) < 1e-15);
            }
        }
        assert_eq!(k.antisymmetry_residual(), 0.0);
    }

    #[test]
    fn atom_placement_and_errors() {
        let g = make_grid(1.0, 3).unwrap();
        let blk = array![[c(1.0), c(2.0)], [c(3.0), c(4.0)]];
        let q = atom_measure(g, 0, 1, &blk).unwrap();
        assert_eq!(q.block(0, 1), blk);
        assert_eq!(q.block(1, 0), blk.t());
        assert_eq!(q.support_index(), 1);
        assert!(atom_measure(g, 2, 2, &blk).is_err());
        assert!(atom_measure(g, 4, 0, &identity::<C64>(2)).is_err());
        assert!(atom_measure(g, 0, 0, &CMat::zeros((2, 3))).is_err());
        let d = atom_measure(g, 0, 0, &identity::<C64>(2)).unwrap();
        assert_eq!(fro(&(d.weights() - d.weights().t())), 0.0);
    }

    #[test]
    fn lebesgue_weights_telescope() {
        let g = make_grid(1.0, 8).unwrap();
        let pi = array![[1.0, 0.0], [0.0, 0.0]];
        assert_eq!(diagonal_lebesgue_measure(g, 0, &pi).unwrap().norm(), 0.0);
        for u in 1..=8 {
            let q = diagonal_lebesgue_measure(g, u, &pi).unwrap();
            let total: f64 = (0..=u).map(|j| q.block(j, j)[[0, 0]].re).sum();
            assert!((total - g.node(u)).abs() < 1e-15);
            assert!(q.is_nonanticipative(u));
            assert!(!q.is_nonanticipative(u - 1));
        }
        assert!(diagonal_lebesgue_measure(g, 2, &(-identity::<f64>(2))).is_err());
    }

    #[test]
    fn corner_atom() {
        let g = make_grid(1.0, 4).unwrap();
        let pi = array![[0.6, 0.1], [0.1, 0.3]];
        let q = atomic_corner_measure(g, 3, &pi).unwrap();
        assert_eq!(q.block(3, 3), pi.mapv(c));
        assert_eq!(q.norm() - fro(&pi), 0.0);
        assert_eq!(atomic_corner_measure(g, 3, &RMat::zeros((2, 2))).unwrap().norm(), 0.0);
    }

    #[test]
    fn split_of_symmetric_and_antisymmetric_inputs() {
        let model = damped_mode(0.5, 0.7).unwrap();
        let g = make_grid(1.0, 3).unwrap();
        let ccr = build_ccr_kernel(&model, g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_measure(g, 2, &mut rng);
        let (sym, scalar) = split_sym_antisym(&q.weights(), &ccr).unwrap();
        assert_eq!(sym, q);
        assert_eq!(scalar, C64::new(0.0, 0.0));

        let raw = RMat::from_shape_fn((8, 8), |_| rng.random_range(-1.0..1.0));
        let anti = (&raw - &raw.t()).mapv(c);
        let (sym, scalar) = split_sym_antisym(&anti, &ccr).unwrap();
        assert_eq!(sym.norm(), 0.0);
        let mut brute = C64::new(0.0, 0.0);
        for j in 0..4 {
            for k in 0..4 {
                let lam = model.ccr_two_point(g.node(j) - g.node(k));
                for a in 0..2 {
                    for b in 0..2 {
                        brute += lam[[a, b]] * anti[[2 * j + a, 2 * k + b]];
                    }
                }
            }
        }
        assert!((scalar - I * brute).norm() < 1e-12);
        assert!(scalar.re.abs() < 1e-15);
    }

    #[test]
    fn chk_apply_matches_double_sum() {
        let model = damped_mode(0.5, 0.7).unwrap();
        let g = make_grid(1.0, 3).unwrap();
        let ccr = build_ccr_kernel(&model, g);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_measure(g, 2, &mut rng);
        let h = lambda_product(&ccr, &q).unwrap();
        assert_eq!(h.verify_source(&ccr), Some(0.0));
        let f = Array1::from_shape_fn(8, |_| C64::new(rng.random_range(-1.0..1.0), 0.0));
        let g_vec = chk_apply(&h, &f).unwrap();
        for j in 0..4 {
            for a in 0..2 {
                let mut acc = C64::new(0.0, 0.0);
                for sgm in 0..4 {
                    let lam = model.ccr_two_point(g.node(j) - g.node(sgm));
                    for b in 0..2 {
                        for k in 0..4 {
                            for d in 0..2 {
                                acc += lam[[a, b]] * q.block(sgm, k)[[b, d]] * f[2 * k + d];
                            }
                        }
                    }
                }
                assert!((acc - g_vec[2 * j + a]).norm() < 1e-12);
            }
        }
        assert_eq!(chk_apply(&h, &Array1::zeros(8)).unwrap(), Array1::<C64>::zeros(8));
        assert!(chk_apply(&h, &Array1::zeros(7)).is_err());
    }

    #[test]
    fn single_time_bracket_by_hand() {
        let ccr = CcrKernel::from_drift(&canonical_theta(2), &(-identity::<f64>(2)), TimeGrid::single_time());
        let g = TimeGrid::single_time();
        let q1 = atom_measure(g, 0, 0, &array![[c(1.0), c(0.0)], [c(0.0), c(0.0)]]).unwrap();
        let q2 = atom_measure(g, 0, 0, &array![[c(0.0), c(0.0)], [c(0.0), c(1.0)]]).unwrap();
        // Q₁ΘQ₂ = [[0,1],[0,0]], Q₂ΘQ₁ = [[0,0],[−1,0]]
        let b = bracket(&q1, &q2, &ccr).unwrap();
        let want = array![[c(0.0), I * 4.0], [I * 4.0, c(0.0)]];
        assert_eq!(b.lead(), &want);
    }

    #[test]
    fn homomorphism_and_mismatch() {
        let model = damped_mode(0.5, 0.7).unwrap();
        let g = make_grid(1.0, 4).unwrap();
        let ccr = build_ccr_kernel(&model, g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q1 = random_measure(g, 2, &mut rng);
        let q2 = random_measure(g, 2, &mut rng);
        let b = bracket(&q1, &q2, &ccr).unwrap();
        let lhs = lambda_product(&ccr, &b).unwrap().ham() * (I * 4.0);
        let x1 = lambda_product(&ccr, &q1).unwrap().ham() * (I * 4.0);
        let x2 = lambda_product(&ccr, &q2).unwrap().ham() * (I * 4.0);
        let rhs = commutator(&x1, &x2);
        assert!(fro(&(&lhs - &rhs)) <= 1e-12 * fro(&rhs));
        let other = make_grid(1.0, 5).unwrap();
        assert!(bracket(&q1, &KernelMeasure::zero(other, 2), &ccr).is_err());
    }

    #[test]
    fn weak_moments_of_lebesgue_measure_are_exact() {
        // ∫₀¹ cos(aπt)cos(bπt) dt·Π; trapezoid is exact on these trig products
        let pi = array![[1.0, 0.0], [0.0, 2.0]];
        let exact = |a: usize, b: usize| -> f64 {
            if a == b {
                if a == 0 { 1.0 } else { 0.5 }
            } else {
                0.0
            }
        };
        for steps in [8, 16, 32] {
            let g = make_grid(1.0, steps).unwrap();
            let q = diagonal_lebesgue_measure(g, steps, &pi).unwrap();
            let m = q.weak_moments(3);
            let mut err = 0.0f64;
            for a in 0..3 {
                for b in 0..3 {
                    err = err.max((m[[2 * a + 1, 2 * b + 1]].re - 2.0 * exact(a, b)).abs());
                }
            }
            assert!(err < 1e-13, "N = {steps}: {err:e}");
        }
    }
}
