//! Truncated Fock-space representations of canonical variables.
//!
//! An operator-level oracle for the quadratic-form Lie algebra: forms
//! `φ_Q = Σ q_ab X_a X_b` are built as dense matrices on a tensor product of
//! truncated oscillators and compared on low Fock levels, where truncation
//! does not reach.

use ndarray::{linalg::kron, Axis};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{c, fro, hermitian_eigen, identity, CMat, RMat, C64, I};
use crate::model::OqhoModel;

/// Hard cap on the tensor-product dimension.
pub const DIMENSION_BUDGET: usize = 4096;
/// Levels above the kept range: each quadratic form moves a level by ≤ 2.
pub const PROJECTION_MARGIN: usize = 4;
pub const MIN_CUTOFF: usize = 4;
pub const MIN_BRACKET_CUTOFF: usize = 8;

/// Position and momentum on the lowest `cutoff` oscillator levels.
#[derive(Debug, Clone)]
pub struct TruncatedMode {
    cutoff: usize,
    position: CMat,
    momentum: CMat,
}

impl TruncatedMode {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < MIN_CUTOFF {
            return Err(Error::InvalidArgument(format!("cutoff {cutoff} < {MIN_CUTOFF}")));
        }
        let mut a = CMat::zeros((cutoff, cutoff));
        for k in 1..cutoff {
            a[[k - 1, k]] = c((k as f64).sqrt());
        }
        let ad = a.t().to_owned();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let position = (&a + &ad) * c(r);
        let momentum = (&a - &ad) * C64::new(0.0, -r);
        Ok(Self { cutoff, position, momentum })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }
    pub fn position(&self) -> &CMat {
        &self.position
    }
    pub fn momentum(&self) -> &CMat {
        &self.momentum
    }

    /// `‖P([q,p] − iI)P‖_F` on the lowest `cutoff − 1` levels, where the
    /// truncated commutator is exact.
    pub fn ccr_defect(&self) -> f64 {
        let comm = self.position.dot(&self.momentum) - self.momentum.dot(&self.position);
        let d = self.cutoff - 1;
        let defect = comm.slice(ndarray::s![..d, ..d]).to_owned() - identity::<C64>(d) * I;
        fro(&defect)
    }
}

/// Operators `X_1..X_k` on `⊗ modes` with their intended commutator table
/// `[X_a, X_b] = 2i·ccr_target_ab`.
#[derive(Debug, Clone)]
pub struct VariableSet {
    modes: Vec<TruncatedMode>,
    variables: Vec<CMat>,
    ccr_target: RMat,
    low: Vec<usize>,
}

impl VariableSet {
    pub fn modes(&self) -> &[TruncatedMode] {
        &self.modes
    }
    pub fn variables(&self) -> &[CMat] {
        &self.variables
    }
    pub fn ccr_target(&self) -> &RMat {
        &self.ccr_target
    }
    pub fn dim(&self) -> usize {
        self.modes.iter().map(|m| m.cutoff).product()
    }
    /// Basis indices with every mode at level `≤ d − 4`.
    pub fn low_levels(&self) -> &[usize] {
        &self.low
    }

    /// `P M P` restricted to the low-level basis states.
    pub fn project(&self, m: &CMat) -> CMat {
        m.select(Axis(0), &self.low).select(Axis(1), &self.low)
    }

    /// `P[X_a, X_b]P`, formed as `(PX_a)(X_bP) − (PX_b)(X_aP)`.
    pub fn projected_commutator(&self, a: usize, b: usize) -> CMat {
        let (xa, xb) = (&self.variables[a], &self.variables[b]);
        let rows = |x: &CMat| x.select(Axis(0), &self.low);
        let cols = |x: &CMat| x.select(Axis(1), &self.low);
        rows(xa).dot(&cols(xb)) - rows(xb).dot(&cols(xa))
    }

    /// `max_ab ‖P([X_a, X_b] − 2i·target_ab)P‖_F`.
    pub fn ccr_residual(&self) -> f64 {
        let k = self.variables.len();
        let eye = identity::<C64>(self.low.len());
        let mut worst: f64 = 0.0;
        for a in 0..k {
            for b in a + 1..k {
                let want = &eye * (I * (2.0 * self.ccr_target[[a, b]]));
                worst = worst.max(fro(&(self.projected_commutator(a, b) - want)));
            }
        }
        worst
    }

    fn partial_sums(&self, q: &CMat) -> Result<Vec<CMat>> {
        let k = self.variables.len();
        if q.dim() != (k, k) {
            return Err(Error::Dimension(format!("form is {:?}, expected {k}x{k}", q.dim())));
        }
        let dim = self.dim();
        Ok((0..k)
            .map(|a| {
                let mut y = CMat::zeros((dim, dim));
                for b in 0..k {
                    if q[[a, b]] != C64::new(0.0, 0.0) {
                        y.scaled_add(q[[a, b]], &self.variables[b]);
                    }
                }
                y
            })
            .collect())
    }

    /// `φ_q P`, a `D × |low|` block, without forming `φ_q`.
    pub fn form_right(&self, q: &CMat) -> Result<CMat> {
        let ys = self.partial_sums(q)?;
        let mut out = CMat::zeros((self.dim(), self.low.len()));
        for (x, y) in self.variables.iter().zip(&ys) {
            out += &x.dot(&y.select(Axis(1), &self.low));
        }
        Ok(out)
    }

    /// `P φ_q`, a `|low| × D` block.
    pub fn form_left(&self, q: &CMat) -> Result<CMat> {
        let ys = self.partial_sums(q)?;
        let mut out = CMat::zeros((self.low.len(), self.dim()));
        for (x, y) in self.variables.iter().zip(&ys) {
            out += &x.select(Axis(0), &self.low).dot(y);
        }
        Ok(out)
    }

    /// `P φ_q P`.
    pub fn projected_form(&self, q: &CMat) -> Result<CMat> {
        Ok(self.form_right(q)?.select(Axis(0), &self.low))
    }

    fn assemble(modes: Vec<TruncatedMode>, coefficients: &RMat, ccr_target: RMat) -> Result<Self> {
        let dim: usize = modes.iter().map(|m| m.cutoff).product();
        if dim > DIMENSION_BUDGET {
            return Err(Error::DimensionBudget { dim, budget: DIMENSION_BUDGET });
        }
        // canonical operators (q_1, p_1, q_2, p_2, …) embedded in the tensor product
        let mut canonical = Vec::with_capacity(2 * modes.len());
        for (i, mode) in modes.iter().enumerate() {
            for op in [&mode.position, &mode.momentum] {
                let mut acc = identity::<C64>(1);
                for (j, other) in modes.iter().enumerate() {
                    let factor = if i == j { op.clone() } else { identity::<C64>(other.cutoff) };
                    acc = kron(&acc, &factor);
                }
                canonical.push(acc);
            }
        }
        let variables = coefficients
            .rows()
            .into_iter()
            .map(|row| {
                let mut x = CMat::zeros((dim, dim));
                for (r, y) in row.iter().zip(&canonical) {
                    if *r != 0.0 {
                        x.scaled_add(c(*r), y);
                    }
                }
                x
            })
            .collect();
        let low = low_level_indices(&modes);
        Ok(Self { modes, variables, ccr_target, low })
    }
}

fn low_level_indices(modes: &[TruncatedMode]) -> Vec<usize> {
    let dim: usize = modes.iter().map(|m| m.cutoff).product();
    (0..dim)
        .filter(|&idx| {
            let mut rest = idx;
            // the last mode varies fastest in the Kronecker ordering
            modes.iter().rev().all(|m| {
                let level = rest % m.cutoff;
                rest /= m.cutoff;
                level + PROJECTION_MARGIN <= m.cutoff
            })
        })
        .collect()
}

/// Real `L` with `L J_c Lᵀ = 2Θ`, `J_c` the direct sum of `[[0,1],[−1,0]]`.
///
/// From `iΘv = ωv`, `v = x + iy`, `ω > 0`: `Θx = ωy`, `Θy = −ωx`, and
/// `√2x, √2y` are orthonormal, so `(√2x, −√2y)` scaled by `√(2ω)` is a
/// congruence block. Canonical `Θ` gives `L = √2·I`.
pub fn canonical_factor(theta: &RMat) -> Result<RMat> {
    let n = theta.nrows();
    if n == 0 || n % 2 != 0 || theta.ncols() != n {
        return Err(Error::Dimension(format!("CCR matrix must be square of even order, got {n}x{}", theta.ncols())));
    }
    let herm = theta.mapv(|x| C64::new(0.0, x));
    let (w, v) = hermitian_eigen(&herm)?;
    let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut l = RMat::zeros((n, n));
    // eigh sorts ascending: the positive half is the upper n/2
    for (block, col) in (n / 2..n).enumerate() {
        let omega = w[col];
        if !(omega > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::SingularTheta { condition: scale / omega.abs().max(f64::MIN_POSITIVE) });
        }
        // fix the eigenvector phase: largest component real positive
        let col_v = v.column(col);
        let pivot = (0..n).fold(0, |best, r| if col_v[r].norm() > col_v[best].norm() * (1.0 + 1e-12) { r } else { best });
        let phase = col_v[pivot].conj() / col_v[pivot].norm();
        let s = 2.0 * omega.sqrt();
        for r in 0..n {
            let z = col_v[r] * phase;
            l[[r, 2 * block]] = s * z.re;
            l[[r, 2 * block + 1]] = -s * z.im;
        }
    }
    Ok(l)
}

/// `X = L·(q₁, p₁, …)` realizing `[X, Xᵀ] = 2iΘ` on `n/2` modes.
pub fn build_single_time(theta: &RMat, cutoff: usize) -> Result<VariableSet> {
    let l = canonical_factor(theta)?;
    let modes = (0..theta.nrows() / 2).map(|_| TruncatedMode::new(cutoff)).collect::<Result<Vec<_>>>()?;
    VariableSet::assemble(modes, &l, theta.clone())
}

/// `Σ_ab q_ab X_a X_b`. A nonsymmetric `q` contributes its antisymmetric part
/// as the scalar `i⟨ccr_target, q₋⟩` on the low levels.
pub fn quadratic_form_matrix(vars: &VariableSet, q: &CMat) -> Result<CMat> {
    let k = vars.variables.len();
    if q.dim() != (k, k) {
        return Err(Error::Dimension(format!("form is {:?}, expected {k}x{k}", q.dim())));
    }
    let dim = vars.dim();
    let mut out = CMat::zeros((dim, dim));
    for a in 0..k {
        let mut inner = CMat::zeros((dim, dim));
        for b in 0..k {
            if q[[a, b]] != C64::new(0.0, 0.0) {
                inner.scaled_add(q[[a, b]], &vars.variables[b]);
            }
        }
        out += &vars.variables[a].dot(&inner);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct ScalarRemainder {
    /// Mean diagonal of `Pφ_{q₋}P = P(φ_q − φ_{q₊})P`.
    pub measured: C64,
    /// `i⟨C, q₋⟩` with `C` the commutator table.
    pub expected: C64,
    /// `‖Pφ_{q₋}P − measured·I‖_F`: zero when the remainder is scalar.
    pub deviation: f64,
}

#[derive(Debug, Clone)]
pub struct BracketReport {
    /// `‖P([φ_{q₁}, φ_{q₂}] − φ_{4i(q₁Cq₂ − q₂Cq₁)})P‖_F` for the symmetric parts.
    pub residual: f64,
    /// `residual` relative to `‖P[φ_{q₁}, φ_{q₂}]P‖_F`.
    pub relative: f64,
    pub tol: f64,
    pub passed: bool,
    /// Present when `q₁` has an antisymmetric part.
    pub scalar_remainder: Option<ScalarRemainder>,
}

fn sym(q: &CMat) -> CMat {
    (q + &q.t()) * c(0.5)
}

/// Lie-algebra identity `[φ_{q₁}, φ_{q₂}] = φ_{4i(q₁Cq₂ − q₂Cq₁)}` on low levels.
pub fn oracle_bracket_check(vars: &VariableSet, q1: &CMat, q2: &CMat, tol: f64) -> Result<BracketReport> {
    if let Some(m) = vars.modes.iter().find(|m| m.cutoff < MIN_BRACKET_CUTOFF) {
        return Err(Error::InvalidArgument(format!("cutoff {} < {MIN_BRACKET_CUTOFF} for the bracket check", m.cutoff)));
    }
    let (s1, s2) = (sym(q1), sym(q2));
    let ccr = vars.ccr_target.mapv(c);
    let comm = vars.form_left(&s1)?.dot(&vars.form_right(&s2)?) - vars.form_left(&s2)?.dot(&vars.form_right(&s1)?);
    let formula = (s1.dot(&ccr).dot(&s2) - s2.dot(&ccr).dot(&s1)) * (I * 4.0);
    let rhs = vars.projected_form(&formula)?;
    let residual = fro(&(&comm - &rhs));
    let relative = residual / fro(&comm).max(f64::MIN_POSITIVE);
    let anti = (q1 - &q1.t()) * c(0.5);
    let scalar_remainder = if fro(&anti) > 0.0 {
        let diff = vars.projected_form(&anti)?;
        let size = diff.nrows();
        let measured = diff.diag().sum() / c(size as f64);
        let expected = I * anti.iter().zip(ccr.iter()).map(|(a, t)| a * t).sum::<C64>();
        let deviation = fro(&(diff - identity::<C64>(size) * measured));
        Some(ScalarRemainder { measured, expected, deviation })
    } else {
        None
    };
    let passed = residual <= tol
        && scalar_remainder.map_or(true, |r| (r.measured - r.expected).norm() <= tol && r.deviation <= tol);
    Ok(BracketReport { residual, relative, tol, passed, scalar_remainder })
}

#[derive(Debug, Clone)]
pub struct MultiTimeReport {
    pub dim: usize,
    /// `max ‖P([X(t_j)_a, X(t_k)_b] − 2iΛ_disc)P‖_F` over all pairs.
    pub ccr_residual: f64,
    /// The same restricted to `j = k`.
    pub equal_time_residual: f64,
    /// `max_k ‖Θ_k − Θ‖_F` of the discrete equal-time table.
    pub theta_drift: f64,
    /// `max ‖Λ_disc − Λ(t_j − t_k)‖_F`: a discretization diagnostic.
    pub continuous_gap: f64,
    pub bracket: BracketReport,
    pub passed: bool,
}

/// `Λ_disc(j, k) = E^{j−k}Θ_k` for `j ≥ k` with `E = e^{hA}` and
/// `Θ_{u+1} = EΘ_uEᵀ + hBJBᵀ`; the table of `X_{u+1} = EX_u + BΔW_u`.
pub fn discrete_ccr_table(model: &OqhoModel, grid: &TimeGrid) -> Result<RMat> {
    let n = model.n();
    let len = grid.len();
    let h = if grid.steps() == 0 { 0.0 } else { grid.step() };
    let e = crate::linalg::expm(&(model.drift() * h))?;
    let diffusion = model.diffusion() * h;
    let mut thetas = vec![model.theta().clone()];
    for u in 0..grid.steps() {
        let next = e.dot(&thetas[u]).dot(&e.t()) + &diffusion;
        thetas.push(next);
    }
    let mut table = RMat::zeros((n * len, n * len));
    for k in 0..len {
        let mut block = thetas[k].clone();
        for j in k..len {
            table.slice_mut(ndarray::s![j * n..(j + 1) * n, k * n..(k + 1) * n]).assign(&block);
            if j > k {
                table.slice_mut(ndarray::s![k * n..(k + 1) * n, j * n..(j + 1) * n]).assign(&(-&block.t()));
            }
            block = e.dot(&block);
        }
    }
    Ok(table)
}

/// Multi-time oracle on `X_{u+1} = e^{hA}X_u + BΔW_u`, `X₀` on one set of
/// modes and each `ΔW_u` on fresh modes with `[ΔW, ΔWᵀ] = 2ihJ`. `cutoffs`
/// holds one cutoff per time node; `q1`, `q2` are forms over all nodes.
pub fn oracle_multitime_check(
    model: &OqhoModel,
    grid: &TimeGrid,
    cutoffs: &[usize],
    q1: &CMat,
    q2: &CMat,
    tol: f64,
) -> Result<MultiTimeReport> {
    let (n, m) = (model.n(), model.m());
    let len = grid.len();
    if cutoffs.len() != len {
        return Err(Error::Dimension(format!("{} cutoffs for {len} nodes", cutoffs.len())));
    }
    let modes_per = [n / 2, m / 2];
    let mode_count = modes_per[0] + grid.steps() * modes_per[1];
    let dim = cutoffs[0].checked_pow(modes_per[0] as u32).unwrap_or(usize::MAX).saturating_mul(
        cutoffs[1..].iter().map(|d| d.checked_pow(modes_per[1] as u32).unwrap_or(usize::MAX)).fold(1usize, |a, b| a.saturating_mul(b)),
    );
    if dim > DIMENSION_BUDGET {
        return Err(Error::DimensionBudget { dim, budget: DIMENSION_BUDGET });
    }
    let mut modes = Vec::with_capacity(mode_count);
    for (u, &d) in cutoffs.iter().enumerate() {
        for _ in 0..modes_per[usize::from(u > 0)] {
            modes.push(TruncatedMode::new(d)?);
        }
    }
    // coefficients of X(t_u) over the canonical operators, stacked by node
    let width = 2 * mode_count;
    let h = if grid.steps() == 0 { 0.0 } else { grid.step() };
    let e = crate::linalg::expm(&(model.drift() * h))?;
    let lx = canonical_factor(model.theta())?;
    let lw = canonical_factor(model.jmat())? * h.sqrt();
    let bl = model.dispersion().dot(&lw);
    let mut coef = RMat::zeros((n * len, width));
    coef.slice_mut(ndarray::s![..n, ..n]).assign(&lx);
    for u in 0..grid.steps() {
        let prev = coef.slice(ndarray::s![u * n..(u + 1) * n, ..]).to_owned();
        let mut next = e.dot(&prev);
        let col = n + u * m;
        next.slice_mut(ndarray::s![.., col..col + m]).scaled_add(1.0, &bl);
        coef.slice_mut(ndarray::s![(u + 1) * n..(u + 2) * n, ..]).assign(&next);
    }
    let table = discrete_ccr_table(model, grid)?;
    let vars = VariableSet::assemble(modes, &coef, table.clone())?;

    let eye = identity::<C64>(vars.low.len());
    let (mut all, mut equal): (f64, f64) = (0.0, 0.0);
    for a in 0..n * len {
        for b in a + 1..n * len {
            let r = fro(&(vars.projected_commutator(a, b) - &eye * (I * (2.0 * table[[a, b]]))));
            all = all.max(r);
            if a / n == b / n {
                equal = equal.max(r);
            }
        }
    }
    let mut theta_drift: f64 = 0.0;
    let mut continuous_gap: f64 = 0.0;
    for j in 0..len {
        for k in 0..len {
            let blk = table.slice(ndarray::s![j * n..(j + 1) * n, k * n..(k + 1) * n]).to_owned();
            if j == k {
                theta_drift = theta_drift.max(fro(&(&blk - model.theta())));
            }
            let exact = model.ccr_two_point(grid.node(j) - grid.node(k));
            continuous_gap = continuous_gap.max(fro(&(blk - exact)));
        }
    }
    let bracket = oracle_bracket_check(&vars, q1, q2, tol)?;
    let passed = all <= tol && bracket.passed;
    Ok(MultiTimeReport { dim: vars.dim(), ccr_residual: all, equal_time_residual: equal, theta_drift, continuous_gap, bracket, passed })
}
