//! Both directions of the TOE/QEF correspondence on a time grid.
//!
//! Forward: `Ṡ = 2iΛF S` is stepped with exponential midpoints, then
//! `T = S̄⁻¹S = exp(4iΛN)` yields the QEF measure `N`. Inverse:
//! `ΛF = Υ(2i ad_{ΛN})(ΛṄ)`. Every measure at node `u` is supported in
//! `[0, t_u]²`, so all per-node work runs on leading `n(u+1)` blocks.

use std::sync::Arc;

use ndarray::s;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::lie::superop::{mho_superop, sinhc_superop, ups_superop, ad_bound, MHO_MARGIN};
use crate::lie::{exp_panel, log_panel, panel_inverse, CskMatrix, LeadingSolver};
use crate::linalg::{c, fro, spectral_bound, CMat, ColumnExp, RMat, C64, I};
use crate::measure::{atom_measure, atomic_corner_measure, diagonal_lebesgue_measure, CcrKernel, KernelMeasure};
use crate::model::OqhoModel;

/// Largest admissible step norm. The norm is the spectral bound
/// `√(‖G‖₁‖G‖∞)` of the core `G` of the step generator (its rows on the
/// generator's own column support): the full-height column norm of `hΛ`
/// stays of order `T` under refinement and would never certify a step.
pub const STEP_NORM_BOUND: f64 = 1.0;
pub const DEFAULT_LAMBDA_NODES: usize = 16;
pub const DEFAULT_BERNOULLI_ORDER: usize = 24;

/// Time-indexed family of nonanticipative measures `{Q_{t_u}}`.
#[derive(Debug, Clone)]
pub struct MeasurePath {
    grid: TimeGrid,
    n: usize,
    entries: Vec<KernelMeasure>,
    derivatives: Option<Vec<KernelMeasure>>,
}

impl MeasurePath {
    pub fn new(entries: Vec<KernelMeasure>, derivatives: Option<Vec<KernelMeasure>>) -> Result<Self> {
        let first = entries.first().ok_or_else(|| Error::Missing("empty measure path".into()))?;
        let grid = *first.grid();
        let n = first.n();
        if entries.len() != grid.len() {
            return Err(Error::Dimension(format!("path has {} entries for {} nodes", entries.len(), grid.len())));
        }
        let check = |list: &[KernelMeasure]| -> Result<()> {
            for (u, q) in list.iter().enumerate() {
                grid.ensure_same(q.grid())?;
                if q.n() != n {
                    return Err(Error::Dimension(format!("entry {u} has n = {}", q.n())));
                }
                if !q.is_nonanticipative(u) {
                    return Err(Error::InvalidArgument(format!("entry {u} is not supported in [0, t_{u}]²")));
                }
            }
            Ok(())
        };
        check(&entries)?;
        if let Some(d) = &derivatives {
            if d.len() != entries.len() {
                return Err(Error::Dimension("derivative path length mismatch".into()));
            }
            check(d)?;
        }
        let entries = entries.into_iter().enumerate().map(|(u, q)| truncate(q, u)).collect();
        let derivatives = derivatives.map(|d| d.into_iter().enumerate().map(|(u, q)| truncate(q, u)).collect());
        Ok(Self { grid, n, entries, derivatives })
    }

    pub fn zero(grid: TimeGrid, n: usize) -> Self {
        let entries: Vec<_> = (0..grid.len()).map(|_| KernelMeasure::zero(grid, n)).collect();
        Self { grid, n, derivatives: Some(entries.clone()), entries }
    }

    /// `F_t(C) = χ_C((t,t))Π`: the corner atom at every node.
    pub fn atomic(grid: TimeGrid, pi: &RMat) -> Result<Self> {
        let entries = (0..grid.len()).map(|u| atomic_corner_measure(grid, u, pi)).collect::<Result<_>>()?;
        Self::new(entries, None)
    }

    /// `N_t = μ([0,t] ∩ ·)Π` on the diagonal, with the exact derivative
    /// `Ṅ_t` equal to the corner atom.
    pub fn diagonal_lebesgue(grid: TimeGrid, pi: &RMat) -> Result<Self> {
        let entries = (0..grid.len()).map(|u| diagonal_lebesgue_measure(grid, u, pi)).collect::<Result<_>>()?;
        let derivs = (0..grid.len()).map(|u| atomic_corner_measure(grid, u, pi)).collect::<Result<_>>()?;
        Self::new(entries, Some(derivs))
    }

    /// The same measure `q` at every node `u ≥ support(q)`, zero before.
    pub fn constant(grid: TimeGrid, q: &KernelMeasure) -> Result<Self> {
        let entries = (0..grid.len())
            .map(|u| if u >= q.support_index() { q.clone() } else { KernelMeasure::zero(grid, q.n()) })
            .collect();
        Self::new(entries, None)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn entries(&self) -> &[KernelMeasure] {
        &self.entries
    }
    pub fn entry(&self, u: usize) -> &KernelMeasure {
        &self.entries[u]
    }
    pub fn derivatives(&self) -> Option<&[KernelMeasure]> {
        self.derivatives.as_deref()
    }

    /// Replaces the derivatives by backward differences of the entries:
    /// second order for `u ≥ 2`, first order at `u = 1`. At `u = 0` the
    /// forward difference lives on `[0, t_1]²` and its weak limit is a point
    /// mass, so its total mass is lumped onto the corner `(0, 0)`.
    pub fn with_backward_differences(mut self) -> Result<Self> {
        let h = self.grid.step();
        let len = self.entries.len();
        let mut d = Vec::with_capacity(len);
        for u in 0..len {
            let q = if len == 1 {
                KernelMeasure::zero(self.grid, self.n)
            } else if u == 0 {
                let inc = self.entries[1].sub(&self.entries[0])?.scale(c(1.0 / h));
                let mut mass = CMat::zeros((self.n, self.n));
                for j in 0..=inc.support_index() {
                    for k in 0..=inc.support_index() {
                        mass += &inc.block(j, k);
                    }
                }
                atom_measure(self.grid, 0, 0, &mass)?
            } else if u == 1 {
                self.entries[1].sub(&self.entries[0])?.scale(c(1.0 / h))
            } else {
                let a = self.entries[u].scale(c(3.0));
                let b = self.entries[u - 1].scale(c(-4.0));
                a.add(&b)?.add(&self.entries[u - 2])?.scale(c(0.5 / h))
            };
            d.push(truncate(q, u));
        }
        self.derivatives = Some(d);
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(&KernelMeasure) -> KernelMeasure) -> Self {
        Self {
            entries: self.entries.iter().map(&f).collect(),
            derivatives: self.derivatives.as_ref().map(|d| d.iter().map(&f).collect()),
            ..self.clone()
        }
    }

    pub fn scale(&self, z: C64) -> Self {
        self.map(|q| q.scale(z))
    }

    /// `½(F_u + F_{u+1})`, the step measure of the midpoint scheme.
    pub fn midpoint(&self, u: usize) -> Result<KernelMeasure> {
        self.entries[u].combine(c(0.5), &self.entries[u + 1], c(0.5))
    }
}

fn truncate(q: KernelMeasure, u: usize) -> KernelMeasure {
    if q.support_index() <= u {
        return q;
    }
    let lead = q.lead_padded(u);
    KernelMeasure::symmetrized(*q.grid(), q.n(), u, &lead)
}

/// `{S_{t_u}}` or `{T_{t_u}}` with `S₀ = I`.
#[derive(Debug, Clone)]
pub struct CskPath {
    pub entries: Vec<CskMatrix>,
    /// Step norm per step (empty for paths not built by stepping).
    pub step_norms: Vec<f64>,
}

impl CskPath {
    pub fn grid(&self) -> &TimeGrid {
        self.entries[0].grid()
    }
    pub fn last(&self) -> &CskMatrix {
        self.entries.last().expect("nonempty path")
    }
    pub fn max_symplectic_residual(&self) -> f64 {
        self.entries.iter().map(|s| s.symplectic_residual()).fold(0.0, f64::max)
    }
}

fn check_path_kernel(path: &MeasurePath, ccr: &CcrKernel) -> Result<()> {
    ccr.grid().ensure_same(&path.grid)?;
    if ccr.n() != path.n {
        return Err(Error::Dimension(format!("kernel n = {} vs path n = {}", ccr.n(), path.n)));
    }
    Ok(())
}

/// Exponential midpoint scheme `S_{u+1} = exp(2ih·ΛW_mid)·S_u`.
pub fn forward_csk_evolution(f_path: &MeasurePath, ccr: &Arc<CcrKernel>) -> Result<CskPath> {
    check_path_kernel(f_path, ccr)?;
    let grid = f_path.grid;
    let h = grid.step();
    let mut s = CskMatrix::identity(ccr.clone());
    let mut entries = vec![s.clone()];
    let mut step_norms = Vec::with_capacity(grid.steps());
    for u in 0..grid.steps() {
        let w = f_path.midpoint(u)?;
        let l = w.lead_dim();
        let gen = ccr.big_complex().slice(s![.., ..l]).dot(w.lead()) * (I * (2.0 * h));
        let norm = spectral_bound(&gen.slice(s![..l, ..]).to_owned());
        step_norms.push(norm);
        if norm > STEP_NORM_BOUND {
            return Err(Error::StepNorm { node: u, norm, bound: STEP_NORM_BOUND });
        }
        let step = ColumnExp::new(gen.view(), 0)?;
        let prev = s.padded(w.support_index());
        s = CskMatrix::from_cols(ccr.clone(), w.support_index(), step.apply_left(prev.cols()))?;
        entries.push(s.clone());
    }
    Ok(CskPath { entries, step_norms })
}

/// Per-node diagnostics of the forward and inverse solvers.
#[derive(Debug, Clone, Default)]
pub struct NodeReport {
    pub node: usize,
    pub time: f64,
    /// `‖SΛSᵀ − Λ‖_F` of the CSK at this node.
    pub symplectic: f64,
    /// `‖Im W‖_F / (1 + ‖W‖_F)` of the produced measure.
    pub reality: f64,
    /// Relative `‖exp(log T) − T‖` of the leading block.
    pub reconstruction: f64,
    /// `‖W − Wᵀ‖_F` before symmetrization.
    pub asymmetry: f64,
    /// Step norm leading into this node, or the superoperator quadrature estimate.
    pub step: f64,
    /// The logarithm left the principal sheet to follow the anchor.
    pub branch_switch: bool,
}

#[derive(Debug, Clone)]
pub struct ForwardQef {
    pub s_path: CskPath,
    pub t_path: CskPath,
    pub n_path: MeasurePath,
    pub report: Vec<NodeReport>,
}

/// `T_u = S̄_u⁻¹S_u`; the column panel of the product.
fn factor_t(s: &CskMatrix) -> Result<CskMatrix> {
    let cinv = CskMatrix::from_cols(s.ccr().clone(), s.support_index(), panel_inverse(&s.conj().cols().clone())?)?;
    Ok(cinv.mul(s))
}

/// Forward map `F ↦ N` through `T = S̄⁻¹S = exp(4iΛN)`.
pub fn forward_qef_measure(f_path: &MeasurePath, ccr: &Arc<CcrKernel>) -> Result<ForwardQef> {
    let s_path = forward_csk_evolution(f_path, ccr)?;
    let grid = f_path.grid;
    let n = ccr.n();
    let mut solver = LeadingSolver::new(ccr);
    let mut t_entries = Vec::with_capacity(grid.len());
    let mut n_entries: Vec<KernelMeasure> = Vec::with_capacity(grid.len());
    let mut report = Vec::with_capacity(grid.len());
    for (u, s) in s_path.entries.iter().enumerate() {
        let s = s.padded(u);
        let t = factor_t(&s)?;
        // anchor: 4iΛN_{u−1} on the current leading block
        let anchor = n_entries.last().map(|prev| {
            ccr.leading(u).dot(&prev.lead_padded(u)) * (I * 4.0)
        });
        let anchor_panel = anchor.map(|a| {
            let mut p = CMat::zeros((n * grid.len(), n * (u + 1)));
            p.slice_mut(s![..a.nrows(), ..]).assign(&a);
            p
        });
        let log = log_panel(t.cols(), anchor_panel.as_ref(), false).map_err(|e| at_node(e, u))?;
        let rhs = &log.cols * C64::new(0.0, -0.25);
        let (measure, asymmetry) = solver.solve(u, &rhs)?;
        report.push(NodeReport {
            node: u,
            time: grid.node(u),
            symplectic: s.symplectic_residual(),
            reality: measure.imag_norm() / (1.0 + measure.norm()),
            reconstruction: log.residual,
            asymmetry,
            step: if u == 0 { 0.0 } else { s_path.step_norms[u - 1] },
            branch_switch: log.switched_sheet,
        });
        n_entries.push(measure);
        t_entries.push(t);
    }
    let n_path = MeasurePath::new(n_entries, None)?;
    Ok(ForwardQef { s_path, t_path: CskPath { entries: t_entries, step_norms: vec![] }, n_path, report })
}

fn at_node(e: Error, u: usize) -> Error {
    match e {
        Error::BranchAmbiguity { .. } | Error::BranchCrossing { .. } | Error::Reconstruction { .. } => {
            Error::NoConvergence(format!("logarithm at node {u}: {e}"))
        }
        other => other,
    }
}

/// Integration route `S̄ΔT = 4ih·Λ·Re(W_mid)·S` for the QEF kernel, with
/// `S` and `S̄` taken at the step midpoint `½(S_u + S_{u+1})`.
pub fn forward_t_evolution(f_path: &MeasurePath, s_path: &CskPath) -> Result<CskPath> {
    let ccr = s_path.entries[0].ccr().clone();
    check_path_kernel(f_path, &ccr)?;
    let grid = f_path.grid;
    let h = grid.step();
    let mut t = CskMatrix::identity(ccr.clone());
    let mut entries = vec![t.clone()];
    for u in 0..grid.steps() {
        let w = f_path.midpoint(u)?.real_part();
        let v = w.support_index();
        let l = w.lead_dim();
        let sm = (s_path.entries[u].cols_padded(v) + s_path.entries[u + 1].cols_padded(v)) * c(0.5);
        let lam_w = ccr.big_complex().slice(s![.., ..l]).dot(w.lead());
        // (ΛW)·S_m: ΛW vanishes beyond column l, so only S_m's leading rows enter
        let z = lam_w.dot(&sm.slice(s![..l, ..]));
        let cinv = panel_inverse(&sm.mapv(|x| x.conj()))?;
        let mut incr = cinv.dot(&z.slice(s![..l, ..]));
        {
            let mut lower = incr.slice_mut(s![l.., ..]);
            lower += &z.slice(s![l.., ..]);
        }
        let next = t.cols_padded(v) + incr * (I * (4.0 * h));
        t = CskMatrix::from_cols(ccr.clone(), v, next)?;
        entries.push(t.clone());
    }
    Ok(CskPath { entries, step_norms: vec![] })
}

#[derive(Debug, Clone)]
pub struct InverseToe {
    pub f_path: MeasurePath,
    pub report: Vec<NodeReport>,
}

/// Inverse map `N ↦ F` with `ΛF_u = Υ(2i ad_{ΛN_u})(ΛṄ_u)`.
pub fn inverse_toe_measure(n_path: &MeasurePath, ccr: &CcrKernel, lambda_nodes: usize) -> Result<InverseToe> {
    check_path_kernel(n_path, ccr)?;
    let derivs = n_path.derivatives().ok_or_else(|| Error::Missing("derivative entries of the N path".into()))?;
    let grid = n_path.grid;
    let mut solver = LeadingSolver::new(ccr);
    let mut f_entries = Vec::with_capacity(grid.len());
    let mut report = Vec::with_capacity(grid.len());
    for u in 0..grid.len() {
        let lam = ccr.leading(u);
        let x = lam.dot(&n_path.entries[u].lead_padded(u)) * (I * 2.0);
        let y = lam.dot(&derivs[u].lead_padded(u));
        let lf = ups_superop(&x, &y, lambda_nodes)?;
        let (measure, asymmetry) = solver.solve(u, &lf.value)?;
        report.push(NodeReport {
            node: u,
            time: grid.node(u),
            reality: measure.imag_norm() / (1.0 + measure.norm()),
            asymmetry,
            step: lf.error_estimate,
            ..Default::default()
        });
        f_entries.push(measure);
    }
    Ok(InverseToe { f_path: MeasurePath::new(f_entries, None)?, report })
}

/// The QEF-side measure `M_t` and its mass decomposition at node `t_u`.
#[derive(Debug, Clone)]
pub struct PsiMeasure {
    pub measure: KernelMeasure,
    /// Block `(u, u)`: the corner atom plus `O(h)` edge mass.
    pub corner: CMat,
    /// `corner − ½(M_{u,u−1} + M_{u−1,u})`: trapezoid weights put half an edge
    /// cell on the endpoint node, so this strips the edge density.
    pub corner_atom: CMat,
    /// Σ of block Frobenius norms over `j, k < u`.
    pub interior_mass: f64,
    /// Σ over blocks `(u, k)` and `(k, u)`, `k < u`.
    pub edge_mass: f64,
    pub corner_mass: f64,
    /// `‖Im M‖_F`.
    pub imag_norm: f64,
    /// `‖M − Mᵀ‖_F` before symmetrization.
    pub asymmetry: f64,
    pub quadrature_error: f64,
}

/// `ΛM = sinhc(2i ad_{ΛN})(ΛṄ)` at the node `u = support(N)`.
pub fn qef_psi_measure(
    n_entry: &KernelMeasure,
    ndot_entry: &KernelMeasure,
    ccr: &CcrKernel,
    nodes: usize,
) -> Result<PsiMeasure> {
    ccr.grid().ensure_same(n_entry.grid())?;
    ccr.grid().ensure_same(ndot_entry.grid())?;
    let u = n_entry.support_index().max(ndot_entry.support_index());
    let lam = ccr.leading(u);
    let x = lam.dot(&n_entry.lead_padded(u)) * (I * 2.0);
    let y = lam.dot(&ndot_entry.lead_padded(u));
    let lm = sinhc_superop(&x, &y, nodes)?;
    let mut solver = LeadingSolver::new(ccr);
    let (measure, asymmetry) = solver.solve(u, &lm.value)?;
    let n = ccr.n();
    let mut interior = 0.0;
    let mut edge = 0.0;
    for j in 0..=u {
        for k in 0..=u {
            let m = fro(&measure.block(j, k));
            match (j == u, k == u) {
                (false, false) => interior += m,
                (true, true) => {}
                _ => edge += m,
            }
        }
    }
    let corner = measure.lead().slice(s![u * n.., u * n..]).to_owned();
    let corner_atom = if u == 0 {
        corner.clone()
    } else {
        &corner - &((measure.block(u, u - 1) + measure.block(u - 1, u)) * c(0.5))
    };
    Ok(PsiMeasure {
        corner_mass: fro(&corner),
        corner,
        corner_atom,
        interior_mass: interior,
        edge_mass: edge,
        imag_norm: measure.imag_norm(),
        asymmetry,
        quadrature_error: lm.error_estimate,
        measure,
    })
}

/// Forward CSK evolution for the atomic path `F_t = Π` at `(t, t)`.
///
/// The step generator only has the block columns `u` and `u+1`, so
/// `exp(UEᵀ) = I + U φ₁(EᵀU) Eᵀ` turns each step into a rank-`2n` update.
pub fn spde_fast_path(model: &OqhoModel, pi: &RMat, grid: TimeGrid) -> Result<CskPath> {
    let ccr = Arc::new(CcrKernel::build(model, grid));
    spde_fast_path_with_kernel(&ccr, pi)
}

pub fn spde_fast_path_with_kernel(ccr: &Arc<CcrKernel>, pi: &RMat) -> Result<CskPath> {
    // validates Π
    atomic_corner_measure(*ccr.grid(), 0, pi)?;
    let grid = *ccr.grid();
    let n = ccr.n();
    let h = grid.step();
    let half_pi = pi.mapv(|x| c(0.5 * x));
    let mut s = CskMatrix::identity(ccr.clone());
    let mut entries = vec![s.clone()];
    let mut step_norms = Vec::with_capacity(grid.steps());
    for u in 0..grid.steps() {
        let start = u * n;
        let end = (u + 2) * n;
        let lam_cols = ccr.big_complex().slice(s![.., start..end]);
        let mut gen = CMat::zeros((ccr.dim(), 2 * n));
        gen.slice_mut(s![.., ..n]).assign(&lam_cols.slice(s![.., ..n]).dot(&half_pi));
        gen.slice_mut(s![.., n..]).assign(&lam_cols.slice(s![.., n..]).dot(&half_pi));
        gen *= I * (2.0 * h);
        let norm = spectral_bound(&gen.slice(s![start..end, ..]).to_owned());
        step_norms.push(norm);
        if norm > STEP_NORM_BOUND {
            return Err(Error::StepNorm { node: u, norm, bound: STEP_NORM_BOUND });
        }
        let step = ColumnExp::new(gen.view(), start)?;
        let prev = s.padded(u + 1);
        s = CskMatrix::from_cols(ccr.clone(), u + 1, step.apply_left(prev.cols()))?;
        entries.push(s.clone());
    }
    Ok(CskPath { entries, step_norms })
}

#[derive(Debug, Clone)]
pub struct GPath {
    pub g_path: MeasurePath,
    /// `‖4i ad_{ΛG}‖` bound at each evaluation node.
    pub ad_bounds: Vec<f64>,
    /// Tail bound of the truncated Bernoulli series, summed over steps.
    pub series_tail: f64,
}

/// Explicit midpoint integration of `ΛĠ = ½℧(4i ad_{ΛG})(ΛF)`, `G₀ = 0`.
pub fn g_path_magnus(f_path: &MeasurePath, ccr: &CcrKernel, order: usize) -> Result<GPath> {
    check_path_kernel(f_path, ccr)?;
    let grid = f_path.grid;
    let h = grid.step();
    let limit = MHO_MARGIN * 2.0 * std::f64::consts::PI;
    let mut solver = LeadingSolver::new(ccr);
    let mut g = KernelMeasure::zero(grid, ccr.n());
    let mut entries = vec![g.clone()];
    let mut ad_bounds = vec![0.0];
    let mut tail = 0.0;
    for u in 0..grid.steps() {
        let v = u + 1;
        let lam = ccr.leading(v);
        let lg = lam.dot(&g.lead_padded(v));
        let x0 = &lg * (I * 4.0);
        let rate = |x: &CMat, f: &KernelMeasure, node: usize| -> Result<(CMat, f64)> {
            let r = mho_superop(x, &lam.dot(&f.lead_padded(v)), order).map_err(|e| match e {
                Error::SeriesBound { bound, limit, .. } => Error::SeriesBound { bound, limit, node: Some(node) },
                other => other,
            })?;
            Ok((r.value * c(0.5), r.error_estimate * 0.5))
        };
        let (k1, e1) = rate(&x0, &f_path.entries[u], u)?;
        let x_mid = &x0 + &(&k1 * (I * (2.0 * h)));
        let bound = ad_bound(&x_mid);
        if bound >= limit {
            return Err(Error::SeriesBound { bound, limit, node: Some(u) });
        }
        let (k2, e2) = rate(&x_mid, &f_path.midpoint(u)?, u)?;
        tail += h * (e1 + e2);
        let (dg, _) = solver.solve(v, &k2)?;
        g = g.extended(v).add(&dg.scale(c(h)))?;
        ad_bounds.push(ad_bound(&(lam.dot(&g.lead_padded(v)) * (I * 4.0))));
        entries.push(g.clone());
    }
    Ok(GPath { g_path: MeasurePath::new(entries, None)?, ad_bounds, series_tail: tail })
}

/// `‖exp(4iΛG_u) − S_u‖_F / ‖S_u‖_F` per node.
pub fn g_path_cross_check(g: &GPath, s_path: &CskPath) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(s_path.entries.len());
    for (u, s) in s_path.entries.iter().enumerate() {
        let ccr = s.ccr();
        let q = &g.g_path.entries[u];
        let l = q.lead_dim();
        let x = ccr.big_complex().slice(s![.., ..l]).dot(q.lead()) * (I * 4.0);
        let e = CskMatrix::from_cols(ccr.clone(), q.support_index(), exp_panel(&x)?)?;
        out.push(e.distance(s) / fro(&s.mat()));
    }
    Ok(out)
}

/// Result of recovering node masses from Laplace samples of a CHK column.
#[derive(Debug, Clone)]
pub struct LaplaceRecovery {
    /// `Q_{lk}` for `l = 0..=N`.
    pub masses: Vec<CMat>,
    /// Condition number of the moment matrix `e^{−s_k t_l}`.
    pub condition: f64,
    /// Least-squares residual of the moment system.
    pub residual: f64,
}

pub const MOMENT_CONDITION_LIMIT: f64 = 1e12;

/// `s_k = σ + 2πik/((N+1)h)`, `σ = ½|abscissa|`, `k = 0..count`: the moment
/// matrix becomes a scaled discrete Fourier matrix.
pub fn strip_samples(model: &OqhoModel, grid: &TimeGrid, count: usize) -> Vec<C64> {
    let sigma = 0.5 * model.strip_width();
    let period = grid.len() as f64 * grid.step();
    (0..count).map(|k| C64::new(sigma, 2.0 * std::f64::consts::PI * k as f64 / period)).collect()
}

/// `t ↦ Σ_l Λ(t − t_l) Q(t_l, t_k)` on all of ℝ, column `k` of `ΛQ`.
pub fn chk_column_function<'a>(model: &'a OqhoModel, q: &'a KernelMeasure, k: usize) -> impl Fn(f64) -> CMat + 'a {
    move |t: f64| {
        let n = q.n();
        let grid = q.grid();
        let mut acc = CMat::zeros((n, n));
        for l in 0..grid.len() {
            let blk = q.block(l, k);
            if blk.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                continue;
            }
            acc += &model.ccr_two_point(t - grid.node(l)).mapv(c).dot(&blk);
        }
        acc
    }
}

/// Recovers `Q(·, t_k)` from a CHK column `g` via
/// `Λ̂(s)⁻¹ ∫ e^{−st} g(t) dt = Σ_l e^{−s t_l} Q_l`. Experimental.
pub fn laplace_recover_measure(
    column: &dyn Fn(f64) -> CMat,
    model: &OqhoModel,
    s_samples: &[C64],
    grid: &TimeGrid,
    tol: f64,
) -> Result<LaplaceRecovery> {
    use ndarray_linalg::{Determinant, SVD};
    let n = model.n();
    let len = grid.len();
    let diffusion = model.diffusion();
    let det = diffusion.det()?;
    let scale = fro(&diffusion).max(f64::MIN_POSITIVE).powi(n as i32);
    if !(det.abs() > 1e-12 * scale) {
        return Err(Error::Singular(format!("BJBᵀ is singular (det {det:.3e}); measure not recoverable")));
    }
    if s_samples.len() < len {
        return Err(Error::InvalidArgument(format!("{} samples for {len} unknown node masses", s_samples.len())));
    }
    let width = model.strip_width();
    let mut rhs = CMat::zeros((s_samples.len(), n * n));
    for (row, &s) in s_samples.iter().enumerate() {
        let transform = two_sided_transform(column, s, grid, width, tol)?;
        let lhat = model.laplace_lambda(s)?.value;
        let moment = crate::linalg::inverse(&lhat)?.dot(&transform);
        for (i, z) in moment.iter().enumerate() {
            rhs[[row, i]] = *z;
        }
    }
    let v = CMat::from_shape_fn((s_samples.len(), len), |(k, l)| (-s_samples[k] * grid.node(l)).exp());
    let (u_opt, sv, vt_opt) = v.svd(true, true)?;
    let (u, vt) = (u_opt.expect("U"), vt_opt.expect("Vᵀ"));
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = smax / smin;
    if !(condition <= MOMENT_CONDITION_LIMIT) {
        return Err(Error::IllConditioned { condition, limit: MOMENT_CONDITION_LIMIT });
    }
    let mut coef = u.slice(s![.., ..len]).t().mapv(|z| z.conj()).dot(&rhs);
    for (i, mut row) in coef.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|z| z / sv[i]);
    }
    let sol = vt.t().mapv(|z| z.conj()).dot(&coef);
    let residual = fro(&(v.dot(&sol) - &rhs));
    let masses = (0..len)
        .map(|l| CMat::from_shape_fn((n, n), |(i, j)| sol[[l, i * n + j]]))
        .collect();
    Ok(LaplaceRecovery { masses, condition, residual })
}

/// `∫_ℝ e^{−st} g(t) dt` with `g` smooth between grid nodes and decaying
/// exponentially outside `[0, T]`.
fn two_sided_transform(g: &dyn Fn(f64) -> CMat, s: C64, grid: &TimeGrid, width: f64, tol: f64) -> Result<CMat> {
    use crate::quad::adaptive_gk;
    let mut budget = 50_000usize;
    let mut f = |t: f64| g(t) * (-s * t).exp();
    let mut total = CMat::zeros(g(0.0).dim());
    for j in 0..grid.steps() {
        let (v, _) = adaptive_gk(&mut f, grid.node(j), grid.node(j + 1), tol, &mut budget)?;
        total += &v;
    }
    // tails: right decays like e^{−(width + Re s)t}, left like e^{−(width − Re s)|t|}
    for (start, dir, decay) in [(grid.horizon(), 1.0, width + s.re), (0.0, -1.0, width - s.re)] {
        let panel = 1.0 / decay;
        let mut lo = 0.0;
        loop {
            let hi = lo + panel;
            let mut shifted = |x: f64| f(start + dir * x);
            let (v, _) = adaptive_gk(&mut shifted, lo, hi, tol, &mut budget)?;
            total += &v;
            lo = hi;
            if fro(&shifted(hi)) / decay < tol {
                break;
            }
            if lo > 1e4 * panel {
                return Err(Error::NoConvergence("Laplace tail did not decay".into()));
            }
        }
    }
    Ok(total)
}
