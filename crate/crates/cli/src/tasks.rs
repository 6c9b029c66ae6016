//! Task bodies. Each returns the artifacts of a completed run; a library
//! error aborts the run as a numerical failure.

use std::sync::Arc;

use oqho_core::convergence::{emit_convergence, Level};
use oqho_core::fock::{build_single_time, oracle_bracket_check};
use oqho_core::io::fmt_f64;
use oqho_core::lie::{chk_exp, LOG_RECONSTRUCTION_TOL, SYMPLECTIC_TOL};
use oqho_core::linalg::{commutator, fro, to_complex, CMat, RMat, C64, I};
use oqho_core::measure::{bracket, lambda_product, weak_distance};
use oqho_core::solvers::{
    forward_csk_evolution, forward_qef_measure, forward_t_evolution, inverse_toe_measure, qef_psi_measure,
    spde_fast_path_with_kernel,
};
use oqho_core::{CcrKernel, KernelMeasure, MeasurePath, OqhoModel, Result, TimeGrid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::output::{Artifacts, CaseRow, Check, NodeRow, Report, Study};
use crate::scenario::{Driver, Scenario, Task};

/// Realness of computed measures: `‖Im W‖/(1 + ‖W‖)`.
pub const REALITY_TOL: f64 = 1e-9;
/// Agreement of the SPDE fast path with the general solver.
pub const SPDE_TOL: f64 = 1e-10;
pub const HOMOMORPHISM_TOL: f64 = 1e-12;
pub const JACOBI_TOL: f64 = 1e-11;
pub const KERNEL_TOL: f64 = 1e-13;
pub const LAPLACE_TOL: f64 = 1e-6;
pub const ORACLE_TOL: f64 = 1e-8;
/// Errors at or below this floor at every level count as exact.
pub const EXACT_FLOOR: f64 = 1e-13;
pub const ORDER_RANGE: (f64, f64) = (1.7, 2.3);

pub fn run_task(sc: &Scenario, model: &OqhoModel) -> Result<Artifacts> {
    match sc.task {
        Task::Forward => forward(sc, model),
        Task::Inverse => inverse(sc, model),
        Task::Roundtrip => roundtrip(sc, model),
        Task::Spde => spde(sc, model),
        Task::Validate => validate(sc, model),
        Task::Laplace => laplace(sc, model),
        Task::Oracle => oracle(sc, model),
    }
}

fn kernel(sc: &Scenario, model: &OqhoModel, steps: usize) -> Result<Arc<CcrKernel>> {
    Ok(Arc::new(CcrKernel::build(model, TimeGrid::new(sc.horizon, steps)?)))
}

fn pi(sc: &Scenario, n: usize) -> RMat {
    sc.pi.clone().unwrap_or_else(|| RMat::zeros((n, n)))
}

/// The driver path `F` on the kernel's grid.
fn driver_path(sc: &Scenario, ccr: &CcrKernel) -> Result<MeasurePath> {
    let grid = *ccr.grid();
    let p = pi(sc, ccr.n());
    match sc.driver {
        Driver::Zero => Ok(MeasurePath::zero(grid, ccr.n())),
        Driver::Atomic => MeasurePath::atomic(grid, &p),
        Driver::Lebesgue => MeasurePath::diagonal_lebesgue(grid, &p),
        Driver::Class => {
            let n = MeasurePath::diagonal_lebesgue(grid, &p)?;
            Ok(inverse_toe_measure(&n, ccr, sc.lambda_nodes)?.f_path)
        }
    }
}

fn level(sc: &Scenario, steps: usize, error: f64) -> Level {
    Level { steps, h: sc.horizon / steps as f64, error }
}

fn orders_text(study: &Study) -> String {
    let orders: Vec<String> = study.table.orders().iter().map(|p| format!("{p:.3}")).collect();
    format!("orders [{}]", orders.join(", "))
}

/// Adds a study; with a range it also becomes a check on the empirical orders.
fn push_study(art: &mut Artifacts, name: &str, levels: Vec<Level>, range: Option<(f64, f64)>) -> Result<()> {
    if levels.len() < oqho_core::convergence::MIN_LEVELS {
        return Ok(());
    }
    let study = Study { name: name.into(), table: emit_convergence(&levels)? };
    if let Some((lo, hi)) = range {
        let exact = levels.iter().all(|l| l.error <= EXACT_FLOOR);
        let passed = exact || study.table.orders_within(lo, hi);
        let detail = if exact {
            format!("all errors <= {}", fmt_f64(EXACT_FLOOR))
        } else {
            format!("{} within [{lo}, {}]", orders_text(&study), if hi.is_finite() { hi.to_string() } else { "inf".into() })
        };
        art.checks.push(Check { name: format!("{name}_order"), passed, detail });
    } else {
        art.notes.push(format!("{name} {} (diagnostic)", orders_text(&study)));
    }
    art.studies.push(study);
    Ok(())
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn symplectic_bound(ccr: &CcrKernel) -> f64 {
    SYMPLECTIC_TOL * (1.0 + fro(ccr.big()))
}

/// Real drivers yield real `N`; the complex class driver carries no such
/// guarantee, so there the value is only noted.
fn reality_check(sc: &Scenario, art: &mut Artifacts, reality: f64) {
    if sc.driver == Driver::Class {
        art.notes.push(format!("max Im N / (1 + |N|) = {} (complex F)", fmt_f64(reality)));
    } else {
        art.checks.push(Check::at_most("reality", reality, sc.tolerance.unwrap_or(REALITY_TOL)));
    }
}

/// `F ↦ N` with the two routes to `T` compared under refinement.
fn forward(sc: &Scenario, model: &OqhoModel) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let (mut two_route, mut reality) = (Vec::new(), Vec::new());
    for (k, steps) in sc.level_steps().into_iter().enumerate() {
        let ccr = kernel(sc, model, steps)?;
        let f = driver_path(sc, &ccr)?;
        let out = forward_qef_measure(&f, &ccr)?;
        let t_int = forward_t_evolution(&f, &out.s_path)?;
        let terminal = out.n_path.entry(steps);
        two_route.push(level(sc, steps, t_int.last().distance(out.t_path.last())));
        reality.push(level(sc, steps, terminal.imag_norm() / (1.0 + terminal.norm())));
        if k > 0 {
            continue;
        }
        let rows: Vec<NodeRow> = out
            .report
            .iter()
            .map(|r| NodeRow {
                node: r.node,
                time: r.time,
                symplectic: Some(r.symplectic),
                reality: Some(r.reality),
                reconstruction: Some(r.reconstruction),
                cross_route: Some(t_int.entries[r.node].distance(&out.t_path.entries[r.node])),
                asymmetry: Some(r.asymmetry),
                step: Some(r.step),
                branch_switch: Some(r.branch_switch),
                ..Default::default()
            })
            .collect();
        art.checks.push(Check::at_most("symplectic", max_of(rows.iter().filter_map(|r| r.symplectic)), symplectic_bound(&ccr)));
        reality_check(sc, &mut art, max_of(rows.iter().filter_map(|r| r.reality)));
        art.checks.push(Check::at_most(
            "reconstruction",
            max_of(rows.iter().filter_map(|r| r.reconstruction)),
            LOG_RECONSTRUCTION_TOL,
        ));
        if sc.driver == Driver::Zero {
            art.checks.push(Check::at_most("zero_measure", terminal.norm(), 0.0));
        }
        if out.report.iter().any(|r| r.branch_switch) {
            art.notes.push("logarithm followed the anchor off the principal sheet".into());
        }
        art.measures.push(("f_terminal".into(), f.entry(steps).clone()));
        art.measures.push(("n_terminal".into(), terminal.clone()));
        art.report = Report::Nodes(rows);
    }
    push_study(&mut art, "two_route", two_route, Some(ORDER_RANGE))?;
    push_study(&mut art, "reality", reality, None)?;
    Ok(art)
}

/// Diagonal-Lebesgue `N ↦ F`, the QEF-side measure `M` at the horizon, and
/// `forward ∘ inverse` under refinement.
fn inverse(sc: &Scenario, model: &OqhoModel) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let (mut roundtrip, mut atom, mut corner) = (Vec::new(), Vec::new(), Vec::new());
    for (k, steps) in sc.level_steps().into_iter().enumerate() {
        let ccr = kernel(sc, model, steps)?;
        let p = pi(sc, ccr.n());
        let n = MeasurePath::diagonal_lebesgue(*ccr.grid(), &p)?;
        let inv = inverse_toe_measure(&n, &ccr, sc.lambda_nodes)?;
        let back = forward_qef_measure(&inv.f_path, &ccr)?;
        let ndot = &n.derivatives().expect("exact derivatives")[steps];
        let psi = qef_psi_measure(n.entry(steps), ndot, &ccr, sc.lambda_nodes)?;
        let pc = to_complex(&p);
        roundtrip.push(level(sc, steps, weak_distance(back.n_path.entry(steps), n.entry(steps))));
        atom.push(level(sc, steps, fro(&(&psi.corner_atom - &pc))));
        corner.push(level(sc, steps, fro(&(&psi.corner - &pc))));
        if k > 0 {
            continue;
        }
        let rows: Vec<NodeRow> = inv
            .report
            .iter()
            .zip(&back.report)
            .map(|(r, b)| NodeRow {
                node: r.node,
                time: r.time,
                symplectic: Some(b.symplectic),
                reality: Some(r.reality),
                reconstruction: Some(b.reconstruction),
                roundtrip: Some(weak_distance(back.n_path.entry(r.node), n.entry(r.node))),
                asymmetry: Some(r.asymmetry),
                step: Some(r.step),
                branch_switch: Some(b.branch_switch),
                ..Default::default()
            })
            .collect();
        let tol = sc.tolerance.unwrap_or(REALITY_TOL);
        art.checks.push(Check::at_most("symplectic", max_of(rows.iter().filter_map(|r| r.symplectic)), symplectic_bound(&ccr)));
        // F is complex in general; only Ψ is asserted real
        art.notes.push(format!("max Im F / (1 + |F|) = {}", fmt_f64(max_of(rows.iter().filter_map(|r| r.reality)))));
        art.checks.push(Check::at_most("psi_imaginary", psi.imag_norm, tol));
        art.checks.push(Check::at_most("psi_asymmetry", psi.asymmetry, tol));
        let masses = [psi.interior_mass, psi.edge_mass, psi.corner_mass];
        art.checks.push(Check {
            name: "psi_masses".into(),
            passed: masses.iter().all(|m| m.is_finite()),
            detail: format!(
                "interior {} edge {} corner {}",
                fmt_f64(psi.interior_mass),
                fmt_f64(psi.edge_mass),
                fmt_f64(psi.corner_mass)
            ),
        });
        art.measures.push(("n_terminal".into(), n.entry(steps).clone()));
        art.measures.push(("f_terminal".into(), inv.f_path.entry(steps).clone()));
        art.measures.push(("psi_terminal".into(), psi.measure.clone()));
        art.report = Report::Nodes(rows);
    }
    push_study(&mut art, "forward_of_inverse", roundtrip, Some(ORDER_RANGE))?;
    push_study(&mut art, "corner_atom", atom, Some((1.0, f64::INFINITY)))?;
    push_study(&mut art, "corner_block", corner, None)?;
    Ok(art)
}

/// `F → N → F' → N'` with `Ṅ` from backward differences. On the class
/// driver `F' = F` is checked; otherwise `F'` is only another member of the
/// class of `F`, so the check is `N' = N`.
fn roundtrip(sc: &Scenario, model: &OqhoModel) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let (mut f_side, mut n_side) = (Vec::new(), Vec::new());
    for (k, steps) in sc.level_steps().into_iter().enumerate() {
        let ccr = kernel(sc, model, steps)?;
        let f = driver_path(sc, &ccr)?;
        let fwd = forward_qef_measure(&f, &ccr)?;
        let n = fwd.n_path.clone().with_backward_differences()?;
        let inv = inverse_toe_measure(&n, &ccr, sc.lambda_nodes)?;
        let back = forward_qef_measure(&inv.f_path, &ccr)?;
        f_side.push(level(sc, steps, weak_distance(inv.f_path.entry(steps), f.entry(steps))));
        n_side.push(level(sc, steps, weak_distance(back.n_path.entry(steps), n.entry(steps))));
        if k > 0 {
            continue;
        }
        let rows: Vec<NodeRow> = fwd
            .report
            .iter()
            .zip(&inv.report)
            .map(|(r, i)| NodeRow {
                node: r.node,
                time: r.time,
                symplectic: Some(r.symplectic),
                reality: Some(r.reality),
                reconstruction: Some(r.reconstruction),
                roundtrip: Some(weak_distance(inv.f_path.entry(r.node), f.entry(r.node))),
                cross_route: Some(weak_distance(back.n_path.entry(r.node), n.entry(r.node))),
                asymmetry: Some(r.asymmetry.max(i.asymmetry)),
                step: Some(r.step),
                branch_switch: Some(r.branch_switch),
            })
            .collect();
        art.checks.push(Check::at_most("symplectic", max_of(rows.iter().filter_map(|r| r.symplectic)), symplectic_bound(&ccr)));
        reality_check(sc, &mut art, max_of(rows.iter().filter_map(|r| r.reality)));
        art.measures.push(("f_initial".into(), f.entry(steps).clone()));
        art.measures.push(("n_forward".into(), n.entry(steps).clone()));
        art.measures.push(("f_recovered".into(), inv.f_path.entry(steps).clone()));
        art.report = Report::Nodes(rows);
    }
    let (f_range, n_range) = match sc.driver {
        Driver::Class => (Some(ORDER_RANGE), None),
        _ => (None, Some(ORDER_RANGE)),
    };
    push_study(&mut art, "inverse_of_forward", f_side, f_range)?;
    push_study(&mut art, "forward_of_inverse_of_forward", n_side, n_range)?;
    Ok(art)
}

/// Rank-`2n` SPDE steps against the general solver on the atomic driver.
fn spde(sc: &Scenario, model: &OqhoModel) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let mut worst = 0.0f64;
    for (k, steps) in sc.level_steps().into_iter().enumerate() {
        let ccr = kernel(sc, model, steps)?;
        let p = pi(sc, ccr.n());
        let fast = spde_fast_path_with_kernel(&ccr, &p)?;
        let general = forward_csk_evolution(&MeasurePath::atomic(*ccr.grid(), &p)?, &ccr)?;
        let rel: Vec<f64> =
            fast.entries.iter().zip(&general.entries).map(|(a, b)| a.distance(b) / fro(&b.mat())).collect();
        worst = worst.max(max_of(rel.iter().copied()));
        if k > 0 {
            continue;
        }
        let rows: Vec<NodeRow> = fast
            .entries
            .iter()
            .enumerate()
            .map(|(u, s)| NodeRow {
                node: u,
                time: ccr.grid().node(u),
                symplectic: Some(s.symplectic_residual()),
                cross_route: Some(rel[u]),
                step: Some(if u == 0 { 0.0 } else { fast.step_norms[u - 1] }),
                ..Default::default()
            })
            .collect();
        art.checks.push(Check::at_most("symplectic", max_of(rows.iter().filter_map(|r| r.symplectic)), symplectic_bound(&ccr)));
        art.measures.push(("f_terminal".into(), oqho_core::measure::atomic_corner_measure(*ccr.grid(), steps, &p)?));
        art.report = Report::Nodes(rows);
    }
    art.checks.push(Check::at_most("spde_agreement", worst, sc.tolerance.unwrap_or(SPDE_TOL)));
    Ok(art)
}

fn random_cmat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_shape_fn((rows, cols), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Complex symmetric measure on `[0, t_support]²` with uniform entries.
fn random_measure(ccr: &CcrKernel, support: usize, rng: &mut ChaCha8Rng) -> Result<KernelMeasure> {
    let l = ccr.n() * (support + 1);
    let raw = random_cmat(l, l, rng);
    KernelMeasure::from_lead(*ccr.grid(), ccr.n(), support, (&raw + &raw.t()) * C64::new(0.5, 0.0))
}

fn generator(ccr: &CcrKernel, q: &KernelMeasure) -> CMat {
    ccr.big_complex().dot(&q.weights()) * (I * 4.0)
}

/// Model checks and the kernel-measure algebra on seeded random measures.
fn validate(sc: &Scenario, model: &OqhoModel) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let mut rows = Vec::new();
    let ccr = kernel(sc, model, sc.steps)?;
    let n = ccr.n();
    art.checks.push(Check::at_most("pr_residual", model.check_pr(), model.pr_tolerance()));
    art.checks.push(Check {
        name: "hurwitz".into(),
        passed: model.spectral_abscissa() < 0.0,
        detail: format!("abscissa {} < 0", fmt_f64(model.spectral_abscissa())),
    });
    let scale = 1.0 + fro(ccr.big());
    art.checks.push(Check::at_most("ccr_antisymmetry", ccr.antisymmetry_residual(), KERNEL_TOL * scale));
    let diag = max_of((0..ccr.grid().len()).map(|j| fro(&(ccr.block(j, j) - model.theta()))));
    art.checks.push(Check::at_most("lambda_zero", diag, KERNEL_TOL * (1.0 + fro(model.theta()))));
    let mut rng = sc.rng();
    let steps = sc.steps;
    let hom_tol = sc.tolerance.unwrap_or(HOMOMORPHISM_TOL);
    for case in 0..sc.cases {
        let (s1, s2) = (rng.random_range(0..=steps), rng.random_range(0..=steps));
        let q1 = random_measure(&ccr, s1, &mut rng)?;
        let q2 = random_measure(&ccr, s2, &mut rng)?;
        let q = bracket(&q1, &q2, &ccr)?;
        let rhs = commutator(&generator(&ccr, &q1), &generator(&ccr, &q2));
        let err = fro(&(generator(&ccr, &q) - &rhs)) / fro(&rhs).max(f64::MIN_POSITIVE);
        rows.push(CaseRow { case, kind: "homomorphism", value: err, bound: hom_tol });
        let q3 = random_measure(&ccr, steps, &mut rng)?;
        let cyc = |a: &KernelMeasure, b: &KernelMeasure, c: &KernelMeasure| -> Result<CMat> {
            Ok(bracket(a, &bracket(b, c, &ccr)?, &ccr)?.weights())
        };
        let (x, y, z) = (cyc(&q1, &q2, &q3)?, cyc(&q2, &q3, &q1)?, cyc(&q3, &q1, &q2)?);
        let jscale = fro(&x).max(fro(&y)).max(fro(&z)).max(f64::MIN_POSITIVE);
        rows.push(CaseRow { case, kind: "jacobi", value: fro(&(&x + &y + &z)) / jscale, bound: JACOBI_TOL });
        // exp(4iΛQ) with ‖4iΛQ‖_F = 1
        let g = fro(&generator(&ccr, &q1));
        let h = lambda_product(&ccr, &q1)?;
        let s = chk_exp(&h, I * (4.0 / g), &ccr)?;
        rows.push(CaseRow { case, kind: "symplectic", value: s.symplectic_residual(), bound: symplectic_bound(&ccr) });
        if case == 0 {
            art.measures.push(("bracket_case0".into(), q));
        }
    }
    for kind in ["homomorphism", "jacobi", "symplectic"] {
        let of_kind: Vec<&CaseRow> = rows.iter().filter(|r| r.kind == kind).collect();
        let worst = max_of(of_kind.iter().map(|r| r.value));
        art.checks.push(Check {
            name: kind.into(),
            passed: of_kind.iter().all(|r| r.passed()),
            detail: format!("worst {} over {} cases", fmt_f64(worst), of_kind.len()),
        });
    }
    art.notes.push(format!("n = {n}, m = {}, condition(Θ) = {}", model.m(), fmt_f64(model.theta_condition())));
    art.report = Report::Cases(rows);
    Ok(art)
}

/// Rational `Λ̂(s)` against adaptive quadrature at seeded strip points.
fn laplace(sc: &Scenario, model: &OqhoModel) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let mut rng = sc.rng();
    let width = model.strip_width();
    let tol = sc.tolerance.unwrap_or(LAPLACE_TOL);
    let mut rows = Vec::new();
    for case in 0..sc.laplace_samples {
        let s = C64::new(width * rng.random_range(0.1..0.9), rng.random_range(-3.0..3.0));
        let rational = model.laplace_lambda(s)?.value;
        let (quad, _) = model.laplace_lambda_quadrature(s, 1e-10)?;
        let err = fro(&(&rational - &quad)) / fro(&quad).max(f64::MIN_POSITIVE);
        rows.push(CaseRow { case, kind: "laplace", value: err, bound: tol });
    }
    art.checks.push(Check {
        name: "laplace".into(),
        passed: rows.iter().all(CaseRow::passed),
        detail: format!("worst {} over {} strip points", fmt_f64(max_of(rows.iter().map(|r| r.value))), rows.len()),
    });
    art.notes.push(format!("strip 0 < Re s < {}", fmt_f64(width)));
    art.report = Report::Cases(rows);
    Ok(art)
}

/// `q` with `‖q‖_F` uniform in `(0, 1]`; symmetric unless `antisymmetric`.
fn random_form(n: usize, antisymmetric: bool, rng: &mut ChaCha8Rng) -> CMat {
    let raw = random_cmat(n, n, rng);
    let q = if antisymmetric { raw } else { (&raw + &raw.t()) * C64::new(0.5, 0.0) };
    let radius = rng.random_range(0.05..=1.0);
    &q * C64::new(radius / fro(&q), 0.0)
}

/// Single-time Fock-space oracle; odd cases carry an antisymmetric part.
fn oracle(sc: &Scenario, model: &OqhoModel) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let vars = build_single_time(model.theta(), sc.cutoff)?;
    let n = model.n();
    let tol = sc.tolerance.unwrap_or(ORACLE_TOL);
    let mut rng = sc.rng();
    let mut rows = Vec::new();
    for case in 0..sc.cases {
        let q1 = random_form(n, case % 2 == 1, &mut rng);
        let q2 = random_form(n, false, &mut rng);
        let report = oracle_bracket_check(&vars, &q1, &q2, tol)?;
        rows.push(CaseRow { case, kind: "bracket", value: report.residual, bound: tol });
        if let Some(r) = report.scalar_remainder {
            rows.push(CaseRow { case, kind: "remainder", value: (r.measured - r.expected).norm(), bound: tol });
            rows.push(CaseRow { case, kind: "remainder_scalar", value: r.deviation, bound: tol });
        }
    }
    art.checks.push(Check::at_most("ccr_low_levels", vars.ccr_residual(), tol));
    for kind in ["bracket", "remainder", "remainder_scalar"] {
        let of_kind: Vec<&CaseRow> = rows.iter().filter(|r| r.kind == kind).collect();
        if of_kind.is_empty() {
            continue;
        }
        art.checks.push(Check {
            name: kind.into(),
            passed: of_kind.iter().all(|r| r.passed()),
            detail: format!("worst {} over {} cases", fmt_f64(max_of(of_kind.iter().map(|r| r.value))), of_kind.len()),
        });
    }
    art.notes.push(format!("cutoff {} on {} mode(s), {} low-level basis states", sc.cutoff, n / 2, vars.low_levels().len()));
    art.report = Report::Cases(rows);
    Ok(art)
}
