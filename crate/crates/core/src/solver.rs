//! Barrier checks, the monotone inner solver, the penalized outer iteration
//! for general PMC functions, and the quasi-decreasing constructions.
//!
//! The outer iteration solves, for `m = 2, 3, ...`, the monotone problems
//! `L_{F_m}(u_m) = 0` with `F_m = h(r) H - gamma (r - u_{m-1})`, starting from
//! the lower barrier `u_1`. With `gamma` chosen so that `-d(hH)/dr + gamma >= 1`
//! every `F_m` is decreasing in `r`, the iterates increase between the
//! barriers, and the penalty vanishes in the limit.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::{mean_curvature_product, node_gradient};
use crate::error::{Error, Result};
use crate::geometry::{jacobi_residual, theta_field, ConformalFactor};
use crate::grid::{sup_norm, BaseGrid, GridSpec, ScalarField, Topology};
use crate::linalg::SparseMatrix;
use crate::pmc::{
    check_monotone, check_quasi_decreasing, pmc_residual, residual_row, NodalPmc, Pmc, PmcArg,
    PmcJet, QuasiDecomposition, SampleLattice, WorkingBox,
};

/// Ordered lower and upper barrier. On Dirichlet grids the boundary trace is
/// taken from `u1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BarrierPair {
    pub u1: ScalarField,
    pub u0: ScalarField,
}

impl BarrierPair {
    /// Requires `u1 < u0` at interior nodes and `u1 <= u0` on the boundary.
    pub fn new(u1: ScalarField, u0: ScalarField) -> Result<Self> {
        u1.check_same_grid(&u0)?;
        let grid = u1.grid().clone();
        for &k in grid.interior_nodes() {
            if u1.values()[k] >= u0.values()[k] {
                return Err(Error::BarrierOrder {
                    node: k,
                    u1: u1.values()[k],
                    u0: u0.values()[k],
                });
            }
        }
        for &k in grid.boundary_nodes() {
            if u1.values()[k] > u0.values()[k] + 1e-12 {
                return Err(Error::BarrierOrder {
                    node: k,
                    u1: u1.values()[k],
                    u0: u0.values()[k],
                });
            }
        }
        Ok(BarrierPair { u1, u0 })
    }

    /// Barriers that may touch in the interior (the degenerate pair of a
    /// vanishing bound); only `u1 <= u0` is required.
    pub fn new_touching(u1: ScalarField, u0: ScalarField) -> Result<Self> {
        u1.check_same_grid(&u0)?;
        for (k, (a, b)) in u1.values().iter().zip(u0.values()).enumerate() {
            if a > b {
                return Err(Error::BarrierOrder {
                    node: k,
                    u1: *a,
                    u0: *b,
                });
            }
        }
        Ok(BarrierPair { u1, u0 })
    }

    pub fn grid(&self) -> &Arc<BaseGrid> {
        self.u1.grid()
    }

    /// Boundary trace `psi`, in the order of [`BaseGrid::boundary_nodes`].
    pub fn psi(&self) -> Vec<f64> {
        self.grid()
            .boundary_nodes()
            .iter()
            .map(|&k| self.u1.values()[k])
            .collect()
    }

    /// Largest boundary gap `|u1 - u0|`.
    pub fn boundary_mismatch(&self) -> f64 {
        self.grid()
            .boundary_nodes()
            .iter()
            .map(|&k| (self.u1.values()[k] - self.u0.values()[k]).abs())
            .fold(0.0, f64::max)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.u1.min(), self.u0.max())
    }
}

/// Solver settings. Every field has a default, so configs may override any subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Residual sup-norm at which an inner solve has converged.
    pub tol_inner: f64,
    /// Iterate sup-distance at which the outer iteration stops.
    pub tol_outer: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    /// Budget of the pseudo-time fallback.
    pub max_pseudo_steps: usize,
    pub armijo_c: f64,
    pub min_step: f64,
    /// Explicit penalty constant; sampled when absent.
    pub gamma: Option<f64>,
    /// Explicit `[c1, c2]`; barrier range widened by 10% when absent.
    pub cutoff: Option<[f64; 2]>,
    /// Samples per axis of the lattice that certifies `gamma`.
    pub gamma_samples: usize,
    /// Samples per axis of the monotonicity check of each inner problem.
    pub monotone_samples: usize,
    /// `C` in the barrier tolerance `1e-8 + C h^2`.
    pub barrier_allowance: f64,
    pub theta_threshold: f64,
    pub monotone_tol: f64,
    pub monotone_abort: f64,
    /// Re-solve quasi-decreasing problems on the halved grid.
    pub refinement_check: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol_inner: 1e-10,
            tol_outer: 1e-8,
            max_newton: 50,
            max_outer: 200,
            max_pseudo_steps: 500,
            armijo_c: 1e-4,
            min_step: 2f64.powi(-20),
            gamma: None,
            cutoff: None,
            gamma_samples: 17,
            monotone_samples: 5,
            barrier_allowance: 10.0,
            theta_threshold: 1e-3,
            monotone_tol: 1e-9,
            monotone_abort: 1e-6,
            refinement_check: true,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_inner", self.tol_inner),
            ("tol_outer", self.tol_outer),
            ("armijo_c", self.armijo_c),
            ("min_step", self.min_step),
            ("theta_threshold", self.theta_threshold),
            ("monotone_tol", self.monotone_tol),
            ("monotone_abort", self.monotone_abort),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "solver.{name} must be positive, got {v}"
                )));
            }
        }
        if self.barrier_allowance < 0.0 {
            return Err(Error::Config(
                "solver.barrier_allowance must be non-negative".into(),
            ));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!(
                    "solver.gamma must be positive, got {g}"
                )));
            }
        }
        if let Some([c1, c2]) = self.cutoff {
            if !(c1 < c2) {
                return Err(Error::Config(format!(
                    "solver.cutoff needs c1 < c2, got [{c1}, {c2}]"
                )));
            }
        }
        if self.max_newton == 0
            || self.max_outer == 0
            || self.gamma_samples < 2
            || self.monotone_samples < 2
        {
            return Err(Error::Config(
                "solver iteration counts and sample counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Worst residual of one barrier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WorstResidual {
    pub node: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierReport {
    pub pass: bool,
    /// Largest interior `L_H(u1)`; must be `<= tolerance`.
    pub worst_sub: WorstResidual,
    /// Smallest interior `L_H(u0)`; must be `>= -tolerance`.
    pub worst_super: WorstResidual,
    pub tolerance: f64,
    pub allowance_constant: f64,
}

/// Checks `L_H(u1) <= tol` and `L_H(u0) >= -tol` at interior nodes, with
/// `tol = 1e-8 + C h^2`. With a factor, the conformal mean curvature is used.
pub fn check_barrier<F: NodalPmc + ?Sized>(
    b: &BarrierPair,
    h: &F,
    factor: Option<(&ConformalFactor, usize)>,
    allowance: f64,
) -> Result<BarrierReport> {
    let grid = b.grid();
    let n = factor.map_or(grid.dim(), |(_, n)| n);
    let f = factor.map(|(f, _)| f);
    let r1 = pmc_residual(&b.u1, h, f, n, None)?;
    let r0 = pmc_residual(&b.u0, h, f, n, None)?;
    let first = grid.interior_nodes().first().copied().unwrap_or(0);
    let mut sub = WorstResidual {
        node: first,
        value: f64::NEG_INFINITY,
    };
    let mut sup = WorstResidual {
        node: first,
        value: f64::INFINITY,
    };
    for &k in grid.interior_nodes() {
        if r1.values()[k] > sub.value {
            sub = WorstResidual {
                node: k,
                value: r1.values()[k],
            };
        }
        if r0.values()[k] < sup.value {
            sup = WorstResidual {
                node: k,
                value: r0.values()[k],
            };
        }
    }
    let hmax = grid.max_spacing();
    let tolerance = 1e-8 + allowance * hmax * hmax;
    Ok(BarrierReport {
        pass: sub.value <= tolerance && sup.value >= -tolerance,
        worst_sub: sub,
        worst_super: sup,
        tolerance,
        allowance_constant: allowance,
    })
}

/// Smooth cutoff `h(r)`: 1 on `[c1, c2]`, 0 outside `[a', b']` with
/// `a' = (a + c1)/2`, `b' = (c2 + b)/2`, quintic smoothstep ramps between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cutoff {
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
    pub b: f64,
}

pub fn cutoff_profile(c1: f64, c2: f64, a: f64, b: f64) -> Result<Cutoff> {
    if !(a < c1 && c1 < c2 && c2 < b) {
        return Err(Error::Config(format!(
            "cutoff needs a < c1 < c2 < b, got a={a}, c1={c1}, c2={c2}, b={b}"
        )));
    }
    Ok(Cutoff { a, c1, c2, b })
}

impl Cutoff {
    pub fn ramp_start(&self) -> f64 {
        0.5 * (self.a + self.c1)
    }

    pub fn ramp_end(&self) -> f64 {
        0.5 * (self.c2 + self.b)
    }

    /// `(h(r), h'(r))`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let step = |tau: f64| {
            let t2 = tau * tau;
            (
                t2 * tau * (10.0 - 15.0 * tau + 6.0 * t2),
                30.0 * t2 * (1.0 - tau) * (1.0 - tau),
            )
        };
        let (lo, hi) = (self.ramp_start(), self.ramp_end());
        if (self.c1..=self.c2).contains(&r) {
            (1.0, 0.0)
        } else if r <= lo || r >= hi {
            (0.0, 0.0)
        } else if r < self.c1 {
            let w = self.c1 - lo;
            let (s, ds) = step((r - lo) / w);
            (s, ds / w)
        } else {
            let w = hi - self.c2;
            let (s, ds) = step((hi - r) / w);
            (s, -ds / w)
        }
    }
}

/// Penalty constant with the lattice sample that certifies it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaCertificate {
    pub gamma: f64,
    /// Sampled sup of `d(hH)/dr`.
    pub sup_derivative: f64,
    pub worst_point: PmcArg,
    pub worst_node: usize,
    /// Sampled min of `-d(hH)/dr + gamma`; at least 1 when the certificate holds.
    pub min_margin: f64,
    pub samples: usize,
}

impl GammaCertificate {
    pub fn holds(&self) -> bool {
        self.min_margin >= 1.0
    }
}

fn cutoff_derivative(jet: &PmcJet, c: (f64, f64)) -> f64 {
    c.1 * jet.value + c.0 * jet.d_z
}

fn cutoff_jet<F: NodalPmc + ?Sized>(
    h: &F,
    cutoff: &Cutoff,
    node: usize,
    p: &PmcArg,
) -> (PmcJet, (f64, f64)) {
    let c = cutoff.eval(p.z);
    if c == (0.0, 0.0) {
        // H need not be defined where the cutoff vanishes
        return (PmcJet::default(), c);
    }
    (h.jet_at(node, p), c)
}

/// `gamma = 1 + 1.05 max(0, sup d(hH)/dr)` over a deterministic lattice of
/// the working box.
pub fn gamma_for<F: NodalPmc + ?Sized>(
    h: &F,
    cutoff: &Cutoff,
    grid: &BaseGrid,
    working: &WorkingBox,
    samples: usize,
) -> Result<GammaCertificate> {
    let lattice = SampleLattice::new(grid, working.lo, working.hi, samples);
    let mut worst: Option<(f64, usize, PmcArg)> = None;
    lattice.for_each(grid, |k, p| {
        let (jet, c) = cutoff_jet(h, cutoff, k, &p);
        let d = cutoff_derivative(&jet, c);
        if !d.is_finite() {
            return Err(Error::Evaluation {
                what: "d(hH)/dr".into(),
                point: p.to_string(),
            });
        }
        if worst.is_none_or(|(w, _, _)| d > w) {
            worst = Some((d, k, p));
        }
        Ok(())
    })?;
    let (sup, node, point) = worst.expect("lattice is never empty");
    let gamma = 1.0 + 1.05 * sup.max(0.0);
    Ok(GammaCertificate {
        gamma,
        sup_derivative: sup,
        worst_point: point,
        worst_node: node,
        min_margin: gamma - sup,
        samples: lattice.len(),
    })
}

/// Checks `-d(hH)/dr + gamma >= 1` on the lattice for a given `gamma`.
pub fn certify_gamma<F: NodalPmc + ?Sized>(
    h: &F,
    cutoff: &Cutoff,
    grid: &BaseGrid,
    working: &WorkingBox,
    samples: usize,
    gamma: f64,
) -> Result<GammaCertificate> {
    let mut c = gamma_for(h, cutoff, grid, working, samples)?;
    c.gamma = gamma;
    c.min_margin = gamma - c.sup_derivative;
    Ok(c)
}

/// `F_m(x, r, Y, t) = h(r) H(x, r, Y, t) - gamma (r - anchor(x))`.
pub struct Penalized<'a, F: ?Sized> {
    pub h: &'a F,
    pub cutoff: Cutoff,
    pub gamma: f64,
    pub anchor: &'a [f64],
}

impl<F: NodalPmc + ?Sized> NodalPmc for Penalized<'_, F> {
    fn jet_at(&self, node: usize, p: &PmcArg) -> PmcJet {
        let (j, c) = cutoff_jet(self.h, &self.cutoff, node, p);
        PmcJet {
            value: c.0 * j.value - self.gamma * (p.z - self.anchor[node]),
            d_z: cutoff_derivative(&j, c) - self.gamma,
            d_y: [c.0 * j.d_y[0], c.0 * j.d_y[1]],
            d_t: c.0 * j.d_t,
        }
    }
}

/// Why a solve stopped, with everything computed up to that point.
#[derive(Debug, thiserror::Error)]
#[error("solve failed: {reason}")]
pub struct SolveFailure {
    pub reason: String,
    pub best_iterate: Option<ScalarField>,
    pub residual_history: Vec<f64>,
    pub report: Option<SolveReport>,
}

impl SolveFailure {
    fn inner(reason: String, best: &ScalarField, history: Vec<f64>) -> Error {
        Error::Solve(Box::new(SolveFailure {
            reason,
            best_iterate: Some(best.clone()),
            residual_history: history,
            report: None,
        }))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InnerReport {
    pub newton_steps: usize,
    pub pseudo_steps: usize,
    /// Residual sup-norm after every accepted step, starting with the initial one.
    pub residual_history: Vec<f64>,
}

fn residual_and_jacobian<F: NodalPmc + ?Sized>(
    grid: &BaseGrid,
    values: &[f64],
    f: &F,
    jacobian: bool,
) -> Result<(Vec<f64>, Option<SparseMatrix>)> {
    let mut r = vec![0.0; grid.len()];
    let mut jac = jacobian.then(|| SparseMatrix::new(grid.len()));
    for &k in grid.boundary_nodes() {
        if let Some(j) = jac.as_mut() {
            j.add(k, k, 1.0);
        }
    }
    for &k in grid.interior_nodes() {
        let (v, stencil, _) = residual_row(grid, values, k, f);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: "PMC residual".into(),
                point: format!("node {k}"),
            });
        }
        r[k] = v;
        if let Some(j) = jac.as_mut() {
            for (c, w) in stencil.iter() {
                j.add(k, c, w);
            }
        }
    }
    Ok((r, jac))
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Damped Newton on `L_F(u) = 0` for a monotone `F`, boundary nodes held at
/// `psi` (taken from `init` when `None`). Falls back to pseudo-time stepping
/// with switched evolution relaxation when the line search stalls.
pub fn solve_inner<F: NodalPmc + ?Sized>(
    f: &F,
    init: &ScalarField,
    psi: Option<&[f64]>,
    working: &WorkingBox,
    cfg: &SolveConfig,
) -> Result<(ScalarField, InnerReport)> {
    let grid = init.grid().clone();
    let mono = check_monotone(f, &grid, working, cfg.monotone_samples)?;
    if !mono.pass {
        return Err(Error::NotMonotone {
            value: mono.worst_value,
            point: mono.worst_point.to_string(),
        });
    }
    let mut u = init.values().to_vec();
    if let Some(psi) = psi {
        if psi.len() != grid.boundary_nodes().len() {
            return Err(Error::Barrier(format!(
                "boundary trace has {} values, grid has {} boundary nodes",
                psi.len(),
                grid.boundary_nodes().len()
            )));
        }
        for (&k, &v) in grid.boundary_nodes().iter().zip(psi) {
            u[k] = v;
        }
    }
    let in_box = |v: &[f64]| v.iter().all(|&z| working.contains(z));
    if !in_box(&u) {
        return Err(Error::OutsideBox {
            lo: working.lo,
            hi: working.hi,
            nodes: (0..u.len()).filter(|&k| !working.contains(u[k])).collect(),
        });
    }
    let (mut r, _) = residual_and_jacobian(&grid, &u, f, false)?;
    let mut report = InnerReport {
        residual_history: vec![sup(&r)],
        ..Default::default()
    };
    let field = |u: Vec<f64>| ScalarField::from_vec(grid.clone(), u);

    let trial = |u: &[f64], du: &[f64], lambda: f64| -> Option<(Vec<f64>, Vec<f64>)> {
        let cand: Vec<f64> = u.iter().zip(du).map(|(a, d)| a + lambda * d).collect();
        if !in_box(&cand) {
            return None;
        }
        residual_and_jacobian(&grid, &cand, f, false)
            .ok()
            .map(|(r, _)| (cand, r))
    };

    let mut stalled = false;
    while sup(&r) > cfg.tol_inner {
        if report.newton_steps >= cfg.max_newton {
            stalled = true;
            break;
        }
        let (_, jac) = residual_and_jacobian(&grid, &u, f, true)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let du = jac.expect("assembled").solve(&rhs)?;
        let r2 = l2_sq(&r);
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda >= cfg.min_step {
            if let Some((cand, rc)) = trial(&u, &du, lambda) {
                if l2_sq(&rc) <= (1.0 - 2.0 * cfg.armijo_c * lambda) * r2 {
                    accepted = Some((cand, rc));
                    break;
                }
            }
            lambda *= 0.5;
        }
        report.newton_steps += 1;
        match accepted {
            Some((cand, rc)) => {
                u = cand;
                r = rc;
                report.residual_history.push(sup(&r));
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    if !stalled {
        return Ok((field(u), report));
    }

    // pseudo-time continuation: (J + I/dtau) du = -R
    let h = grid.min_spacing();
    let mut dtau = h * h;
    while sup(&r) > cfg.tol_inner {
        if report.pseudo_steps >= cfg.max_pseudo_steps || dtau < 1e-14 * h * h {
            let history = report.residual_history.clone();
            return Err(SolveFailure::inner(
                format!(
                    "inner solve stagnated at residual {:.3e} after {} Newton and {} pseudo-time steps",
                    sup(&r),
                    report.newton_steps,
                    report.pseudo_steps
                ),
                &field(u),
                history,
            ));
        }
        let (_, jac) = residual_and_jacobian(&grid, &u, f, true)?;
        let mut jac = jac.expect("assembled");
        for &k in grid.interior_nodes() {
            jac.add(k, k, 1.0 / dtau);
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        report.pseudo_steps += 1;
        let du = jac.solve(&rhs)?;
        match trial(&u, &du, 1.0) {
            Some((cand, rc)) if sup(&rc) < sup(&r) || l2_sq(&rc) < l2_sq(&r) => {
                dtau *= (sup(&r) / sup(&rc)).min(10.0);
                u = cand;
                r = rc;
                report.residual_history.push(sup(&r));
            }
            _ => dtau *= 0.5,
        }
    }
    Ok((field(u), report))
}

/// Optional quasi-decreasing certificate of a solve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuasiCertificate {
    pub min_theta: f64,
    pub graphical: bool,
    pub theta_threshold: f64,
    /// Interior sup of the Jacobi-type residual of the tilt function.
    pub jacobi_residual: f64,
    pub refined_min_theta: Option<f64>,
    pub refinement_stable: Option<bool>,
    pub decreasing_check: crate::pmc::SignReport,
}

/// Record of an outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub outer_iterations: usize,
    pub inner_newton_counts: Vec<usize>,
    pub inner_pseudo_counts: Vec<usize>,
    /// `||L_H(u_m)||_inf` for `m = 1, 2, ...`.
    pub residual_history: Vec<f64>,
    /// `sup |u_m - u_{m-1}|` for `m = 2, 3, ...`.
    pub step_history: Vec<f64>,
    /// `max(0, -min_interior(u_m - u_{m-1}))` per step.
    pub monotonicity_violation: Vec<f64>,
    /// `max(0, u1 - u_m, u_m - u0)` per step.
    pub confinement_violation: Vec<f64>,
    pub final_residual: f64,
    /// `tol_inner + gamma * last step`; `final_residual` must not exceed it.
    pub residual_bound: f64,
    /// Ratio of the last two steps.
    pub contraction_rate: Option<f64>,
    pub gamma: GammaCertificate,
    pub cutoff: Cutoff,
    pub working_box: WorkingBox,
    pub min_theta: f64,
    pub max_gradient: f64,
    pub sup_abs_u: f64,
    pub sup_abs_mean_curvature: f64,
    pub quasi: Option<QuasiCertificate>,
}

/// Working box used when none is configured: the cutoff plateau widened by
/// half its length on both sides.
pub fn default_working_box(cutoff_plateau: (f64, f64)) -> Result<WorkingBox> {
    let (c1, c2) = cutoff_plateau;
    let span = c2 - c1;
    WorkingBox::new(c1 - 0.5 * span, c2 + 0.5 * span)
}

/// `[c1, c2]`: the barrier range widened by 10% of its length on both sides
/// (by 0.1 when the range is a single value).
pub fn default_plateau(b: &BarrierPair) -> (f64, f64) {
    let (lo, hi) = b.range();
    let pad = if hi > lo { 0.1 * (hi - lo) } else { 0.1 };
    (lo - pad, hi + pad)
}

fn field_stats(v: &ScalarField) -> (f64, f64, f64, f64) {
    let grid = v.grid();
    let theta = theta_field(v);
    let max_grad = (0..grid.len())
        .map(|k| {
            let g = node_gradient(grid, v.values(), k);
            (g[0] * g[0] + g[1] * g[1]).sqrt()
        })
        .fold(0.0, f64::max);
    let mc = mean_curvature_product(v);
    (theta.min(), max_grad, sup(v.values()), mc.interior_sup())
}

/// Penalized outer iteration between the barriers. Requires the barrier
/// condition and, on Dirichlet grids, `u1 = u0` on the boundary.
pub fn outer_iterate<F: NodalPmc + ?Sized>(
    h: &F,
    b: &BarrierPair,
    working: Option<WorkingBox>,
    cfg: &SolveConfig,
) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    let grid = b.grid().clone();
    if b.boundary_mismatch() > 1e-12 {
        return Err(Error::Barrier(format!(
            "barriers must agree on the boundary (largest gap {:.3e})",
            b.boundary_mismatch()
        )));
    }
    let barrier = check_barrier(b, h, None, cfg.barrier_allowance)?;
    if !barrier.pass {
        return Err(Error::Barrier(format!(
            "barrier condition fails: max L_H(u1) = {:.3e} at node {}, min L_H(u0) = {:.3e} at node {} (tolerance {:.3e})",
            barrier.worst_sub.value, barrier.worst_sub.node, barrier.worst_super.value, barrier.worst_super.node, barrier.tolerance
        )));
    }
    let (c1, c2) = cfg
        .cutoff
        .map_or_else(|| default_plateau(b), |[c1, c2]| (c1, c2));
    let working = match working {
        Some(w) => w,
        None => default_working_box((c1, c2))?,
    };
    let (lo, hi) = b.range();
    if !(lo >= c1 && hi <= c2) {
        return Err(Error::Config(format!(
            "cutoff plateau [{c1}, {c2}] must contain the barrier range [{lo}, {hi}]"
        )));
    }
    let cutoff = cutoff_profile(c1, c2, working.lo, working.hi)?;
    let gamma = match cfg.gamma {
        Some(g) => certify_gamma(h, &cutoff, &grid, &working, cfg.gamma_samples, g)?,
        None => gamma_for(h, &cutoff, &grid, &working, cfg.gamma_samples)?,
    };
    if !gamma.holds() {
        return Err(Error::Config(format!(
            "gamma = {} does not certify -d(hH)/dr + gamma >= 1 (sampled sup d(hH)/dr = {} at {})",
            gamma.gamma, gamma.sup_derivative, gamma.worst_point
        )));
    }
    let psi = b.psi();
    let residual_h =
        |u: &ScalarField| pmc_residual(u, h, None, grid.dim(), None).map(|r| r.interior_sup());

    let mut report = SolveReport {
        converged: false,
        outer_iterations: 0,
        inner_newton_counts: Vec::new(),
        inner_pseudo_counts: Vec::new(),
        residual_history: vec![residual_h(&b.u1)?],
        step_history: Vec::new(),
        monotonicity_violation: Vec::new(),
        confinement_violation: Vec::new(),
        final_residual: f64::NAN,
        residual_bound: f64::NAN,
        contraction_rate: None,
        gamma: gamma.clone(),
        cutoff,
        working_box: working,
        min_theta: f64::NAN,
        max_gradient: f64::NAN,
        sup_abs_u: f64::NAN,
        sup_abs_mean_curvature: f64::NAN,
        quasi: None,
    };
    let fail = |reason: String, best: &ScalarField, mut report: SolveReport| -> Error {
        let (t, g, s, m) = field_stats(best);
        report.min_theta = t;
        report.max_gradient = g;
        report.sup_abs_u = s;
        report.sup_abs_mean_curvature = m;
        let history = report.residual_history.clone();
        Error::Solve(Box::new(SolveFailure {
            reason,
            best_iterate: Some(best.clone()),
            residual_history: history,
            report: Some(report),
        }))
    };

    let mut prev = b.u1.clone();
    loop {
        if report.outer_iterations >= cfg.max_outer {
            let rate = report
                .contraction_rate
                .map_or("unknown".to_string(), |r| format!("{r:.4}"));
            let reason = format!(
                "outer iteration did not converge in {} steps (last step {:.3e}, contraction rate {rate})",
                cfg.max_outer,
                report.step_history.last().copied().unwrap_or(f64::NAN)
            );
            return Err(fail(reason, &prev, report));
        }
        let fm = Penalized {
            h,
            cutoff,
            gamma: gamma.gamma,
            anchor: prev.values(),
        };
        let (u, inner) = match solve_inner(&fm, &prev, Some(&psi), &working, cfg) {
            Ok(x) => x,
            Err(e) => {
                let reason = format!("inner solve {} failed: {e}", report.outer_iterations + 2);
                return Err(fail(reason, &prev, report));
            }
        };
        report.outer_iterations += 1;
        report.inner_newton_counts.push(inner.newton_steps);
        report.inner_pseudo_counts.push(inner.pseudo_steps);
        let mut min_diff = f64::INFINITY;
        let mut confinement: f64 = 0.0;
        for &k in grid.interior_nodes() {
            let v = u.values()[k];
            min_diff = min_diff.min(v - prev.values()[k]);
            confinement = confinement
                .max(b.u1.values()[k] - v)
                .max(v - b.u0.values()[k]);
        }
        let mono = (-min_diff).max(0.0);
        let step = sup_norm(&u, &prev)?;
        report.monotonicity_violation.push(mono);
        report.confinement_violation.push(confinement);
        report.step_history.push(step);
        report.residual_history.push(residual_h(&u)?);
        if let [.., a, b] = report.step_history[..] {
            if a > 0.0 {
                report.contraction_rate = Some(b / a);
            }
        }
        if mono > cfg.monotone_abort || confinement > cfg.monotone_abort {
            let reason = format!(
                "outer step {} broke monotonicity (violation {mono:.3e}) or barrier confinement ({confinement:.3e}); \
                 refine the grid or increase gamma",
                report.outer_iterations + 1
            );
            return Err(fail(reason, &u, report));
        }
        prev = u;
        if step <= cfg.tol_outer {
            break;
        }
    }
    let v = prev;
    report.final_residual = *report.residual_history.last().expect("non-empty");
    report.residual_bound =
        cfg.tol_inner + gamma.gamma * report.step_history.last().copied().unwrap_or(0.0);
    let (t, g, s, m) = field_stats(&v);
    report.min_theta = t;
    report.max_gradient = g;
    report.sup_abs_u = s;
    report.sup_abs_mean_curvature = m;
    if report.final_residual > report.residual_bound * (1.0 + 1e-6) + 1e-14 {
        let reason = format!(
            "final residual {:.3e} exceeds the penalty bound {:.3e}",
            report.final_residual, report.residual_bound
        );
        return Err(fail(reason, &v, report));
    }
    report.converged = true;
    Ok((v, report))
}

/// Half-width `alpha = 1.05 sup |phi|` of the curvature bound, sampled over the box.
pub fn phi_bound<F: NodalPmc + ?Sized>(
    phi: &F,
    grid: &BaseGrid,
    working: &WorkingBox,
    samples: usize,
) -> Result<f64> {
    let lattice = SampleLattice::new(grid, working.lo, working.hi, samples);
    let mut m: f64 = 0.0;
    lattice.for_each(grid, |k, p| {
        let v = phi.eval_at(k, &p);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: "phi".into(),
                point: p.to_string(),
            });
        }
        m = m.max(v.abs());
        Ok(())
    })?;
    Ok(1.05 * m)
}

struct ShiftedByT<'a, F: ?Sized> {
    base: &'a F,
    a: f64,
}

impl<F: NodalPmc + ?Sized> NodalPmc for ShiftedByT<'_, F> {
    fn jet_at(&self, node: usize, p: &PmcArg) -> PmcJet {
        let mut j = self.base.jet_at(node, p);
        j.value -= self.a * p.t;
        j.d_t -= self.a;
        j
    }
}

/// Barriers for `H = F_base + phi t` with `|phi| <= alpha`: the solutions of
/// `MCP(u) = F_base - A t` with Dirichlet data `psi`, for `A = alpha` (lower)
/// and `A = -alpha` (upper).
pub fn barriers_from_phi<F: NodalPmc + ?Sized, G: NodalPmc + ?Sized>(
    base: &F,
    phi: &G,
    psi: &ScalarField,
    working: &WorkingBox,
    cfg: &SolveConfig,
) -> Result<BarrierPair> {
    let grid = psi.grid().clone();
    if grid.all_periodic() || grid.axes().iter().any(|a| a.topology == Topology::Periodic) {
        return Err(Error::Barrier(
            "barriers from a bounded phi need a Dirichlet grid".into(),
        ));
    }
    let alpha = phi_bound(phi, &grid, working, cfg.gamma_samples)?;
    let init = boundary_interpolant(psi);
    let trace: Vec<f64> = grid
        .boundary_nodes()
        .iter()
        .map(|&k| psi.values()[k])
        .collect();
    let solve = |a: f64| {
        solve_inner(&ShiftedByT { base, a }, &init, Some(&trace), working, cfg).map(|(u, _)| u)
    };
    let u1 = solve(alpha)?;
    let u0 = solve(-alpha)?;
    if alpha == 0.0 {
        return BarrierPair::new_touching(u1, u0);
    }
    BarrierPair::new(u1, u0)
        .map_err(|e| Error::Barrier(format!("auxiliary solutions are not ordered: {e}")))
}

/// Outer iteration on `H = H1 + t H2` followed by the tilt certificate.
pub fn solve_quasi(
    d: &QuasiDecomposition,
    b: &BarrierPair,
    working: Option<WorkingBox>,
    cfg: &SolveConfig,
) -> Result<(ScalarField, SolveReport)> {
    let grid = b.grid().clone();
    let (c1, c2) = cfg
        .cutoff
        .map_or_else(|| default_plateau(b), |[c1, c2]| (c1, c2));
    let check_box = match working {
        Some(w) => w,
        None => default_working_box((c1, c2))?,
    };
    let decreasing = check_quasi_decreasing(d, &grid, &check_box, cfg.monotone_samples)?;
    if !decreasing.pass {
        return Err(Error::NotMonotone {
            value: decreasing.worst_value,
            point: decreasing.worst_point.to_string(),
        });
    }
    let h = d.composite();
    let (v, mut report) = outer_iterate(&h, b, working, cfg)?;
    let jac = jacobi_residual(&v, &h)?;
    let min_theta = theta_field(&v).min();
    report.quasi = Some(QuasiCertificate {
        min_theta,
        graphical: min_theta >= cfg.theta_threshold,
        theta_threshold: cfg.theta_threshold,
        jacobi_residual: jac.interior_sup(),
        refined_min_theta: None,
        refinement_stable: None,
        decreasing_check: decreasing,
    });
    Ok((v, report))
}

/// Transfinite (Coons) interpolation of the boundary values of `u`; all
/// periodic grids return `u` unchanged.
pub fn boundary_interpolant(u: &ScalarField) -> ScalarField {
    let grid = u.grid();
    let v = u.values();
    let dirichlet: Vec<bool> = grid.axes().iter().map(|a| !a.is_periodic()).collect();
    let mut out = v.to_vec();
    let shape = grid.shape();
    let at = |i: usize, j: usize| v[grid.linear_index([i, j])];
    for &k in grid.interior_nodes() {
        let [i, j] = grid.multi_index(k);
        out[k] = match (grid.dim(), dirichlet.as_slice()) {
            (1, [true]) => {
                let s = i as f64 / (shape[0] - 1) as f64;
                (1.0 - s) * at(0, 0) + s * at(shape[0] - 1, 0)
            }
            (2, [true, true]) => {
                let (m, n) = (shape[0] - 1, shape[1] - 1);
                let s = i as f64 / m as f64;
                let t = j as f64 / n as f64;
                (1.0 - s) * at(0, j) + s * at(m, j) + (1.0 - t) * at(i, 0) + t * at(i, n)
                    - ((1.0 - s) * (1.0 - t) * at(0, 0)
                        + s * (1.0 - t) * at(m, 0)
                        + (1.0 - s) * t * at(0, n)
                        + s * t * at(m, n))
            }
            (2, [true, false]) => {
                let s = i as f64 / (shape[0] - 1) as f64;
                (1.0 - s) * at(0, j) + s * at(shape[0] - 1, j)
            }
            (2, [false, true]) => {
                let t = j as f64 / (shape[1] - 1) as f64;
                (1.0 - t) * at(i, 0) + t * at(i, shape[1] - 1)
            }
            _ => v[k],
        };
    }
    ScalarField::from_vec(grid.clone(), out)
}

/// How the barriers of a [`Problem`] are produced on a given grid.
#[derive(Clone, Debug)]
pub enum BarrierSpec {
    /// Explicit barrier expressions in `x1, x2`; `psi`, when given, replaces
    /// both on the boundary.
    Exprs {
        u1: String,
        u0: String,
        psi: Option<String>,
    },
    /// Auxiliary solves for `H = base + phi t` with Dirichlet data `psi`.
    FromPhi { base: Pmc, phi: Pmc, psi: String },
}

/// A solve that can be repeated on refined grids.
#[derive(Clone, Debug)]
pub struct Problem {
    pub grid: GridSpec,
    /// Product-metric PMC function.
    pub h: Pmc,
    pub quasi: Option<QuasiDecomposition>,
    pub barriers: BarrierSpec,
    pub working: Option<WorkingBox>,
    pub config: SolveConfig,
}

impl Problem {
    pub fn barriers_on(&self, grid: &Arc<BaseGrid>) -> Result<BarrierPair> {
        match &self.barriers {
            BarrierSpec::Exprs { u1, u0, psi } => {
                let mut lo = crate::grid::field_from_expr(grid, u1)?.into_values();
                let mut hi = crate::grid::field_from_expr(grid, u0)?.into_values();
                if let Some(psi) = psi {
                    let trace = crate::grid::field_from_expr(grid, psi)?;
                    for &k in grid.boundary_nodes() {
                        lo[k] = trace.values()[k];
                        hi[k] = trace.values()[k];
                    }
                }
                BarrierPair::new(
                    ScalarField::from_vec(grid.clone(), lo),
                    ScalarField::from_vec(grid.clone(), hi),
                )
            }
            BarrierSpec::FromPhi { base, phi, psi } => {
                let working = self.working.ok_or_else(|| {
                    Error::Config("barriers from phi need an explicit working box".into())
                })?;
                let psi = crate::grid::field_from_expr(grid, psi)?;
                barriers_from_phi(base, phi, &psi, &working, &self.config)
            }
        }
    }

    /// Solves on `grid` (quasi-decreasing problems include the tilt certificate).
    pub fn solve_on(&self, grid: &Arc<BaseGrid>) -> Result<(ScalarField, SolveReport)> {
        let b = self.barriers_on(grid)?;
        match &self.quasi {
            Some(d) => solve_quasi(d, &b, self.working, &self.config),
            None => outer_iterate(&self.h, &b, self.working, &self.config),
        }
    }

    /// Solves on the configured grid; quasi-decreasing problems are also
    /// solved on the halved grid to flag refinement stability of `min Theta`.
    pub fn solve(&self) -> Result<(ScalarField, SolveReport)> {
        let grid = BaseGrid::build(&self.grid)?;
        let (v, mut report) = self.solve_on(&grid)?;
        if let (Some(q), true) = (report.quasi.as_mut(), self.config.refinement_check) {
            let fine = BaseGrid::build(&self.grid.halved())?;
            let (_, fine_report) = self.solve_on(&fine)?;
            let t = fine_report.quasi.expect("quasi solve").min_theta;
            q.refined_min_theta = Some(t);
            q.refinement_stable = Some((t - q.min_theta).abs() <= 0.2 * q.min_theta.abs());
        }
        Ok((v, report))
    }
}
