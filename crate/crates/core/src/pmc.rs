//! Prescribed mean curvature functions `H(x, z, Y, t)`, their structural
//! checks, and the residual operator
//! `L_H(u) = -div(Du/omega) - H(x, u, -Du/omega, 1/omega)`.
//!
//! `(Y, t)` are always the components of the upward product-unit normal
//! `(-Du + d_r) / omega`; conformal problems are routed through
//! [`crate::geometry::conformal_transform_pmc`].

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::calculus::{grad_stencil, mean_curvature_row, node_gradient, Stencil};
use crate::error::{Error, Result};
use crate::expr::{Expr, Vars};
use crate::geometry::{conformal_mean_curvature, ConformalFactor};
use crate::grid::{BaseGrid, ScalarField};

/// Step of the central finite differences used for partials.
pub const FD_STEP: f64 = 1e-6;

/// Tolerance for sampled "≤ 0" checks.
pub const SIGN_TOL: f64 = 1e-12;

/// A point of the tangent bundle: base point `x`, height `z`, normal `(Y, t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PmcArg {
    pub x: [f64; 2],
    pub z: f64,
    pub y: [f64; 2],
    pub t: f64,
}

impl PmcArg {
    pub fn new(x: [f64; 2], z: f64, y: [f64; 2], t: f64) -> Self {
        PmcArg { x, z, y, t }
    }

    /// Argument of the composed field `H(x, u, -Du/omega, 1/omega)` at node `k`.
    pub fn at_node(grid: &BaseGrid, values: &[f64], k: usize) -> Self {
        let g = node_gradient(grid, values, k);
        let w = (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt();
        PmcArg {
            x: grid.position(k),
            z: values[k],
            y: [-g[0] / w, -g[1] / w],
            t: 1.0 / w,
        }
    }

    fn slots(&self) -> [f64; 6] {
        [self.x[0], self.x[1], self.z, self.y[0], self.y[1], self.t]
    }
}

impl fmt::Display for PmcArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(x1={}, x2={}, z={}, y1={}, y2={}, t={})",
            self.x[0], self.x[1], self.z, self.y[0], self.y[1], self.t
        )
    }
}

/// Value and first partials of a PMC function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PmcJet {
    pub value: f64,
    pub d_z: f64,
    pub d_y: [f64; 2],
    pub d_t: f64,
}

impl PmcJet {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.d_z.is_finite()
            && self.d_y.iter().all(|v| v.is_finite())
            && self.d_t.is_finite()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    #[default]
    Analytic,
    FiniteDifference,
}

/// A prescribed mean curvature function on the tangent bundle of `N x (a, b)`.
pub trait PmcFunction: Send + Sync + fmt::Debug {
    fn eval(&self, p: &PmcArg) -> f64;

    fn jet(&self, p: &PmcArg) -> PmcJet {
        self.fd_jet(p)
    }

    /// Central finite-difference partials with step [`FD_STEP`].
    fn fd_jet(&self, p: &PmcArg) -> PmcJet {
        let h = FD_STEP;
        let diff = |f: &dyn Fn(&mut PmcArg, f64)| {
            let (mut a, mut b) = (*p, *p);
            f(&mut a, h);
            f(&mut b, -h);
            (self.eval(&a) - self.eval(&b)) / (2.0 * h)
        };
        PmcJet {
            value: self.eval(p),
            d_z: diff(&|q, s| q.z += s),
            d_y: [diff(&|q, s| q.y[0] += s), diff(&|q, s| q.y[1] += s)],
            d_t: diff(&|q, s| q.t += s),
        }
    }

    fn describe(&self) -> String;
}

impl<T: PmcFunction + ?Sized> PmcFunction for Arc<T> {
    fn eval(&self, p: &PmcArg) -> f64 {
        (**self).eval(p)
    }
    fn jet(&self, p: &PmcArg) -> PmcJet {
        (**self).jet(p)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

pub type Pmc = Arc<dyn PmcFunction>;

/// A PMC function that may also depend on the grid node it is evaluated at
/// (penalized iterates carry a node-indexed anchor).
pub trait NodalPmc: Send + Sync {
    fn jet_at(&self, node: usize, p: &PmcArg) -> PmcJet;

    fn eval_at(&self, node: usize, p: &PmcArg) -> f64 {
        self.jet_at(node, p).value
    }
}

impl<T: PmcFunction + ?Sized> NodalPmc for T {
    fn jet_at(&self, _node: usize, p: &PmcArg) -> PmcJet {
        self.jet(p)
    }
    fn eval_at(&self, _node: usize, p: &PmcArg) -> f64 {
        self.eval(p)
    }
}

/// PMC function given by an expression over `x1, x2, z, y1, y2, t`.
#[derive(Clone, Debug)]
pub struct ExprPmc {
    expr: Expr,
    d_z: Expr,
    d_y: [Expr; 2],
    d_t: Expr,
    mode: DerivativeMode,
}

impl ExprPmc {
    pub fn new(expr: Expr) -> Self {
        ExprPmc {
            d_z: expr.derivative("z"),
            d_y: [expr.derivative("y1"), expr.derivative("y2")],
            d_t: expr.derivative("t"),
            expr,
            mode: DerivativeMode::Analytic,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Expr::constant(c, &Vars::PMC))
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// True when the expression does not mention `z`.
    pub fn is_height_independent(&self) -> bool {
        !self.expr.depends_on("z")
    }
}

impl PmcFunction for ExprPmc {
    fn eval(&self, p: &PmcArg) -> f64 {
        self.expr.eval(&p.slots())
    }

    fn jet(&self, p: &PmcArg) -> PmcJet {
        if self.mode == DerivativeMode::FiniteDifference {
            return self.fd_jet(p);
        }
        let s = p.slots();
        PmcJet {
            value: self.expr.eval(&s),
            d_z: self.d_z.eval(&s),
            d_y: [self.d_y[0].eval(&s), self.d_y[1].eval(&s)],
            d_t: self.d_t.eval(&s),
        }
    }

    fn describe(&self) -> String {
        self.expr.source().to_string()
    }
}

/// Parses a PMC expression over `x1, x2, z, y1, y2, t`.
pub fn parse_pmc(text: &str) -> Result<ExprPmc> {
    Ok(ExprPmc::new(Expr::parse(text, &Vars::PMC)?))
}

/// `H = H1 + t * H2`.
#[derive(Clone, Debug)]
pub struct QuasiDecomposition {
    pub h1: Pmc,
    pub h2: Pmc,
}

impl QuasiDecomposition {
    pub fn new(h1: Pmc, h2: Pmc) -> Self {
        QuasiDecomposition { h1, h2 }
    }

    pub fn composite(&self) -> Pmc {
        Arc::new(self.clone())
    }

    /// Max of `|H(p) - (H1(p) + t H2(p))|` over the given points.
    pub fn reconstruction_error(&self, composite: &dyn PmcFunction, points: &[PmcArg]) -> f64 {
        points
            .iter()
            .map(|p| (composite.eval(p) - self.eval(p)).abs())
            .fold(0.0, f64::max)
    }
}

impl PmcFunction for QuasiDecomposition {
    fn eval(&self, p: &PmcArg) -> f64 {
        self.h1.eval(p) + p.t * self.h2.eval(p)
    }

    fn jet(&self, p: &PmcArg) -> PmcJet {
        let (a, b) = (self.h1.jet(p), self.h2.jet(p));
        PmcJet {
            value: a.value + p.t * b.value,
            d_z: a.d_z + p.t * b.d_z,
            d_y: [a.d_y[0] + p.t * b.d_y[0], a.d_y[1] + p.t * b.d_y[1]],
            d_t: a.d_t + b.value + p.t * b.d_t,
        }
    }

    fn describe(&self) -> String {
        format!("({}) + t*({})", self.h1.describe(), self.h2.describe())
    }
}

/// Height range `[a, b]` of the working box; the normal ranges over the unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WorkingBox {
    pub lo: f64,
    pub hi: f64,
}

impl WorkingBox {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!(
                "working box needs a < b, got [{lo}, {hi}]"
            )));
        }
        Ok(WorkingBox { lo, hi })
    }

    pub fn contains(&self, z: f64) -> bool {
        (self.lo..=self.hi).contains(&z)
    }

    pub fn check_field(&self, u: &ScalarField) -> Result<()> {
        let nodes: Vec<usize> = u
            .values()
            .iter()
            .enumerate()
            .filter(|(_, v)| !self.contains(**v))
            .map(|(k, _)| k)
            .collect();
        if nodes.is_empty() {
            Ok(())
        } else {
            Err(Error::OutsideBox {
                lo: self.lo,
                hi: self.hi,
                nodes,
            })
        }
    }
}

/// Deterministic sample lattice over `N x [a, b] x unit ball`.
///
/// Base points are grid nodes (at most `samples` per axis, ends included on
/// Dirichlet axes), heights are `samples` equispaced values including both box
/// ends, and normals are the points of a 5-per-axis lattice on `[-1, 1]^(n+1)`
/// inside the closed unit ball.
#[derive(Clone, Debug)]
pub struct SampleLattice {
    pub nodes: Vec<usize>,
    pub heights: Vec<f64>,
    pub normals: Vec<([f64; 2], f64)>,
}

impl SampleLattice {
    pub fn new(grid: &BaseGrid, lo: f64, hi: f64, samples: usize) -> Self {
        let samples = samples.max(2);
        let per_axis: Vec<Vec<usize>> = grid
            .axes()
            .iter()
            .map(|ax| {
                let m = samples.min(ax.nodes);
                if ax.is_periodic() {
                    (0..m).map(|i| i * ax.nodes / m).collect()
                } else {
                    (0..m)
                        .map(|i| (i * (ax.nodes - 1) + (m - 1) / 2) / (m - 1))
                        .collect()
                }
            })
            .collect();
        let mut nodes = Vec::new();
        if grid.dim() == 1 {
            nodes.extend(per_axis[0].iter().copied());
        } else {
            for &i in &per_axis[0] {
                for &j in &per_axis[1] {
                    nodes.push(grid.linear_index([i, j]));
                }
            }
        }
        nodes.dedup();
        let heights = (0..samples)
            .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
            .collect();
        let ticks = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let mut normals = Vec::new();
        if grid.dim() == 1 {
            for &y in &ticks {
                for &t in &ticks {
                    if y * y + t * t <= 1.0 + 1e-12 {
                        normals.push(([y, 0.0], t));
                    }
                }
            }
        } else {
            for &y1 in &ticks {
                for &y2 in &ticks {
                    for &t in &ticks {
                        if y1 * y1 + y2 * y2 + t * t <= 1.0 + 1e-12 {
                            normals.push(([y1, y2], t));
                        }
                    }
                }
            }
        }
        SampleLattice {
            nodes,
            heights,
            normals,
        }
    }

    /// Visits every sample in lattice order.
    pub fn for_each(
        &self,
        grid: &BaseGrid,
        mut f: impl FnMut(usize, PmcArg) -> Result<()>,
    ) -> Result<()> {
        for &k in &self.nodes {
            let x = grid.position(k);
            for &z in &self.heights {
                for &(y, t) in &self.normals {
                    f(k, PmcArg { x, z, y, t })?;
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len() * self.heights.len() * self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome of a sampled sign check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignReport {
    pub pass: bool,
    pub worst_point: PmcArg,
    pub worst_node: usize,
    pub worst_value: f64,
    pub samples: usize,
}

fn worst_dz(
    grid: &BaseGrid,
    lattice: &SampleLattice,
    what: &str,
    dz: impl Fn(usize, &PmcArg) -> f64,
) -> Result<SignReport> {
    let mut worst: Option<(f64, usize, PmcArg)> = None;
    lattice.for_each(grid, |k, p| {
        let v = dz(k, &p);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: what.into(),
                point: p.to_string(),
            });
        }
        // strict comparison: the lowest lattice index wins ties
        if worst.is_none_or(|(w, _, _)| v > w) {
            worst = Some((v, k, p));
        }
        Ok(())
    })?;
    let (worst_value, worst_node, worst_point) = worst.expect("lattice is never empty");
    Ok(SignReport {
        pass: worst_value <= SIGN_TOL,
        worst_point,
        worst_node,
        worst_value,
        samples: lattice.len(),
    })
}

/// Samples `dH/dz` over the box; passes iff the sampled maximum is ≤ 1e-12.
pub fn check_monotone<F: NodalPmc + ?Sized>(
    h: &F,
    grid: &BaseGrid,
    working: &WorkingBox,
    samples: usize,
) -> Result<SignReport> {
    let lattice = SampleLattice::new(grid, working.lo, working.hi, samples);
    worst_dz(grid, &lattice, "dH/dz", |k, p| h.jet_at(k, p).d_z)
}

/// Samples `dH1/dz` over the box; `H2` is unconstrained.
pub fn check_quasi_decreasing(
    d: &QuasiDecomposition,
    grid: &BaseGrid,
    working: &WorkingBox,
    samples: usize,
) -> Result<SignReport> {
    let lattice = SampleLattice::new(grid, working.lo, working.hi, samples);
    worst_dz(grid, &lattice, "dH1/dz", |_, p| d.h1.jet(p).d_z)
}

/// Residual row `L_F(u)` at a non-boundary node together with its derivative
/// with respect to the node values.
pub(crate) fn residual_row<F: NodalPmc + ?Sized>(
    grid: &BaseGrid,
    values: &[f64],
    k: usize,
    h: &F,
) -> (f64, Stencil, PmcJet) {
    let (mc, mut jac) = mean_curvature_row(grid, values, k);
    let g = node_gradient(grid, values, k);
    let w = (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt();
    let w3 = w * w * w;
    let arg = PmcArg {
        x: grid.position(k),
        z: values[k],
        y: [-g[0] / w, -g[1] / w],
        t: 1.0 / w,
    };
    let jet = h.jet_at(k, &arg);
    jac.push(k, -jet.d_z);
    for j in 0..grid.dim() {
        // dY_i/dg_j = -delta_ij / w + g_i g_j / w^3, dt/dg_j = -g_j / w^3
        let mut d = -jet.d_t * g[j] / w3;
        for i in 0..grid.dim() {
            let dy = if i == j { -1.0 / w } else { 0.0 } + g[i] * g[j] / w3;
            d += jet.d_y[i] * dy;
        }
        if d != 0.0 {
            jac.add_scaled(&grad_stencil(grid, k, j), -d);
        }
    }
    (mc - jet.value, jac, jet)
}

/// Composed field `H(x, u, -Du/omega, 1/omega)` at every node.
pub fn composed_field<F: NodalPmc + ?Sized>(u: &ScalarField, h: &F) -> Result<ScalarField> {
    let grid = u.grid();
    let values = (0..grid.len())
        .map(|k| {
            let p = PmcArg::at_node(grid, u.values(), k);
            let v = h.eval_at(k, &p);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Evaluation {
                    what: "H".into(),
                    point: format!("node {k} {p}"),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalarField::from_vec(grid.clone(), values))
}

/// `L_H(u)` at interior nodes (all nodes on periodic grids); boundary nodes are 0.
///
/// With a conformal factor, the mean curvature term is the conformal mean
/// curvature of the graph in `e^{2f}(sigma + dr^2)`. When `working` is given,
/// heights outside it are an error.
pub fn pmc_residual<F: NodalPmc + ?Sized>(
    u: &ScalarField,
    h: &F,
    factor: Option<&ConformalFactor>,
    n: usize,
    working: Option<&WorkingBox>,
) -> Result<ScalarField> {
    if let Some(b) = working {
        b.check_field(u)?;
    }
    let grid = u.grid();
    let mc = match factor {
        Some(f) => conformal_mean_curvature(u, f, n)?,
        None => crate::calculus::mean_curvature_product(u),
    };
    let composed = composed_field(u, h)?;
    let mut out = vec![0.0; grid.len()];
    for &k in grid.interior_nodes() {
        out[k] = mc.values()[k] - composed.values()[k];
    }
    Ok(ScalarField::from_vec(grid.clone(), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Topology};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn torus(n: usize) -> Arc<BaseGrid> {
        BaseGrid::build(&GridSpec::new(
            &[n, n],
            &[1.0, 1.0],
            &[Topology::Periodic; 2],
        ))
        .unwrap()
    }

    #[test]
    fn monotone_examples() {
        let g = torus(8);
        let bx = WorkingBox::new(0.25, PI + 0.25).unwrap();
        let r = check_monotone(&parse_pmc("-z").unwrap(), &g, &bx, 9).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_value, -1.0);

        let r = check_monotone(&parse_pmc("sin(z)").unwrap(), &g, &bx, 9).unwrap();
        assert!(!r.pass);
        assert!((r.worst_value - 0.25f64.cos()).abs() < 1e-15);
        assert!((r.worst_value - 0.9689).abs() < 1e-4);
        assert_eq!(r.worst_point.z, 0.25);

        let r = check_monotone(&parse_pmc("x1*t").unwrap(), &g, &bx, 9).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_value, 0.0);
    }

    #[test]
    fn quasi_decreasing_examples() {
        let g = torus(8);
        let bx = WorkingBox::new(-1.0, 2.0).unwrap();
        let q = |a: &str, b: &str| {
            QuasiDecomposition::new(
                Arc::new(parse_pmc(a).unwrap()),
                Arc::new(parse_pmc(b).unwrap()),
            )
        };
        assert!(
            check_quasi_decreasing(&q("-z", "0.3"), &g, &bx, 9)
                .unwrap()
                .pass
        );
        let r = check_quasi_decreasing(&q("z", "0"), &g, &bx, 9).unwrap();
        assert!(!r.pass);
        assert_eq!(r.worst_value, 1.0);
        let r = check_quasi_decreasing(&q("exp(-z)", "sin(x1)"), &g, &bx, 9).unwrap();
        assert!(r.pass);
        assert!((r.worst_value + (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_partial_is_an_error() {
        let g = torus(8);
        let bx = WorkingBox::new(-1.0, 1.0).unwrap();
        let e = check_monotone(&parse_pmc("sqrt(z)").unwrap(), &g, &bx, 5).unwrap_err();
        assert!(matches!(e, Error::Evaluation { .. }), "{e}");
    }

    #[test]
    fn residual_examples() {
        let g = torus(16);
        let zero = ScalarField::constant(&g, 0.0);
        let c = ScalarField::constant(&g, 0.7);
        let r = pmc_residual(&c, &ExprPmc::constant(0.0), None, 2, None).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));
        let r = pmc_residual(&zero, &parse_pmc("-z").unwrap(), None, 2, None).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_of_unit_cap_with_constant_curvature() {
        let err = |n: usize| {
            let g = BaseGrid::build(
                &GridSpec::new(&[n + 1, n + 1], &[1.0, 1.0], &[Topology::Dirichlet; 2])
                    .with_origin(&[-0.5, -0.5]),
            )
            .unwrap();
            let u = ScalarField::from_fn(&g, |x| (1.0 - x[0] * x[0] - x[1] * x[1]).sqrt()).unwrap();
            let r = pmc_residual(&u, &ExprPmc::constant(2.0), None, 2, None).unwrap();
            for &k in g.boundary_nodes() {
                assert_eq!(r.values()[k], 0.0);
            }
            let mc = crate::calculus::mean_curvature_product(&u);
            for &k in g.interior_nodes() {
                assert_eq!(r.values()[k], mc.values()[k] - 2.0);
            }
            r.interior_sup()
        };
        let (a, b) = (err(32), err(64));
        assert!(b < 2.0 / 4096.0 && (a / b).log2() >= 1.5, "{a} {b}");
    }

    #[test]
    fn residual_rejects_heights_outside_box() {
        let g = torus(8);
        let mut v = vec![0.0; g.len()];
        v[5] = 3.0;
        let u = ScalarField::new(g, v).unwrap();
        let bx = WorkingBox::new(-1.0, 1.0).unwrap();
        match pmc_residual(&u, &ExprPmc::constant(0.0), None, 2, Some(&bx)) {
            Err(Error::OutsideBox { nodes, .. }) => assert_eq!(nodes, vec![5]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn residual_row_jacobian_matches_finite_differences() {
        let g = torus(6);
        let u = ScalarField::from_fn(&g, |x| {
            0.3 * (2.0 * PI * x[0]).sin() + 0.2 * (2.0 * PI * x[1]).cos()
        })
        .unwrap();
        let h = parse_pmc("0.5*sin(z) + 0.3*y1*t - 0.2*y2^2 + x1*t").unwrap();
        for k in [0, 7, 20] {
            let (_, jac, _) = residual_row(&g, u.values(), k, &h);
            for j in 0..g.len() {
                let bump = |s: f64| {
                    let mut v = u.values().to_vec();
                    v[j] += s;
                    residual_row(&g, &v, k, &h).0
                };
                let fd = (bump(1e-6) - bump(-1e-6)) / 2e-6;
                let an: f64 = jac.iter().filter(|(i, _)| *i == j).map(|(_, w)| w).sum();
                assert!(
                    (fd - an).abs() < 1e-6 * (1.0 + fd.abs()),
                    "k={k} j={j}: {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn parse_is_deterministic() {
        let p = PmcArg::new([0.1234, 0.9], 1.7, [0.3, -0.1], 0.8);
        let text = "0.5*sin(z)+0.1*sin(6.283185307179586*x1)*exp(-t)/(2+y1^2)";
        let a = parse_pmc(text).unwrap().jet(&p);
        let b = parse_pmc(text).unwrap().jet(&p);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.d_z.to_bits(), b.d_z.to_bits());
    }

    const BUILTINS: [&str; 6] = [
        "-z",
        "0.5*sin(z)+0.1*sin(6.283185307179586*x1)",
        "exp(-z)*t - 1",
        "x1*t + tanh(z)*y1",
        "sqrt(2 + z^2)*cos(x2) + y2*y1",
        "ln(3 + z)*t^2 - abs(0.2 + y1)",
    ];

    fn arg() -> impl Strategy<Value = PmcArg> {
        (
            0.0..1.0f64,
            0.0..1.0f64,
            -1.5..1.5f64,
            -0.7..0.7f64,
            -0.7..0.7f64,
            0.05..0.7f64,
        )
            .prop_map(|(x1, x2, z, y1, y2, t)| PmcArg::new([x1, x2], z, [y1, y2], t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn symbolic_and_finite_difference_partials_agree(p in arg(), which in 0..BUILTINS.len()) {
            let h = parse_pmc(BUILTINS[which]).unwrap();
            let (a, f) = (h.jet(&p), h.fd_jet(&p));
            prop_assert!((a.d_z - f.d_z).abs() < 1e-5);
            prop_assert!((a.d_t - f.d_t).abs() < 1e-5);
            prop_assert!((a.d_y[0] - f.d_y[0]).abs() < 1e-5);
            prop_assert!((a.d_y[1] - f.d_y[1]).abs() < 1e-5);
        }

        #[test]
        fn quasi_reconstruction(p in arg()) {
            let d = QuasiDecomposition::new(
                Arc::new(parse_pmc("exp(-z) - 1").unwrap()),
                Arc::new(parse_pmc("sin(x1) + z*y1").unwrap()),
            );
            let composite = parse_pmc("exp(-z) - 1 + t*(sin(x1) + z*y1)").unwrap();
            prop_assert!(d.reconstruction_error(&composite, &[p]) <= 1e-10);
        }

        #[test]
        fn translation_covariance_for_height_independent_h(c in -2.0..2.0f64) {
            let g = torus(8);
            let u = ScalarField::from_fn(&g, |x| 0.2 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()).unwrap();
            let h = parse_pmc("0.3*t + x1*y2").unwrap();
            let a = pmc_residual(&u, &h, None, 2, None).unwrap();
            let b = pmc_residual(&u.add_constant(c), &h, None, 2, None).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
