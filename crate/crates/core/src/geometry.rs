//! Conformal product structure `e^{2f}(sigma + dr^2)` over a flat base, and
//! the geometric quantities of a graph `r = u(x)`.
//!
//! All mean curvatures are taken with respect to the upward normal. In the
//! product metric that is `nu = (-Du + d_r) / omega`; in the conformal metric
//! it is `e^{-f} nu`, and the mean curvatures are related by
//! `H_f = e^{-f} (H + n <Df, nu>)` with `<Df, nu> = (-<Df_x, Du> + f_r) / omega`.

use std::sync::Arc;

use crate::calculus::{
    face_gradient, graph_laplacian, hessian, mean_curvature_product, node_gradient,
};
use crate::error::{Error, Result};
use crate::expr::{Expr, Vars};
use crate::grid::{BaseGrid, ScalarField};
use crate::pmc::{
    composed_field, DerivativeMode, NodalPmc, Pmc, PmcArg, PmcFunction, PmcJet, FD_STEP,
};

/// Value of a conformal factor and the derivatives the operators need.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FactorJet {
    pub f: f64,
    /// Spatial gradient at fixed `r`.
    pub df: [f64; 2],
    pub f_r: f64,
    /// `d/dr` of the spatial gradient.
    pub df_r: [f64; 2],
    pub f_rr: f64,
}

#[derive(Clone, Debug)]
struct ExprFactor {
    f: Expr,
    dx: [Expr; 2],
    dr: Expr,
    dxr: [Expr; 2],
    drr: Expr,
}

#[derive(Clone, Debug)]
enum FactorKind {
    Zero,
    Expr(Box<ExprFactor>),
    Warped(Arc<Reparametrization>),
}

/// The conformal factor `f(x, r)`.
#[derive(Clone, Debug)]
pub struct ConformalFactor {
    kind: FactorKind,
    mode: DerivativeMode,
}

impl ConformalFactor {
    /// `f ≡ 0`: the product metric itself.
    pub fn zero() -> Self {
        ConformalFactor {
            kind: FactorKind::Zero,
            mode: DerivativeMode::Analytic,
        }
    }

    /// Factor given by an expression in `x1, x2, r`.
    pub fn from_expr(text: &str) -> Result<Self> {
        let f = Expr::parse(text, &Vars::FACTOR)?;
        let dx = [f.derivative("x1"), f.derivative("x2")];
        let dr = f.derivative("r");
        let dxr = [dx[0].derivative("r"), dx[1].derivative("r")];
        let drr = dr.derivative("r");
        Ok(ConformalFactor {
            kind: FactorKind::Expr(Box::new(ExprFactor {
                f,
                dx,
                dr,
                dxr,
                drr,
            })),
            mode: DerivativeMode::Analytic,
        })
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, FactorKind::Zero)
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            FactorKind::Zero => "0".into(),
            FactorKind::Expr(e) => e.f.source().to_string(),
            FactorKind::Warped(w) => format!("ln h(r(s)), h = {}", w.profile.describe()),
        }
    }

    pub fn value(&self, x: [f64; 2], r: f64) -> f64 {
        match &self.kind {
            FactorKind::Zero => 0.0,
            FactorKind::Expr(e) => e.f.eval(&[x[0], x[1], r]),
            FactorKind::Warped(w) => w.profile.h.eval(&[w.r_of_s(r)]).ln(),
        }
    }

    pub fn jet(&self, x: [f64; 2], r: f64) -> FactorJet {
        if self.mode == DerivativeMode::FiniteDifference {
            return self.fd_jet(x, r);
        }
        match &self.kind {
            FactorKind::Zero => FactorJet::default(),
            FactorKind::Expr(e) => {
                let s = [x[0], x[1], r];
                FactorJet {
                    f: e.f.eval(&s),
                    df: [e.dx[0].eval(&s), e.dx[1].eval(&s)],
                    f_r: e.dr.eval(&s),
                    df_r: [e.dxr[0].eval(&s), e.dxr[1].eval(&s)],
                    f_rr: e.drr.eval(&s),
                }
            }
            FactorKind::Warped(w) => {
                // f(s) = ln h(r(s)), dr/ds = h  =>  f_s = h'(r), f_ss = h''(r) h(r)
                let rr = [w.r_of_s(r)];
                let h = w.profile.h.eval(&rr);
                FactorJet {
                    f: h.ln(),
                    df: [0.0; 2],
                    f_r: w.profile.dh.eval(&rr),
                    df_r: [0.0; 2],
                    f_rr: w.profile.d2h.eval(&rr) * h,
                }
            }
        }
    }

    /// Central differences of [`Self::value`]: step 1e-6 for first
    /// derivatives, differences of those with step 1e-4 for second ones.
    fn fd_jet(&self, x: [f64; 2], r: f64) -> FactorJet {
        let h = FD_STEP;
        let first = |x: [f64; 2], r: f64| {
            let dr = (self.value(x, r + h) - self.value(x, r - h)) / (2.0 * h);
            let mut df = [0.0; 2];
            for (a, d) in df.iter_mut().enumerate() {
                let (mut xp, mut xm) = (x, x);
                xp[a] += h;
                xm[a] -= h;
                *d = (self.value(xp, r) - self.value(xm, r)) / (2.0 * h);
            }
            (df, dr)
        };
        let (df, f_r) = first(x, r);
        let k = 1e-4;
        let (dfp, drp) = first(x, r + k);
        let (dfm, drm) = first(x, r - k);
        FactorJet {
            f: self.value(x, r),
            df,
            f_r,
            df_r: [(dfp[0] - dfm[0]) / (2.0 * k), (dfp[1] - dfm[1]) / (2.0 * k)],
            f_rr: (drp - drm) / (2.0 * k),
        }
    }

    fn checked_jet(&self, x: [f64; 2], r: f64, node: usize) -> Result<FactorJet> {
        let j = self.jet(x, r);
        if [j.f, j.df[0], j.df[1], j.f_r].iter().all(|v| v.is_finite()) {
            Ok(j)
        } else {
            Err(Error::Evaluation {
                what: format!("conformal factor `{}`", self.describe()),
                point: format!("node {node} (x={x:?}, r={r})"),
            })
        }
    }
}

/// Mean curvature of the graph of `u` in `e^{2f}(sigma + dr^2)` with respect to
/// the upward normal: `e^{-f} (H + n (-<Df, Du> + f_r) / omega)`, at
/// non-boundary nodes (boundary nodes are 0).
pub fn conformal_mean_curvature(
    u: &ScalarField,
    factor: &ConformalFactor,
    n: usize,
) -> Result<ScalarField> {
    let grid = u.grid();
    let h = mean_curvature_product(u);
    if factor.is_zero() {
        return Ok(h);
    }
    let mut out = vec![0.0; grid.len()];
    for &k in grid.interior_nodes() {
        let x = grid.position(k);
        let j = factor.checked_jet(x, u.values()[k], k)?;
        let g = node_gradient(grid, u.values(), k);
        let w = (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt();
        let df_nu = (-(j.df[0] * g[0] + j.df[1] * g[1]) + j.f_r) / w;
        out[k] = (-j.f).exp() * (h.values()[k] + n as f64 * df_nu);
    }
    Ok(ScalarField::from_vec(grid.clone(), out))
}

/// Independent evaluation of the conformal mean curvature from the weighted
/// divergence identity `H_f = e^{-(n+1)f} div(e^{nf} nu)`, where `nu` is the
/// product-unit upward normal extended vertically.
///
/// Only values of `f` are used: horizontal fluxes are weighted with `e^{nf}`
/// at the face midpoints at the node's own height, and the vertical term is a
/// centered difference in `r` with step equal to the smallest grid spacing.
pub fn divergence_oracle(
    u: &ScalarField,
    factor: &ConformalFactor,
    n: usize,
) -> Result<ScalarField> {
    let grid = u.grid();
    let nf = n as f64;
    let delta = grid.min_spacing();
    let mut out = vec![0.0; grid.len()];
    let weight = |x: [f64; 2], r: f64, k: usize| -> Result<f64> {
        let v = (nf * factor.value(x, r)).exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation {
                what: format!("conformal factor `{}`", factor.describe()),
                point: format!("node {k} (x={x:?}, r={r})"),
            })
        }
    };
    for &k in grid.interior_nodes() {
        let r = u.values()[k];
        let xk = grid.position(k);
        let mut div = 0.0;
        for a in 0..grid.dim() {
            let h = grid.spacing(a);
            let back = grid.neighbor(k, a, -1).expect("interior node");
            for (node, sign) in [(k, 1.0), (back, -1.0)] {
                let fg = face_gradient(grid, u.values(), node, a).expect("face exists");
                let w = (1.0 + fg.g[0] * fg.g[0] + fg.g[1] * fg.g[1]).sqrt();
                let mut xf = xk;
                xf[a] += 0.5 * sign * h;
                div += sign * weight(xf, r, k)? * (-fg.g[a] / w) / h;
            }
        }
        let g = node_gradient(grid, u.values(), k);
        let w = (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt();
        div += (weight(xk, r + delta, k)? - weight(xk, r - delta, k)?) / (2.0 * delta) / w;
        out[k] = (-(nf + 1.0) * factor.value(xk, r)).exp() * div;
    }
    Ok(ScalarField::from_vec(grid.clone(), out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Direction {
    /// Conformal target `H` to product `H' = e^f H - n (<Df, Y> + f_r t)`.
    ToProduct,
    /// Product `H'` back to `H = e^{-f} (H' + n (<Df, Y> + f_r t))`.
    ToConformal,
}

/// A PMC function carried between the conformal and the product metric.
#[derive(Clone, Debug)]
pub struct ConformalTransform {
    base: Pmc,
    factor: ConformalFactor,
    n: usize,
    direction: Direction,
}

impl PmcFunction for ConformalTransform {
    fn eval(&self, p: &PmcArg) -> f64 {
        let j = self.factor.jet(p.x, p.z);
        let corr = self.n as f64 * (j.df[0] * p.y[0] + j.df[1] * p.y[1] + j.f_r * p.t);
        match self.direction {
            Direction::ToProduct => j.f.exp() * self.base.eval(p) - corr,
            Direction::ToConformal => (-j.f).exp() * (self.base.eval(p) + corr),
        }
    }

    fn jet(&self, p: &PmcArg) -> PmcJet {
        let j = self.factor.jet(p.x, p.z);
        let b = self.base.jet(p);
        let nf = self.n as f64;
        let corr = nf * (j.df[0] * p.y[0] + j.df[1] * p.y[1] + j.f_r * p.t);
        let corr_z = nf * (j.df_r[0] * p.y[0] + j.df_r[1] * p.y[1] + j.f_rr * p.t);
        match self.direction {
            Direction::ToProduct => {
                let e = j.f.exp();
                PmcJet {
                    value: e * b.value - corr,
                    d_z: e * (j.f_r * b.value + b.d_z) - corr_z,
                    d_y: [e * b.d_y[0] - nf * j.df[0], e * b.d_y[1] - nf * j.df[1]],
                    d_t: e * b.d_t - nf * j.f_r,
                }
            }
            Direction::ToConformal => {
                let e = (-j.f).exp();
                let s = b.value + corr;
                PmcJet {
                    value: e * s,
                    d_z: e * (-j.f_r * s + b.d_z + corr_z),
                    d_y: [e * (b.d_y[0] + nf * j.df[0]), e * (b.d_y[1] + nf * j.df[1])],
                    d_t: e * (b.d_t + nf * j.f_r),
                }
            }
        }
    }

    fn describe(&self) -> String {
        match self.direction {
            Direction::ToProduct => format!(
                "product form of ({}) under f = {}",
                self.base.describe(),
                self.factor.describe()
            ),
            Direction::ToConformal => {
                format!(
                    "conformal form of ({}) under f = {}",
                    self.base.describe(),
                    self.factor.describe()
                )
            }
        }
    }
}

/// `H'(x, r, Y, t) = e^{f} H(x, r, Y, t) - n (<Df, Y> + f_r t)`: the graph of
/// `u` has mean curvature `H` in the conformal metric iff it has product mean
/// curvature `H'` for the same normal direction.
pub fn conformal_transform_pmc(h: Pmc, factor: &ConformalFactor, n: usize) -> Pmc {
    Arc::new(ConformalTransform {
        base: h,
        factor: factor.clone(),
        n,
        direction: Direction::ToProduct,
    })
}

/// Inverse of [`conformal_transform_pmc`].
pub fn inverse_conformal_transform_pmc(h_product: Pmc, factor: &ConformalFactor, n: usize) -> Pmc {
    Arc::new(ConformalTransform {
        base: h_product,
        factor: factor.clone(),
        n,
        direction: Direction::ToConformal,
    })
}

/// Warped profile `h(r) > 0` of the metric `h^2(r) sigma + dr^2`.
#[derive(Clone, Debug)]
pub struct WarpedProfile {
    h: Expr,
    dh: Expr,
    d2h: Expr,
}

impl WarpedProfile {
    pub fn from_expr(text: &str) -> Result<Self> {
        let h = Expr::parse(text, &Vars::PROFILE)?;
        let dh = h.derivative("r");
        let d2h = dh.derivative("r");
        Ok(WarpedProfile { h, dh, d2h })
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.h.eval(&[r])
    }

    pub fn describe(&self) -> String {
        self.h.source().to_string()
    }
}

const TABLE_INTERVALS: usize = 4096;
const QUAD_TOL: f64 = 1e-14;
const BISECTION_TOL: f64 = 1e-12;

/// The change of variable `ds = dr / h(r)`, `s(r_lo) = 0`, that turns
/// `h^2(r) sigma + dr^2` into `e^{2 f(s)} (sigma + ds^2)` with `f(s) = ln h(r(s))`.
#[derive(Debug)]
pub struct Reparametrization {
    profile: WarpedProfile,
    r_lo: f64,
    r_hi: f64,
    /// `s` at `TABLE_INTERVALS + 1` equispaced `r` nodes.
    s_at_r: Vec<f64>,
    /// `r` at `TABLE_INTERVALS + 1` equispaced `s` nodes.
    r_at_s: Vec<f64>,
    s_max: f64,
}

fn checked_h(profile: &WarpedProfile, r: f64) -> Result<f64> {
    let h = profile.eval(r);
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(Error::NonPositiveProfile { r, h })
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn step(
        f: &dyn Fn(f64) -> Result<f64>,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(
            step(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth - 1)?
                + step(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth - 1)?,
        )
    }
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, (a, fa), (m, fm), (b, fb), whole, tol, 40)
}

impl Reparametrization {
    pub fn new(profile: WarpedProfile, r_lo: f64, r_hi: f64) -> Result<Self> {
        if !(r_lo < r_hi) {
            return Err(Error::Config(format!(
                "warped interval needs r_lo < r_hi, got [{r_lo}, {r_hi}]"
            )));
        }
        let inv = |r: f64| checked_h(&profile, r).map(|h| 1.0 / h);
        let dr = (r_hi - r_lo) / TABLE_INTERVALS as f64;
        let mut s_at_r = Vec::with_capacity(TABLE_INTERVALS + 1);
        s_at_r.push(0.0);
        let mut acc = 0.0;
        for i in 0..TABLE_INTERVALS {
            let a = r_lo + i as f64 * dr;
            acc += adaptive_simpson(&inv, a, a + dr, QUAD_TOL)?;
            s_at_r.push(acc);
        }
        let s_max = acc;
        let mut rep = Reparametrization {
            profile,
            r_lo,
            r_hi,
            s_at_r,
            r_at_s: Vec::new(),
            s_max,
        };
        let ds = s_max / TABLE_INTERVALS as f64;
        let mut r_at_s = Vec::with_capacity(TABLE_INTERVALS + 1);
        for j in 0..=TABLE_INTERVALS {
            r_at_s.push(rep.invert(j as f64 * ds)?);
        }
        rep.r_at_s = r_at_s;
        Ok(rep)
    }

    pub fn s_range(&self) -> (f64, f64) {
        (0.0, self.s_max)
    }

    pub fn r_range(&self) -> (f64, f64) {
        (self.r_lo, self.r_hi)
    }

    pub fn profile(&self) -> &WarpedProfile {
        &self.profile
    }

    /// `s(r) = ∫_{r_lo}^{r} dr'/h(r')` by adaptive quadrature.
    pub fn s_of_r(&self, r: f64) -> Result<f64> {
        let dr = (self.r_hi - self.r_lo) / TABLE_INTERVALS as f64;
        let i = (((r - self.r_lo) / dr).floor().max(0.0) as usize).min(TABLE_INTERVALS - 1);
        let a = self.r_lo + i as f64 * dr;
        let inv = |r: f64| checked_h(&self.profile, r).map(|h| 1.0 / h);
        Ok(self.s_at_r[i] + adaptive_simpson(&inv, a, r, QUAD_TOL)?)
    }

    /// Bisection on the monotone map `s(r)`.
    fn invert(&self, s: f64) -> Result<f64> {
        let i = self
            .s_at_r
            .partition_point(|&v| v < s)
            .clamp(1, TABLE_INTERVALS);
        let dr = (self.r_hi - self.r_lo) / TABLE_INTERVALS as f64;
        let (mut lo, mut hi) = (self.r_lo + (i - 1) as f64 * dr, self.r_lo + i as f64 * dr);
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if self.s_of_r(mid)? < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `r(s)` by cubic Hermite interpolation of the inverted table, using
    /// `dr/ds = h(r)`. NaN outside `[0, s_max]`.
    pub fn r_of_s(&self, s: f64) -> f64 {
        let tol = 1e-12 * (1.0 + self.s_max);
        if !(s >= -tol && s <= self.s_max + tol) {
            return f64::NAN;
        }
        let ds = self.s_max / TABLE_INTERVALS as f64;
        let j = ((s / ds).floor().max(0.0) as usize).min(TABLE_INTERVALS - 1);
        let tau = (s - j as f64 * ds) / ds;
        let (r0, r1) = (self.r_at_s[j], self.r_at_s[j + 1]);
        let (m0, m1) = (self.profile.eval(r0) * ds, self.profile.eval(r1) * ds);
        let t2 = tau * tau;
        let t3 = t2 * tau;
        (2.0 * t3 - 3.0 * t2 + 1.0) * r0
            + (t3 - 2.0 * t2 + tau) * m0
            + (-2.0 * t3 + 3.0 * t2) * r1
            + (t3 - t2) * m1
    }
}

/// Reparametrizes a warped product over `[r_lo, r_hi]` as a conformal product:
/// returns the `s` interval `[0, s(r_hi)]`, the factor `f(s) = ln h(r(s))`,
/// and the underlying change of variable.
pub fn warped_to_conformal(
    profile: WarpedProfile,
    r_lo: f64,
    r_hi: f64,
) -> Result<((f64, f64), ConformalFactor, Arc<Reparametrization>)> {
    let rep = Arc::new(Reparametrization::new(profile, r_lo, r_hi)?);
    let factor = ConformalFactor {
        kind: FactorKind::Warped(rep.clone()),
        mode: DerivativeMode::Analytic,
    };
    Ok((rep.s_range(), factor, rep))
}

/// `Theta = <nu, d_r> = 1 / omega` at every node.
pub fn theta_field(u: &ScalarField) -> ScalarField {
    let grid = u.grid();
    let values = (0..grid.len())
        .map(|k| {
            let g = node_gradient(grid, u.values(), k);
            1.0 / (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt()
        })
        .collect();
    ScalarField::from_vec(grid.clone(), values)
}

fn second_fundamental_at(g: [f64; 2], hs: &[[f64; 2]; 2], d: usize) -> f64 {
    let w2 = 1.0 + g[0] * g[0] + g[1] * g[1];
    let w = w2.sqrt();
    // m^k_i = (1/w) g^{kl} u_{li}, g^{kl} = delta_kl - u_k u_l / w^2
    let mut m = [[0.0; 2]; 2];
    for k in 0..d {
        for i in 0..d {
            let mut acc = 0.0;
            for l in 0..d {
                let ginv = if k == l { 1.0 } else { 0.0 } - g[k] * g[l] / w2;
                acc += ginv * hs[l][i];
            }
            m[k][i] = acc / w;
        }
    }
    let mut a2 = 0.0;
    for k in 0..d {
        for i in 0..d {
            a2 += m[k][i] * m[i][k];
        }
    }
    a2.max(0.0)
}

/// Squared norm of the second fundamental form of the graph, node-wise.
pub fn second_fundamental_norm(u: &ScalarField) -> ScalarField {
    let grid = u.grid();
    let hs = hessian(grid, u.values());
    let values = (0..grid.len())
        .map(|k| second_fundamental_at(node_gradient(grid, u.values(), k), &hs[k], grid.dim()))
        .collect();
    ScalarField::from_vec(grid.clone(), values)
}

/// Residual of the Jacobi-type identity satisfied by the tilt function on a
/// graph of prescribed mean curvature over a flat base:
/// `Delta Theta + |A|^2 Theta - <grad H_Sigma, d_r>`, where the last term is
/// `<Du, D(H composed with u)> / omega^2`.
///
/// Only nodes at least two steps from a Dirichlet end are evaluated (the rest
/// are 0): `Theta` on the boundary comes from one-sided gradients, whose
/// error differs from the centered one at O(h^2), and the Laplacian would
/// turn that into an O(1) defect next to the boundary.
pub fn jacobi_residual<F: NodalPmc + ?Sized>(u: &ScalarField, h: &F) -> Result<ScalarField> {
    let grid = u.grid();
    let theta = theta_field(u);
    let lap = graph_laplacian(u, &theta)?;
    let a2 = second_fundamental_norm(u);
    let hc = composed_field(u, h)?;
    let mut out = vec![0.0; grid.len()];
    let deep = |k: usize| {
        let idx = grid.multi_index(k);
        grid.axes()
            .iter()
            .enumerate()
            .all(|(a, ax)| ax.is_periodic() || (idx[a] >= 2 && idx[a] + 3 <= ax.nodes))
    };
    for &k in grid.interior_nodes().iter().filter(|&&k| deep(k)) {
        let g = node_gradient(grid, u.values(), k);
        let dh = node_gradient(grid, hc.values(), k);
        let w2 = 1.0 + g[0] * g[0] + g[1] * g[1];
        let tangential = (g[0] * dh[0] + g[1] * dh[1]) / w2;
        out[k] = lap.values()[k] + a2.values()[k] * theta.values()[k] - tangential;
    }
    Ok(ScalarField::from_vec(grid.clone(), out))
}

/// Grid helper shared by the geometric tests and the acceptance suite:
/// the upper hemisphere of radius `r`.
pub fn cap_field(grid: &Arc<BaseGrid>, radius: f64) -> Result<ScalarField> {
    ScalarField::from_fn(grid, |x| {
        (radius * radius - x[0] * x[0] - x[1] * x[1]).sqrt()
    })
}
