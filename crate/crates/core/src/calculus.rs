//! Second-order finite-difference operators on [`BaseGrid`]s.
//!
//! Node-centered first derivatives are centered differences, with periodic
//! wraparound and second-order one-sided differences at Dirichlet end nodes.
//! Divergence-form operators are written in conservative flux form: the face
//! between node `k` and its `+1` neighbor along axis `a` carries the normal
//! difference `(u_q - u_k) / h_a` and, for every other axis `b`, the average
//! of the node-centered `D_b u` at `k` and `q`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{BaseGrid, Centering, ScalarField, Topology, VectorField};

const STENCIL_CAP: usize = 16;

/// Sparse linear functional over node values, with fixed capacity.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Stencil {
    idx: [usize; STENCIL_CAP],
    w: [f64; STENCIL_CAP],
    len: usize,
}

impl Default for Stencil {
    fn default() -> Self {
        Stencil {
            idx: [0; STENCIL_CAP],
            w: [0.0; STENCIL_CAP],
            len: 0,
        }
    }
}

impl Stencil {
    pub(crate) fn push(&mut self, k: usize, w: f64) {
        if let Some(i) = self.idx[..self.len].iter().position(|&j| j == k) {
            self.w[i] += w;
        } else {
            assert!(self.len < STENCIL_CAP, "stencil capacity exceeded");
            self.idx[self.len] = k;
            self.w[self.len] = w;
            self.len += 1;
        }
    }

    pub(crate) fn add_scaled(&mut self, other: &Stencil, s: f64) {
        for (k, w) in other.iter() {
            self.push(k, s * w);
        }
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx[..self.len]
            .iter()
            .copied()
            .zip(self.w[..self.len].iter().copied())
    }

    pub(crate) fn apply(&self, values: &[f64]) -> f64 {
        self.iter().map(|(k, w)| w * values[k]).sum()
    }
}

/// Node-centered first derivative along axis `a` at node `k`.
pub(crate) fn grad_stencil(grid: &BaseGrid, k: usize, a: usize) -> Stencil {
    let mut s = Stencil::default();
    let ax = grid.axis(a);
    let h = ax.spacing;
    let i = grid.multi_index(k)[a];
    let nb = |off: isize| grid.neighbor(k, a, off).expect("stencil inside the grid");
    if ax.topology == Topology::Periodic || (i > 0 && i + 1 < ax.nodes) {
        s.push(nb(1), 0.5 / h);
        s.push(nb(-1), -0.5 / h);
    } else if i == 0 {
        s.push(k, -1.5 / h);
        s.push(nb(1), 2.0 / h);
        s.push(nb(2), -0.5 / h);
    } else {
        s.push(k, 1.5 / h);
        s.push(nb(-1), -2.0 / h);
        s.push(nb(-2), 0.5 / h);
    }
    s
}

/// Pure second derivative along axis `a` at node `k`.
pub(crate) fn second_stencil(grid: &BaseGrid, k: usize, a: usize) -> Stencil {
    let mut s = Stencil::default();
    let ax = grid.axis(a);
    let h2 = ax.spacing * ax.spacing;
    let i = grid.multi_index(k)[a];
    let nb = |off: isize| grid.neighbor(k, a, off).expect("stencil inside the grid");
    if ax.topology == Topology::Periodic || (i > 0 && i + 1 < ax.nodes) {
        s.push(nb(1), 1.0 / h2);
        s.push(k, -2.0 / h2);
        s.push(nb(-1), 1.0 / h2);
    } else {
        let dir = if i == 0 { 1 } else { -1 };
        s.push(k, 2.0 / h2);
        s.push(nb(dir), -5.0 / h2);
        s.push(nb(2 * dir), 4.0 / h2);
        s.push(nb(3 * dir), -1.0 / h2);
    }
    s
}

/// Face gradient on the face between `k` and its `+1` neighbor along `a`,
/// with the stencil of every component.
pub(crate) struct FaceGradient {
    pub(crate) g: [f64; 2],
    pub(crate) stencils: [Stencil; 2],
}

pub(crate) fn face_gradient(
    grid: &BaseGrid,
    values: &[f64],
    k: usize,
    a: usize,
) -> Option<FaceGradient> {
    let q = grid.neighbor(k, a, 1)?;
    let mut stencils = [Stencil::default(); 2];
    let mut g = [0.0; 2];
    let h = grid.spacing(a);
    stencils[a].push(q, 1.0 / h);
    stencils[a].push(k, -1.0 / h);
    for b in (0..grid.dim()).filter(|&b| b != a) {
        stencils[b].add_scaled(&grad_stencil(grid, k, b), 0.5);
        stencils[b].add_scaled(&grad_stencil(grid, q, b), 0.5);
    }
    for c in 0..grid.dim() {
        g[c] = stencils[c].apply(values);
    }
    Some(FaceGradient { g, stencils })
}

/// Node-centered gradient.
pub fn gradient(u: &ScalarField) -> VectorField {
    let grid = u.grid();
    let components = (0..grid.dim())
        .map(|a| {
            (0..grid.len())
                .map(|k| grad_stencil(grid, k, a).apply(u.values()))
                .collect()
        })
        .collect();
    VectorField::new(grid.clone(), Centering::Node, components).expect("layout matches grid")
}

pub(crate) fn node_gradient(grid: &BaseGrid, values: &[f64], k: usize) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (a, ga) in g.iter_mut().enumerate().take(grid.dim()) {
        *ga = grad_stencil(grid, k, a).apply(values);
    }
    g
}

/// Conservative divergence of a face-centered field: at every non-boundary
/// node, the sum over axes of `(V_a[k] - V_a[k - e_a]) / h_a`. Boundary nodes get 0.
pub fn flux_divergence(v: &VectorField) -> Result<ScalarField> {
    if v.centering() != Centering::Face {
        return Err(Error::Centering {
            expected: "face-centered",
        });
    }
    let grid = v.grid();
    let mut out = vec![0.0; grid.len()];
    for &k in grid.interior_nodes() {
        let mut acc = 0.0;
        for a in 0..grid.dim() {
            let back = grid
                .neighbor(k, a, -1)
                .expect("interior node has both neighbors");
            let comp = v.component(a);
            acc += (comp[k] - comp[back]) / grid.spacing(a);
        }
        out[k] = acc;
    }
    Ok(ScalarField::from_vec(grid.clone(), out))
}

fn omega(g: &[f64; 2]) -> f64 {
    (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt()
}

/// Face field `Du / omega` of the graph of `u`.
pub fn unit_normal_flux(u: &ScalarField) -> VectorField {
    let grid = u.grid();
    let components = (0..grid.dim())
        .map(|a| {
            (0..grid.len())
                .map(|k| match face_gradient(grid, u.values(), k, a) {
                    Some(fg) => fg.g[a] / omega(&fg.g),
                    None => 0.0,
                })
                .collect()
        })
        .collect();
    VectorField::new(grid.clone(), Centering::Face, components).expect("layout matches grid")
}

/// Mean curvature `-div(Du / omega)` of the graph of `u` with respect to the
/// upward normal, in the product metric. Boundary nodes get 0.
pub fn mean_curvature_product(u: &ScalarField) -> ScalarField {
    let div = flux_divergence(&unit_normal_flux(u)).expect("face-centered");
    div.map(|v| -v)
}

/// Row `k` of the mean curvature operator and its derivative with respect to
/// the node values. `k` must not be a boundary node.
pub(crate) fn mean_curvature_row(grid: &BaseGrid, values: &[f64], k: usize) -> (f64, Stencil) {
    let mut value = 0.0;
    let mut jac = Stencil::default();
    for a in 0..grid.dim() {
        let h = grid.spacing(a);
        let back = grid
            .neighbor(k, a, -1)
            .expect("row node is not on the boundary");
        for (node, sign) in [(k, -1.0 / h), (back, 1.0 / h)] {
            let fg = face_gradient(grid, values, node, a).expect("face exists");
            let w = omega(&fg.g);
            let w3 = w * w * w;
            value += sign * fg.g[a] / w;
            // d(g_a / w) / d g_c = delta_ac / w - g_a g_c / w^3
            for c in 0..grid.dim() {
                let d = if c == a { 1.0 / w } else { 0.0 } - fg.g[a] * fg.g[c] / w3;
                jac.add_scaled(&fg.stencils[c], sign * d);
            }
        }
    }
    (value, jac)
}

/// Laplace-Beltrami operator of the graph metric `g_ij = delta_ij + u_i u_j`
/// applied to `phi`, in flux form: `(1/sqrt g) d_i (sqrt g g^ij d_j phi)`.
/// Boundary nodes get 0.
pub fn graph_laplacian(u: &ScalarField, phi: &ScalarField) -> Result<ScalarField> {
    u.check_same_grid(phi)?;
    let grid = u.grid();
    let d = grid.dim();
    let flux: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            (0..grid.len())
                .map(|k| {
                    let (Some(gu), Some(gp)) = (
                        face_gradient(grid, u.values(), k, a),
                        face_gradient(grid, phi.values(), k, a),
                    ) else {
                        return 0.0;
                    };
                    let w = omega(&gu.g);
                    // sqrt(g) * (g^{ab} d_b phi), g^{ab} = delta_ab - u_a u_b / w^2
                    let dot: f64 = (0..d).map(|b| gu.g[b] * gp.g[b]).sum();
                    w * (gp.g[a] - gu.g[a] * dot / (w * w))
                })
                .collect()
        })
        .collect();
    let div = flux_divergence(&VectorField::new(grid.clone(), Centering::Face, flux)?)?;
    let mut out = div.into_values();
    for &k in grid.interior_nodes() {
        out[k] /= omega(&node_gradient(grid, u.values(), k));
    }
    Ok(ScalarField::from_vec(grid.clone(), out))
}

/// Node-centered Hessian: pure second differences on the diagonal and the
/// centered cross stencil (composition of first differences) off it.
pub(crate) fn hessian(grid: &Arc<BaseGrid>, values: &[f64]) -> Vec<[[f64; 2]; 2]> {
    let d = grid.dim();
    let grads: Vec<Vec<f64>> = (0..d)
        .map(|b| {
            (0..grid.len())
                .map(|k| grad_stencil(grid, k, b).apply(values))
                .collect()
        })
        .collect();
    (0..grid.len())
        .map(|k| {
            let mut hs = [[0.0; 2]; 2];
            for a in 0..d {
                hs[a][a] = second_stencil(grid, k, a).apply(values);
                for b in 0..d {
                    if a != b {
                        hs[a][b] = grad_stencil(grid, k, a).apply(&grads[b]);
                    }
                }
            }
            if d == 2 {
                let m = 0.5 * (hs[0][1] + hs[1][0]);
                hs[0][1] = m;
                hs[1][0] = m;
            }
            hs
        })
        .collect()
}

/// Quadrature: trapezoid weights on Dirichlet axes, uniform on periodic ones.
pub fn integrate(phi: &ScalarField) -> f64 {
    let grid = phi.grid();
    phi.values()
        .iter()
        .enumerate()
        .map(|(k, v)| grid.weight(k) * v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{field_from_expr, GridSpec};
    use std::f64::consts::PI;

    fn grid(shape: &[usize], lengths: &[f64], topo: &[Topology]) -> Arc<BaseGrid> {
        BaseGrid::build(&GridSpec::new(shape, lengths, topo)).unwrap()
    }

    fn square(n: usize, lo: f64, hi: f64) -> Arc<BaseGrid> {
        BaseGrid::build(
            &GridSpec::new(&[n, n], &[hi - lo, hi - lo], &[Topology::Dirichlet; 2])
                .with_origin(&[lo, lo]),
        )
        .unwrap()
    }

    fn cap(g: &Arc<BaseGrid>, r: f64) -> ScalarField {
        ScalarField::from_fn(g, |x| (r * r - x[0] * x[0] - x[1] * x[1]).sqrt()).unwrap()
    }

    #[test]
    fn gradient_constant_and_affine() {
        let g = grid(&[9], &[1.0], &[Topology::Dirichlet]);
        let c = ScalarField::constant(&g, 7.0);
        assert!(gradient(&c).component(0).iter().all(|&v| v == 0.0));
        let x = field_from_expr(&g, "x1").unwrap();
        assert!(gradient(&x)
            .component(0)
            .iter()
            .all(|&v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn gradient_second_order_on_circle() {
        let err = |n: usize| {
            let g = grid(&[n], &[1.0], &[Topology::Periodic]);
            let u = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin()).unwrap();
            let du = gradient(&u);
            (0..n)
                .map(|k| {
                    (du.component(0)[k] - 2.0 * PI * (2.0 * PI * g.position(k)[0]).cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e64, e128) = (err(64), err(128));
        assert!((e64 / e128).log2() >= 1.9, "order {}", (e64 / e128).log2());
    }

    #[test]
    fn divergence_of_constant_flux_vanishes() {
        let g = grid(&[8, 8], &[1.0, 1.0], &[Topology::Dirichlet; 2]);
        let v = VectorField::faces_from_fn(&g, |_| [0.3, -1.2]);
        assert!(flux_divergence(&v)
            .unwrap()
            .values()
            .iter()
            .all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn divergence_theorem_on_torus() {
        let g = grid(&[16, 12], &[1.0, 2.0], &[Topology::Periodic; 2]);
        let v = VectorField::faces_from_fn(&g, |x| {
            [(3.0 * x[0]).sin() + x[1] * x[1], (x[0] * x[1]).exp()]
        });
        assert!(integrate(&flux_divergence(&v).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn divergence_of_linear_flux() {
        let g = grid(&[17, 17], &[1.0, 1.0], &[Topology::Dirichlet; 2]);
        let v = VectorField::faces_from_fn(&g, |x| [x[0], 0.0]);
        let d = flux_divergence(&v).unwrap();
        for &k in g.interior_nodes() {
            assert!((d.values()[k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn node_centered_input_is_rejected() {
        let g = grid(&[8], &[1.0], &[Topology::Periodic]);
        let v = gradient(&ScalarField::constant(&g, 1.0));
        assert!(matches!(flux_divergence(&v), Err(Error::Centering { .. })));
    }

    #[test]
    fn flat_graph_has_zero_curvature() {
        let g = square(9, 0.0, 1.0);
        assert!(mean_curvature_product(&ScalarField::constant(&g, 3.5))
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn curvature_of_unit_cap_converges_at_second_order() {
        let err = |n: usize| {
            let g = square(n + 1, -0.5, 0.5);
            let h = mean_curvature_product(&cap(&g, 1.0));
            h.add_constant(-2.0).interior_sup()
        };
        // The sup sits at the node next to a corner, which moves toward the
        // corner as h shrinks, so its order only approaches 2 from below.
        let (e1, e2, e3) = (err(32), err(64), err(128));
        let (p1, p2) = ((e1 / e2).log2(), (e2 / e3).log2());
        assert!(p1 >= 1.5 && p2 > p1 && e3 < 1e-4, "{e1} {e2} {e3}");
        let fixed = |n: usize| {
            let g = square(n + 1, -0.5, 0.5);
            (mean_curvature_product(&cap(&g, 1.0)).values()[g.linear_index([n / 16, n / 16])] - 2.0)
                .abs()
        };
        let (f1, f2, f3) = (fixed(32), fixed(64), fixed(128));
        assert!(
            (f1 / f2).log2() >= 1.95 && (f2 / f3).log2() >= 1.95,
            "{f1} {f2} {f3}"
        );
    }

    #[test]
    fn curvature_of_circle_arc() {
        let g = BaseGrid::build(
            &GridSpec::new(&[65], &[2.0], &[Topology::Dirichlet]).with_origin(&[-1.0]),
        )
        .unwrap();
        let u = ScalarField::from_fn(&g, |x| (4.0 - x[0] * x[0]).sqrt()).unwrap();
        let h = mean_curvature_product(&u);
        assert!(h.add_constant(-0.5).interior_sup() < 1e-3);
    }

    #[test]
    fn odd_symmetry_and_translation_invariance() {
        let g = grid(&[12, 10], &[1.0, 1.0], &[Topology::Periodic; 2]);
        let u = field_from_expr(
            &g,
            "0.3*sin(6.283185307179586*x1)*cos(6.283185307179586*x2) + x1*0",
        )
        .unwrap();
        let h = mean_curvature_product(&u);
        let hn = mean_curvature_product(&u.map(|v| -v));
        let hs = mean_curvature_product(&u.add_constant(0.75));
        for k in 0..g.len() {
            assert_eq!(hn.values()[k], -h.values()[k]);
            assert!((hs.values()[k] - h.values()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_row_matches_finite_differences() {
        let g = square(7, -0.5, 0.5);
        let u = field_from_expr(&g, "0.4*x1*x1 - 0.3*x1*x2 + 0.2*sin(3*x2)").unwrap();
        for &k in g.interior_nodes() {
            let (v, jac) = mean_curvature_row(&g, u.values(), k);
            assert!((v - mean_curvature_product(&u).values()[k]).abs() < 1e-12);
            for j in 0..g.len() {
                let mut up = u.values().to_vec();
                up[j] += 1e-6;
                let mut dn = u.values().to_vec();
                dn[j] -= 1e-6;
                let fd =
                    (mean_curvature_row(&g, &up, k).0 - mean_curvature_row(&g, &dn, k).0) / 2e-6;
                let an: f64 = jac.iter().filter(|(i, _)| *i == j).map(|(_, w)| w).sum();
                assert!(
                    (fd - an).abs() < 1e-6 * (1.0 + fd.abs()),
                    "k={k} j={j}: {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn graph_laplacian_flat_and_constant() {
        let g = square(17, 0.0, 1.0);
        let zero = ScalarField::constant(&g, 0.0);
        let phi = field_from_expr(&g, "x1^2").unwrap();
        let lap = graph_laplacian(&zero, &phi).unwrap();
        for &k in g.interior_nodes() {
            assert!((lap.values()[k] - 2.0).abs() < 1e-10);
        }
        let u = cap(&g, 2.0);
        let lc = graph_laplacian(&u, &ScalarField::constant(&g, 4.0)).unwrap();
        assert!(lc.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn quadrature() {
        let g = square(9, 0.0, 1.0);
        assert!((integrate(&ScalarField::constant(&g, 1.0)) - 1.0).abs() < 1e-14);
        let line = grid(&[11], &[1.0], &[Topology::Dirichlet]);
        assert!((integrate(&field_from_expr(&line, "x1").unwrap()) - 0.5).abs() < 1e-15);
        for n in [8, 9, 32] {
            let c = grid(&[n], &[1.0], &[Topology::Periodic]);
            let s = ScalarField::from_fn(&c, |x| (2.0 * PI * x[0]).sin().powi(2)).unwrap();
            assert!((integrate(&s) - 0.5).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn hessian_of_quadratic_is_exact() {
        let g = square(9, -1.0, 1.0);
        let u = field_from_expr(&g, "1.5*x1^2 - 0.5*x1*x2 + 2*x2^2").unwrap();
        for (k, h) in hessian(&g, u.values()).iter().enumerate() {
            assert!((h[0][0] - 3.0).abs() < 1e-9, "node {k}");
            assert!((h[1][1] - 4.0).abs() < 1e-9);
            assert!((h[0][1] + 0.5).abs() < 1e-9);
        }
    }
}
