//! Area and total-variation functionals of graphs, an independent
//! triangulated-area oracle, and refinement studies that look for
//! non-graphical limits.

use serde::Serialize;

use crate::calculus::node_gradient;
use crate::error::{Error, Result};
use crate::grid::{BaseGrid, ScalarField};
use crate::solver::Problem;

fn gradient_quadrature(u: &ScalarField, f: impl Fn(f64) -> f64) -> f64 {
    let grid = u.grid();
    (0..grid.len())
        .map(|k| {
            let g = node_gradient(grid, u.values(), k);
            grid.weight(k) * f(g[0] * g[0] + g[1] * g[1])
        })
        .sum()
}

/// `∫ sqrt(1 + |Du|^2)`, the perimeter of the subgraph, by node quadrature
/// of node-centered gradients.
pub fn area_functional(u: &ScalarField) -> f64 {
    gradient_quadrature(u, |g2| (1.0 + g2).sqrt())
}

/// `∫ |Du|` by the same quadrature as [`area_functional`].
pub fn total_variation(u: &ScalarField) -> f64 {
    gradient_quadrature(u, f64::sqrt)
}

/// Sum of the areas of the graph triangles over every cell, each cell split
/// along its lower-left to upper-right diagonal. Periodic axes include the
/// seam cells.
pub fn mesh_area_oracle(u: &ScalarField) -> Result<f64> {
    let grid = u.grid();
    if grid.dim() != 2 {
        return Err(Error::Grid(
            "the mesh area oracle needs a 2D grid; use arc_length_oracle in 1D".into(),
        ));
    }
    let shape = grid.shape();
    let cells = |a: usize| {
        if grid.axis(a).is_periodic() {
            shape[a]
        } else {
            shape[a] - 1
        }
    };
    let (h1, h2) = (grid.spacing(0), grid.spacing(1));
    let v = u.values();
    let mut area = 0.0;
    for i in 0..cells(0) {
        for j in 0..cells(1) {
            let (ip, jp) = ((i + 1) % shape[0], (j + 1) % shape[1]);
            let z = |a: usize, b: usize| v[grid.linear_index([a, b])];
            let p00 = [0.0, 0.0, z(i, j)];
            let p10 = [h1, 0.0, z(ip, j)];
            let p11 = [h1, h2, z(ip, jp)];
            let p01 = [0.0, h2, z(i, jp)];
            area += triangle_area(p00, p10, p11) + triangle_area(p00, p11, p01);
        }
    }
    Ok(area)
}

fn triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let e = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let f = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let n = [
        e[1] * f[2] - e[2] * f[1],
        e[2] * f[0] - e[0] * f[2],
        e[0] * f[1] - e[1] * f[0],
    ];
    0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
}

/// Polygonal length of a 1D graph.
pub fn arc_length_oracle(u: &ScalarField) -> Result<f64> {
    let grid = u.grid();
    if grid.dim() != 1 {
        return Err(Error::Grid("the arc-length oracle needs a 1D grid".into()));
    }
    let ax = grid.axis(0);
    let segments = if ax.is_periodic() {
        ax.nodes
    } else {
        ax.nodes - 1
    };
    let v = u.values();
    Ok((0..segments)
        .map(|i| ax.spacing.hypot(v[(i + 1) % ax.nodes] - v[i]))
        .sum())
}

/// Metrics of one refinement level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelMetrics {
    pub spacing: f64,
    pub shape: Vec<usize>,
    pub converged: bool,
    pub error: Option<String>,
    pub outer_iterations: Option<usize>,
    pub final_residual: Option<f64>,
    pub max_gradient: Option<f64>,
    pub min_theta: Option<f64>,
    pub total_variation: Option<f64>,
    pub area: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementReport {
    pub levels: Vec<LevelMetrics>,
    /// `max|Du|` ratio between consecutive converged levels.
    pub gradient_growth: Vec<f64>,
    /// Observed orders of the area from consecutive converged triples.
    pub area_orders: Vec<f64>,
    pub min_theta_decreasing: bool,
    pub suspected_non_graphical: bool,
}

/// Observed order from three consecutive values of a quantity under halving.
pub fn observed_order(q0: f64, q1: f64, q2: f64) -> f64 {
    ((q1 - q0) / (q2 - q1)).abs().log2()
}

/// Solves `problem` on `levels` grids, halving the spacing each time, and
/// collects gradient, tilt and functional values. A level that fails is
/// recorded and the study continues.
pub fn blowup_diagnostics(problem: &Problem, levels: usize) -> Result<RefinementReport> {
    if levels < 2 {
        return Err(Error::Config(
            "a refinement study needs at least 2 levels".into(),
        ));
    }
    let mut p = problem.clone();
    p.config.refinement_check = false;
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let grid = BaseGrid::build(&problem.grid.refined(level))?;
        let mut m = LevelMetrics {
            spacing: grid.max_spacing(),
            shape: grid.shape(),
            converged: false,
            error: None,
            outer_iterations: None,
            final_residual: None,
            max_gradient: None,
            min_theta: None,
            total_variation: None,
            area: None,
        };
        match p.solve_on(&grid) {
            Ok((v, rep)) => {
                m.converged = rep.converged;
                m.outer_iterations = Some(rep.outer_iterations);
                m.final_residual = Some(rep.final_residual);
                m.max_gradient = Some(rep.max_gradient);
                m.min_theta = Some(rep.min_theta);
                m.total_variation = Some(total_variation(&v));
                m.area = Some(area_functional(&v));
            }
            Err(e) => m.error = Some(e.to_string()),
        }
        out.push(m);
    }
    let converged: Vec<&LevelMetrics> = out.iter().filter(|m| m.converged).collect();
    let gradient_growth: Vec<f64> = converged
        .windows(2)
        .map(|w| {
            let (a, b) = (
                w[0].max_gradient.unwrap_or(0.0),
                w[1].max_gradient.unwrap_or(0.0),
            );
            if a > 0.0 {
                b / a
            } else if b > 0.0 {
                f64::INFINITY
            } else {
                1.0
            }
        })
        .collect();
    let area_orders = converged
        .windows(3)
        .map(|w| {
            observed_order(
                w[0].area.unwrap_or(0.0),
                w[1].area.unwrap_or(0.0),
                w[2].area.unwrap_or(0.0),
            )
        })
        .collect();
    let min_theta_decreasing = converged
        .windows(2)
        .all(|w| w[1].min_theta.unwrap_or(0.0) < w[0].min_theta.unwrap_or(0.0));
    let all_converged = converged.len() == out.len();
    let suspected_non_graphical =
        all_converged && !gradient_growth.is_empty() && gradient_growth.iter().all(|&g| g >= 2.0);
    Ok(RefinementReport {
        levels: out,
        gradient_growth,
        area_orders,
        min_theta_decreasing,
        suspected_non_graphical,
    })
}
