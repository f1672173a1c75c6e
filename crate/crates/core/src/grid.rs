//! Uniform structured discretizations of a flat base manifold and the
//! node-indexed fields that live on them.
//!
//! Nodes are stored in row-major order: for a 2D grid of shape `[s1, s2]` the
//! node with multi-index `(i1, i2)` has linear index `i1 * s2 + i2`, so the
//! last axis varies fastest. A periodic axis of `s` nodes covers `[o, o + L)`
//! with spacing `L / s`; the seam node `o + L` is the same point as `o` and is
//! not stored. A Dirichlet axis covers `[o, o + L]` with spacing `L / (s - 1)`.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Vars};

/// Smallest admissible node count per axis.
pub const MIN_NODES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Periodic,
    Dirichlet,
}

impl Topology {
    pub fn tag(self) -> char {
        match self {
            Topology::Periodic => 'p',
            Topology::Dirichlet => 'd',
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        match s {
            "p" | "periodic" => Some(Topology::Periodic),
            "d" | "dirichlet" => Some(Topology::Dirichlet),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub nodes: usize,
    pub length: f64,
    pub origin: f64,
    pub spacing: f64,
    pub topology: Topology,
}

impl Axis {
    pub fn coordinate(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn is_periodic(&self) -> bool {
        self.topology == Topology::Periodic
    }
}

/// User-facing description of a grid, as found in run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub lengths: Vec<f64>,
    pub topology: Vec<Topology>,
    #[serde(default)]
    pub origin: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn new(shape: &[usize], lengths: &[f64], topology: &[Topology]) -> Self {
        GridSpec {
            dim: shape.len(),
            shape: shape.to_vec(),
            lengths: lengths.to_vec(),
            topology: topology.to_vec(),
            origin: None,
        }
    }

    pub fn with_origin(mut self, origin: &[f64]) -> Self {
        self.origin = Some(origin.to_vec());
        self
    }

    /// Same domain with every spacing halved.
    pub fn halved(&self) -> Self {
        let shape = self
            .shape
            .iter()
            .zip(&self.topology)
            .map(|(&s, t)| match t {
                Topology::Periodic => 2 * s,
                Topology::Dirichlet => 2 * (s - 1) + 1,
            })
            .collect();
        GridSpec {
            shape,
            ..self.clone()
        }
    }

    pub fn refined(&self, levels: usize) -> Self {
        (0..levels).fold(self.clone(), |g, _| g.halved())
    }
}

/// Uniform discretization of a 1D or 2D flat base.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseGrid {
    axes: Vec<Axis>,
    boundary: Vec<bool>,
    boundary_nodes: Vec<usize>,
    interior_nodes: Vec<usize>,
}

impl BaseGrid {
    pub fn build(spec: &GridSpec) -> Result<Arc<BaseGrid>> {
        let d = spec.dim;
        if !(1..=2).contains(&d) {
            return Err(Error::Grid(format!("dimension must be 1 or 2, got {d}")));
        }
        if spec.shape.len() != d || spec.lengths.len() != d || spec.topology.len() != d {
            return Err(Error::Grid(format!(
                "shape, lengths and topology must each have {d} entries"
            )));
        }
        let origin = match &spec.origin {
            Some(o) if o.len() != d => {
                return Err(Error::Grid(format!("origin must have {d} entries")))
            }
            Some(o) => o.clone(),
            None => vec![0.0; d],
        };
        let mut axes = Vec::with_capacity(d);
        for a in 0..d {
            let (nodes, length, topology) = (spec.shape[a], spec.lengths[a], spec.topology[a]);
            if !(length > 0.0) || !length.is_finite() {
                return Err(Error::GridAxis {
                    axis: a,
                    reason: format!("length must be positive, got {length}"),
                });
            }
            if nodes < MIN_NODES {
                return Err(Error::GridAxis {
                    axis: a,
                    reason: format!("needs at least {MIN_NODES} nodes, got {nodes}"),
                });
            }
            if !origin[a].is_finite() {
                return Err(Error::GridAxis {
                    axis: a,
                    reason: "origin is not finite".into(),
                });
            }
            let spacing = match topology {
                Topology::Periodic => length / nodes as f64,
                Topology::Dirichlet => length / (nodes - 1) as f64,
            };
            axes.push(Axis {
                nodes,
                length,
                origin: origin[a],
                spacing,
                topology,
            });
        }

        let count: usize = axes.iter().map(|a| a.nodes).product();
        let mut grid = BaseGrid {
            axes,
            boundary: vec![false; count],
            boundary_nodes: Vec::new(),
            interior_nodes: Vec::new(),
        };
        for k in 0..count {
            let idx = grid.multi_index(k);
            let on_boundary = grid.axes.iter().enumerate().any(|(a, ax)| {
                ax.topology == Topology::Dirichlet && (idx[a] == 0 || idx[a] == ax.nodes - 1)
            });
            grid.boundary[k] = on_boundary;
            if on_boundary {
                grid.boundary_nodes.push(k);
            } else {
                grid.interior_nodes.push(k);
            }
        }
        Ok(Arc::new(grid))
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.nodes).collect()
    }

    pub fn spacing(&self, a: usize) -> f64 {
        self.axes[a].spacing
    }

    pub fn max_spacing(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| a.spacing)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundary.is_empty()
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary[k]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn all_periodic(&self) -> bool {
        self.axes.iter().all(Axis::is_periodic)
    }

    /// Product of the domain lengths.
    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.length).product()
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            dim: self.dim(),
            shape: self.shape(),
            lengths: self.axes.iter().map(|a| a.length).collect(),
            topology: self.axes.iter().map(|a| a.topology).collect(),
            origin: Some(self.axes.iter().map(|a| a.origin).collect()),
        }
    }

    pub fn multi_index(&self, k: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [k, 0]
        } else {
            let s2 = self.axes[1].nodes;
            [k / s2, k % s2]
        }
    }

    pub fn linear_index(&self, idx: [usize; 2]) -> usize {
        if self.dim() == 1 {
            idx[0]
        } else {
            idx[0] * self.axes[1].nodes + idx[1]
        }
    }

    /// Coordinates of node `k`; the unused second coordinate of a 1D grid is 0.
    pub fn position(&self, k: usize) -> [f64; 2] {
        let idx = self.multi_index(k);
        let mut x = [0.0; 2];
        for (a, ax) in self.axes.iter().enumerate() {
            x[a] = ax.coordinate(idx[a]);
        }
        x
    }

    /// Neighbor `offset` steps along axis `a`, wrapping on periodic axes.
    /// `None` when the step leaves a Dirichlet axis.
    pub fn neighbor(&self, k: usize, a: usize, offset: isize) -> Option<usize> {
        let ax = &self.axes[a];
        let mut idx = self.multi_index(k);
        let n = ax.nodes as isize;
        let j = idx[a] as isize + offset;
        let j = match ax.topology {
            Topology::Periodic => j.rem_euclid(n),
            Topology::Dirichlet if (0..n).contains(&j) => j,
            Topology::Dirichlet => return None,
        };
        idx[a] = j as usize;
        Some(self.linear_index(idx))
    }

    /// Quadrature weight of node `k`: trapezoid on Dirichlet axes, uniform on periodic ones.
    pub fn weight(&self, k: usize) -> f64 {
        let idx = self.multi_index(k);
        self.axes
            .iter()
            .enumerate()
            .map(|(a, ax)| {
                let end =
                    ax.topology == Topology::Dirichlet && (idx[a] == 0 || idx[a] == ax.nodes - 1);
                if end {
                    0.5 * ax.spacing
                } else {
                    ax.spacing
                }
            })
            .product()
    }

    pub fn csv_header(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        format!(
            "# dim={} shape={} lengths={} topology={} origin={}",
            self.dim(),
            join(self.axes.iter().map(|a| a.nodes.to_string()).collect()),
            join(self.axes.iter().map(|a| a.length.to_string()).collect()),
            join(
                self.axes
                    .iter()
                    .map(|a| a.topology.tag().to_string())
                    .collect()
            ),
            join(self.axes.iter().map(|a| a.origin.to_string()).collect()),
        )
    }

    fn parse_csv_header(line: &str) -> Result<GridSpec> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| Error::Grid("field CSV must start with a `#` header".into()))?;
        let mut dim = None;
        let mut shape = None;
        let mut lengths = None;
        let mut topology = None;
        let mut origin = None;
        let nums = |v: &str| -> Result<Vec<f64>> {
            v.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Grid(format!("bad number `{s}`: {e}")))
                })
                .collect()
        };
        for item in body.split_whitespace() {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Grid(format!("malformed header item `{item}`")))?;
            match key {
                "dim" => {
                    dim = Some(
                        value
                            .parse::<usize>()
                            .map_err(|e| Error::Grid(e.to_string()))?,
                    )
                }
                "shape" => {
                    shape = Some(
                        value
                            .split(',')
                            .map(|s| s.parse::<usize>().map_err(|e| Error::Grid(e.to_string())))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "lengths" => lengths = Some(nums(value)?),
                "origin" => origin = Some(nums(value)?),
                "topology" => {
                    topology = Some(
                        value
                            .split(',')
                            .map(|s| {
                                Topology::from_tag(s)
                                    .ok_or_else(|| Error::Grid(format!("bad topology `{s}`")))
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                other => return Err(Error::Grid(format!("unknown header key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::Grid(format!("header is missing `{k}`"));
        Ok(GridSpec {
            dim: dim.ok_or_else(|| missing("dim"))?,
            shape: shape.ok_or_else(|| missing("shape"))?,
            lengths: lengths.ok_or_else(|| missing("lengths"))?,
            topology: topology.ok_or_else(|| missing("topology"))?,
            origin,
        })
    }
}

/// One real value per node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Arc<BaseGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<BaseGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(ScalarField { grid, values })
    }

    /// Caller guarantees length; finiteness is only debug-checked.
    pub(crate) fn from_vec(grid: Arc<BaseGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn constant(grid: &Arc<BaseGrid>, c: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: &Arc<BaseGrid>, mut f: impl FnMut([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.position(k))).collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Arc<BaseGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField::from_vec(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn add_constant(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute value over interior nodes (all nodes on periodic grids).
    pub fn interior_sup(&self) -> f64 {
        self.grid
            .interior_nodes()
            .iter()
            .map(|&k| self.values[k].abs())
            .fold(0.0, f64::max)
    }

    pub fn interior_max(&self) -> f64 {
        self.grid
            .interior_nodes()
            .iter()
            .map(|&k| self.values[k])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn interior_min(&self) -> f64 {
        self.grid
            .interior_nodes()
            .iter()
            .map(|&k| self.values[k])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.grid.csv_header();
        out.push('\n');
        for v in &self.values {
            let _ = writeln!(out, "{v:.16e}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Grid("empty field CSV".into()))?;
        let grid = BaseGrid::build(&BaseGrid::parse_csv_header(header.trim())?)?;
        let values = lines
            .enumerate()
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Grid(format!("value line {}: {e}", i + 2)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }
}

/// Max over nodes of `|a - b|`.
pub fn sup_norm(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.check_same_grid(b)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Samples an expression in `x1[, x2]` at the grid nodes.
pub fn field_from_expr(grid: &Arc<BaseGrid>, expr: &str) -> Result<ScalarField> {
    let e = Expr::parse(expr, &Vars::BASE)?;
    let values: Vec<f64> = (0..grid.len())
        .map(|k| {
            let x = grid.position(k);
            e.eval(&x)
        })
        .collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            what: format!("`{expr}`"),
            point: format!("node {k} at {:?}", grid.position(k)),
        });
    }
    Ok(ScalarField::from_vec(grid.clone(), values))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Centering {
    /// Component `a` at node `k` is the value at the node.
    Node,
    /// Component `a` at node `k` is the value on the face between `k` and its
    /// `+1` neighbor along axis `a`. On Dirichlet axes the last face is unused.
    Face,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Arc<BaseGrid>,
    centering: Centering,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(
        grid: Arc<BaseGrid>,
        centering: Centering,
        components: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if components.len() != grid.dim() || components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Grid(
                "vector field components do not match the grid layout".into(),
            ));
        }
        Ok(VectorField {
            grid,
            centering,
            components,
        })
    }

    /// Face field sampled from a function of position, evaluated at face midpoints.
    pub fn faces_from_fn(grid: &Arc<BaseGrid>, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let components = (0..grid.dim())
            .map(|a| {
                let h = grid.spacing(a);
                (0..grid.len())
                    .map(|k| {
                        let mut x = grid.position(k);
                        x[a] += 0.5 * h;
                        f(x)[a]
                    })
                    .collect()
            })
            .collect();
        VectorField {
            grid: grid.clone(),
            centering: Centering::Face,
            components,
        }
    }

    pub fn grid(&self) -> &Arc<BaseGrid> {
        &self.grid
    }

    pub fn centering(&self) -> Centering {
        self.centering
    }

    pub fn component(&self, a: usize) -> &[f64] {
        &self.components[a]
    }

    /// Euclidean norm per node of a node-centered field.
    pub fn norm(&self) -> Result<ScalarField> {
        if self.centering != Centering::Node {
            return Err(Error::Centering {
                expected: "node-centered",
            });
        }
        let values = (0..self.grid.len())
            .map(|k| {
                self.components
                    .iter()
                    .map(|c| c[k] * c[k])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        Ok(ScalarField::from_vec(self.grid.clone(), values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(shape: &[usize], lengths: &[f64], topo: &[Topology]) -> Arc<BaseGrid> {
        BaseGrid::build(&GridSpec::new(shape, lengths, topo)).unwrap()
    }

    #[test]
    fn periodic_circle() {
        let g = grid(&[8], &[1.0], &[Topology::Periodic]);
        assert_eq!(g.len(), 8);
        assert_eq!(g.spacing(0), 0.125);
        assert!(g.boundary_nodes().is_empty());
        // seam is not stored twice
        assert_eq!(g.neighbor(7, 0, 1), Some(0));
        assert!((g.position(7)[0] - 0.875).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_square_boundary_count() {
        let g = grid(&[5, 5], &[1.0, 1.0], &[Topology::Dirichlet; 2]);
        assert_eq!(g.len(), 25);
        assert_eq!(g.boundary_nodes().len(), 16);
        assert_eq!(g.interior_nodes().len(), 9);
    }

    #[test]
    fn torus_has_no_boundary() {
        let g = grid(&[64, 64], &[1.0, 1.0], &[Topology::Periodic; 2]);
        assert!(g.boundary_nodes().is_empty());
        assert_eq!(g.interior_nodes().len(), 64 * 64);
    }

    #[test]
    fn mixed_topology_boundary_is_end_planes() {
        let g = grid(
            &[6, 5],
            &[1.0, 1.0],
            &[Topology::Periodic, Topology::Dirichlet],
        );
        assert_eq!(g.boundary_nodes().len(), 12);
    }

    #[test]
    fn construction_errors_name_the_axis() {
        let e = BaseGrid::build(&GridSpec::new(
            &[8, 3],
            &[1.0, 1.0],
            &[Topology::Periodic; 2],
        ))
        .unwrap_err();
        assert!(matches!(e, Error::GridAxis { axis: 1, .. }), "{e}");
        let e = BaseGrid::build(&GridSpec::new(&[8], &[-1.0], &[Topology::Periodic])).unwrap_err();
        assert!(matches!(e, Error::GridAxis { axis: 0, .. }), "{e}");
    }

    #[test]
    fn expression_sampling() {
        let g = grid(&[5], &[1.0], &[Topology::Dirichlet]);
        let f = field_from_expr(&g, "x1").unwrap();
        assert_eq!(f.values(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let z = field_from_expr(&g, "0").unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));

        let c = grid(&[64], &[1.0], &[Topology::Periodic]);
        let s = field_from_expr(&c, "sin(6.283185307179586*x1)").unwrap();
        let direct = ScalarField::from_fn(&c, |x| (std::f64::consts::TAU * x[0]).sin()).unwrap();
        assert!(sup_norm(&s, &direct).unwrap() <= 1e-12);
    }

    #[test]
    fn expression_rejects_height_variables() {
        let g = grid(&[5], &[1.0], &[Topology::Dirichlet]);
        for bad in ["z", "x1 + y1", "t", "y2*2"] {
            assert!(
                matches!(field_from_expr(&g, bad), Err(Error::Variable { .. })),
                "{bad}"
            );
        }
        assert!(matches!(
            field_from_expr(&g, "x1 +"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn sup_norm_examples() {
        let g = grid(&[5], &[1.0], &[Topology::Dirichlet]);
        let x = field_from_expr(&g, "x1").unwrap();
        let x2 = field_from_expr(&g, "2*x1").unwrap();
        assert_eq!(sup_norm(&x, &x).unwrap(), 0.0);
        assert_eq!(
            sup_norm(
                &ScalarField::constant(&g, 0.0),
                &ScalarField::constant(&g, 1.0)
            )
            .unwrap(),
            1.0
        );
        assert_eq!(sup_norm(&x, &x2).unwrap(), 1.0);
        let other = grid(&[6], &[1.0], &[Topology::Dirichlet]);
        assert!(matches!(
            sup_norm(&x, &ScalarField::constant(&other, 0.0)),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn csv_round_trip() {
        let g = BaseGrid::build(
            &GridSpec::new(
                &[4, 5],
                &[1.5, 2.0],
                &[Topology::Periodic, Topology::Dirichlet],
            )
            .with_origin(&[-0.5, 0.25]),
        )
        .unwrap();
        let f = ScalarField::from_fn(&g, |x| (x[0] * 3.0).sin() + x[1] / 7.0).unwrap();
        let text = f.to_csv();
        assert!(text.starts_with("# dim=2 shape=4,5 lengths=1.5,2 topology=p,d origin=-0.5,0.25\n"));
        let back = ScalarField::from_csv(&text).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn halving_refines_spacing() {
        let s = GridSpec::new(
            &[8, 5],
            &[1.0, 1.0],
            &[Topology::Periodic, Topology::Dirichlet],
        );
        let g = BaseGrid::build(&s.halved()).unwrap();
        assert_eq!(g.shape(), vec![16, 9]);
        assert_eq!(g.spacing(0), 1.0 / 16.0);
        assert_eq!(g.spacing(1), 1.0 / 8.0);
    }
}
