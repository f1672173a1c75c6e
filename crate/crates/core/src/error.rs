use thiserror::Error;

/// Errors raised by grid construction, expression handling, geometry and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("axis {axis}: {reason}")]
    GridAxis { axis: usize, reason: String },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field value at node {node} is not finite")]
    NonFinite { node: usize },

    #[error("expected a {expected} vector field")]
    Centering { expected: &'static str },

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("variable `{name}` is not allowed here (allowed: {allowed})")]
    Variable { name: String, allowed: String },

    #[error("{what} is not finite at {point}")]
    Evaluation { what: String, point: String },

    #[error("heights leave the working box [{lo}, {hi}] at nodes {nodes:?}")]
    OutsideBox { lo: f64, hi: f64, nodes: Vec<usize> },

    #[error("barrier ordering violated: u1 >= u0 at node {node} (u1 = {u1}, u0 = {u0})")]
    BarrierOrder { node: usize, u1: f64, u0: f64 },

    #[error("invalid barrier pair: {0}")]
    Barrier(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("warped profile is not positive at r = {r} (h = {h})")]
    NonPositiveProfile { r: f64, h: f64 },

    #[error("PMC function is not monotone: d/dz = {value} at {point}")]
    NotMonotone { value: f64, point: String },

    #[error("linear solve failed: {0}")]
    Linear(String),

    #[error(transparent)]
    Solve(#[from] Box<crate::solver::SolveFailure>),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
