//! Prescribed mean curvature graphs over flat bases.
//!
//! A graph `r = u(x)` over a 1D or 2D base (interval, circle, rectangle,
//! flat torus) is discretized on a uniform grid. The crate evaluates its mean
//! curvature in the product metric `sigma + dr^2` and in conformal products
//! `e^{2f}(sigma + dr^2)`, solves `H_graph = H(x, u, nu)` for monotone PMC
//! functions by damped Newton, and for general ones by a penalized monotone
//! iteration between a lower and an upper barrier.
//!
//! ```
//! use pmcgraph::{BaseGrid, GridSpec, Topology, ScalarField, mean_curvature_product};
//!
//! let spec = GridSpec::new(&[33, 33], &[1.0, 1.0], &[Topology::Dirichlet; 2]).with_origin(&[-0.5, -0.5]);
//! let grid = BaseGrid::build(&spec).unwrap();
//! let cap = ScalarField::from_fn(&grid, |x| (1.0 - x[0] * x[0] - x[1] * x[1]).sqrt()).unwrap();
//! let h = mean_curvature_product(&cap);
//! assert!(h.add_constant(-2.0).interior_sup() < 1e-2);
//! ```

// `!(a < b)` comparisons are deliberate: they also reject NaN
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::redundant_guards
)]

pub mod analysis;
pub mod calculus;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod pmc;
pub mod solver;

pub use analysis::{
    arc_length_oracle, area_functional, blowup_diagnostics, mesh_area_oracle, observed_order,
    total_variation, LevelMetrics, RefinementReport,
};
pub use calculus::{
    flux_divergence, gradient, graph_laplacian, integrate, mean_curvature_product, unit_normal_flux,
};
pub use error::{Error, Result};
pub use expr::{Expr, Vars};
pub use geometry::{
    cap_field, conformal_mean_curvature, conformal_transform_pmc, divergence_oracle,
    inverse_conformal_transform_pmc, jacobi_residual, second_fundamental_norm, theta_field,
    warped_to_conformal, ConformalFactor, FactorJet, Reparametrization, WarpedProfile,
};
pub use grid::{
    field_from_expr, sup_norm, Axis, BaseGrid, Centering, GridSpec, ScalarField, Topology,
    VectorField,
};
pub use pmc::{
    check_monotone, check_quasi_decreasing, composed_field, parse_pmc, pmc_residual,
    DerivativeMode, ExprPmc, NodalPmc, Pmc, PmcArg, PmcFunction, PmcJet, QuasiDecomposition,
    SampleLattice, SignReport, WorkingBox,
};
pub use solver::{
    barriers_from_phi, boundary_interpolant, check_barrier, cutoff_profile, default_plateau,
    default_working_box, gamma_for, outer_iterate, solve_inner, solve_quasi, BarrierPair,
    BarrierReport, BarrierSpec, Cutoff, GammaCertificate, InnerReport, Problem, QuasiCertificate,
    SolveConfig, SolveFailure, SolveReport,
};

/// Crate version, recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
