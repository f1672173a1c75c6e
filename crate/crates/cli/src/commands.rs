//! The subcommands. Each returns an exit status and the body of its report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pmcgraph::{
    area_functional, blowup_diagnostics, check_barrier, check_monotone, check_quasi_decreasing,
    default_plateau, default_working_box, pmc_residual, total_variation, BarrierPair, Error,
    PmcFunction, SampleLattice, ScalarField, SolveReport, WorkingBox,
};
use serde_json::{json, Map, Value};

use crate::config::{Geometry, Setup};
use crate::report::{merge, to_value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Why a command could not produce a normal report.
#[derive(Debug)]
pub enum Failure {
    /// Invalid config or unusable input or output path (exit 2).
    Invalid(String),
    /// The solver stopped; the partial report is still written (exit 3).
    Solver(Map<String, Value>),
}

pub struct Outcome {
    pub exit: i32,
    pub report: Map<String, Value>,
}

/// Paths resolved from flags and config.
#[derive(Clone, Debug, Default)]
pub struct Paths {
    pub report: Option<PathBuf>,
    pub field: Option<PathBuf>,
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::Parse { .. }
            | Error::Variable { .. }
            | Error::Grid(_)
            | Error::GridAxis { .. }
            | Error::GridMismatch
            | Error::NonPositiveProfile { .. }
    )
}

/// Sorts an error into exit 2 (config) or exit 3 (solver) with a partial report.
fn classify(e: Error, paths: &Paths) -> Failure {
    if is_config_error(&e) {
        return Failure::Invalid(e.to_string());
    }
    let mut report = Map::new();
    report.insert("error".into(), json!(e.to_string()));
    let (history, best, partial) = match e {
        Error::Solve(f) => (f.residual_history, f.best_iterate, f.report),
        _ => (Vec::new(), None, None),
    };
    report.insert("residual_history".into(), to_value(&history));
    let best_path = best.and_then(|u| {
        let path = paths
            .field
            .clone()
            .or_else(|| paths.report.as_ref().map(|r| r.with_extension("best.csv")))?;
        write_text(&path, &u.to_csv()).ok()?;
        Some(path.display().to_string())
    });
    report.insert("best_iterate_path".into(), json!(best_path));
    report.insert(
        "partial_report".into(),
        partial.map_or(Value::Null, |r| to_value(&r)),
    );
    Failure::Solver(report)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    }
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn barriers(setup: &Setup, paths: &Paths) -> Result<BarrierPair, Failure> {
    let problem = setup.problem().map_err(Failure::Invalid)?;
    problem
        .barriers_on(&setup.grid)
        .map_err(|e| classify(e, paths))
}

/// Configured box, or the default one around the barriers.
fn working_box(setup: &Setup, paths: &Paths) -> Result<WorkingBox, Failure> {
    if let Some(b) = setup.working {
        return Ok(b);
    }
    if setup.barriers.is_none() {
        return Err(Failure::Invalid(
            "this command needs a `box` or a `barrier` section".into(),
        ));
    }
    let b = barriers(setup, paths)?;
    let plateau = setup
        .solver
        .cutoff
        .map_or_else(|| default_plateau(&b), |[c1, c2]| (c1, c2));
    default_working_box(plateau).map_err(|e| Failure::Invalid(e.to_string()))
}

fn geometry_entry(setup: &Setup) -> Value {
    match &setup.geometry {
        Geometry::Product => json!({"kind": "product"}),
        Geometry::Conformal(f) => json!({"kind": "conformal", "f": f.describe(), "n": setup.n}),
        Geometry::Warped { rep, .. } => json!({
            "kind": "warped",
            "h": rep.profile().describe(),
            "n": setup.n,
            "r_range": to_value(&rep.r_range()),
            "s_range": to_value(&rep.s_range()),
        }),
    }
}

fn solution_entries(
    setup: &Setup,
    v: &ScalarField,
    rep: &SolveReport,
) -> Result<Map<String, Value>, Failure> {
    let mut out = Map::new();
    let area = area_functional(v);
    out.insert(
        "functionals".into(),
        json!({"area": area, "total_variation": total_variation(v), "volume": setup.grid.volume()}),
    );
    if let Some(f) = setup.geometry.factor() {
        // the conformal residual is e^{-f} times the product one, node by node
        let r = pmc_residual(v, &setup.h, Some(f), setup.n, None)
            .map_err(|e| Failure::Invalid(e.to_string()))?;
        let grid = v.grid();
        let scale = grid
            .interior_nodes()
            .iter()
            .map(|&k| (-f.value(grid.position(k), v.values()[k])).exp())
            .fold(0.0, f64::max);
        let bound = scale * (setup.solver.tol_inner + rep.gamma.gamma * setup.solver.tol_outer);
        out.insert(
            "conformal_check".into(),
            json!({"residual": r.interior_sup(), "scale": scale, "bound": bound, "holds": r.interior_sup() <= bound}),
        );
    }
    Ok(out)
}

pub fn solve(setup: &Setup, paths: &Paths) -> Result<Outcome, Failure> {
    let problem = setup.problem().map_err(Failure::Invalid)?;
    let (v, rep) = problem.solve().map_err(|e| classify(e, paths))?;
    let mut report = Map::new();
    merge(&mut report, "solve", &rep);
    report.extend(solution_entries(setup, &v, &rep)?);
    report.insert("geometry".into(), geometry_entry(setup));
    if let Some(path) = &paths.field {
        write_text(path, &v.to_csv()).map_err(Failure::Invalid)?;
    }
    report.insert(
        "field_path".into(),
        json!(paths.field.as_ref().map(|p| p.display().to_string())),
    );
    Ok(Outcome {
        exit: if rep.converged { EXIT_OK } else { EXIT_SOLVER },
        report,
    })
}

pub fn check_barrier_cmd(setup: &Setup, paths: &Paths) -> Result<Outcome, Failure> {
    let problem = setup.problem().map_err(Failure::Invalid)?;
    let b = match problem.barriers_on(&setup.grid) {
        Ok(b) => b,
        Err(Error::BarrierOrder { node, u1, u0 }) => {
            let grid = &setup.grid;
            let mut report = Map::new();
            report.insert("pass".into(), json!(false));
            report.insert(
                "violating_node".into(),
                json!({
                    "node": node,
                    "index": to_value(&grid.multi_index(node)[..grid.dim()]),
                    "position": to_value(&grid.position(node)[..grid.dim()]),
                    "u1": u1,
                    "u0": u0,
                }),
            );
            report.insert(
                "error".into(),
                json!(Error::BarrierOrder { node, u1, u0 }.to_string()),
            );
            return Ok(Outcome {
                exit: EXIT_CHECK_FAILED,
                report,
            });
        }
        Err(e) => return Err(classify(e, paths)),
    };
    let factor = setup.geometry.factor().map(|f| (f, setup.n));
    let r = check_barrier(&b, &setup.h, factor, setup.solver.barrier_allowance)
        .map_err(|e| classify(e, paths))?;
    let mut report = Map::new();
    merge(&mut report, "barrier", &r);
    report.insert("boundary_mismatch".into(), json!(b.boundary_mismatch()));
    report.insert("geometry".into(), geometry_entry(setup));
    Ok(Outcome {
        exit: if r.pass { EXIT_OK } else { EXIT_CHECK_FAILED },
        report,
    })
}

pub fn check_monotone_cmd(setup: &Setup, paths: &Paths) -> Result<Outcome, Failure> {
    let working = working_box(setup, paths)?;
    let r = match &setup.quasi {
        Some(d) => check_quasi_decreasing(d, &setup.grid, &working, setup.samples),
        None => check_monotone(&setup.h_product, &setup.grid, &working, setup.samples),
    }
    .map_err(|e| classify(e, paths))?;
    let mut report = Map::new();
    merge(&mut report, "monotone", &r);
    report.insert(
        "checked".into(),
        json!(if setup.quasi.is_some() {
            "dH1/dz"
        } else {
            "dH/dz"
        }),
    );
    report.insert("function".into(), json!(setup.h_product.describe()));
    report.insert("box".into(), to_value(&working));
    Ok(Outcome {
        exit: if r.pass { EXIT_OK } else { EXIT_CHECK_FAILED },
        report,
    })
}

pub fn transform(setup: &Setup, paths: &Paths) -> Result<Outcome, Failure> {
    let path = paths
        .field
        .as_ref()
        .ok_or_else(|| Failure::Invalid("transform needs --out-field or outputs.field".into()))?;
    let working = working_box(setup, paths)?;
    let lattice = SampleLattice::new(&setup.grid, working.lo, working.hi, setup.samples);
    let mut csv = String::from("x1,x2,z,y1,y2,t,h,h_prime\n");
    let mut max_prime: f64 = 0.0;
    let mut non_finite = 0usize;
    lattice
        .for_each(&setup.grid, |_, p| {
            let (h, hp) = (setup.h.eval(&p), setup.h_product.eval(&p));
            if hp.is_finite() {
                max_prime = max_prime.max(hp.abs());
            } else {
                non_finite += 1;
            }
            let _ = writeln!(
                csv,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.x[0], p.x[1], p.z, p.y[0], p.y[1], p.t, h, hp
            );
            Ok(())
        })
        .map_err(|e| classify(e, paths))?;
    write_text(path, &csv).map_err(Failure::Invalid)?;
    let mut report = Map::new();
    report.insert("samples".into(), json!(lattice.len()));
    report.insert("box".into(), to_value(&working));
    report.insert("max_abs_h_prime".into(), json!(max_prime));
    report.insert("non_finite_samples".into(), json!(non_finite));
    report.insert("geometry".into(), geometry_entry(setup));
    report.insert("table_path".into(), json!(path.display().to_string()));
    Ok(Outcome {
        exit: EXIT_OK,
        report,
    })
}

pub fn reparam(setup: &Setup, paths: &Paths) -> Result<Outcome, Failure> {
    let Geometry::Warped { factor, rep } = &setup.geometry else {
        return Err(Failure::Invalid("reparam needs a `warped` section".into()));
    };
    let (s0, s1) = rep.s_range();
    let rows = setup.samples;
    let mut csv = String::from("s,r,f\n");
    let mut increasing = true;
    let mut max_dev: f64 = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..rows {
        let s = s0 + (s1 - s0) * i as f64 / (rows - 1) as f64;
        let r = rep.r_of_s(s);
        let f = factor.value([0.0, 0.0], s);
        increasing &= r > prev;
        prev = r;
        max_dev = max_dev.max((f - rep.profile().eval(r).ln()).abs());
        let _ = writeln!(csv, "{s:.16e},{r:.16e},{f:.16e}");
    }
    if let Some(path) = &paths.field {
        write_text(path, &csv).map_err(Failure::Invalid)?;
    }
    let mut report = Map::new();
    report.insert("samples".into(), json!(rows));
    report.insert("r_strictly_increasing".into(), json!(increasing));
    report.insert("max_abs_f_minus_ln_h".into(), json!(max_dev));
    report.insert("geometry".into(), geometry_entry(setup));
    report.insert(
        "table_path".into(),
        json!(paths.field.as_ref().map(|p| p.display().to_string())),
    );
    Ok(Outcome {
        exit: EXIT_OK,
        report,
    })
}

pub fn diagnose(setup: &Setup, paths: &Paths, levels: usize) -> Result<Outcome, Failure> {
    let problem = setup.problem().map_err(Failure::Invalid)?;
    let r = blowup_diagnostics(&problem, levels).map_err(|e| classify(e, paths))?;
    let mut report = Map::new();
    merge(&mut report, "diagnostics", &r);
    Ok(Outcome {
        exit: EXIT_OK,
        report,
    })
}

pub fn eval_residual(setup: &Setup, paths: &Paths) -> Result<Outcome, Failure> {
    let input = setup
        .inputs
        .field
        .as_ref()
        .ok_or_else(|| Failure::Invalid("eval-residual needs inputs.field".into()))?;
    let text = std::fs::read_to_string(input)
        .map_err(|e| Failure::Invalid(format!("cannot read {input}: {e}")))?;
    let u = ScalarField::from_csv(&text).map_err(|e| Failure::Invalid(format!("{input}: {e}")))?;
    let r = pmc_residual(&u, &setup.h, setup.geometry.factor(), setup.n, None)
        .map_err(|e| classify(e, paths))?;
    let grid = u.grid();
    let worst = grid.interior_nodes().iter().copied().max_by(|&a, &b| {
        r.values()[a]
            .abs()
            .total_cmp(&r.values()[b].abs())
            .then(b.cmp(&a))
    });
    if let Some(path) = &paths.field {
        write_text(path, &r.to_csv()).map_err(Failure::Invalid)?;
    }
    let mut report = Map::new();
    report.insert("interior_sup".into(), json!(r.interior_sup()));
    report.insert("worst_node".into(), json!(worst));
    report.insert("spacing".into(), json!(grid.max_spacing()));
    report.insert("geometry".into(), geometry_entry(setup));
    report.insert(
        "field_path".into(),
        json!(paths.field.as_ref().map(|p| p.display().to_string())),
    );
    Ok(Outcome {
        exit: EXIT_OK,
        report,
    })
}
