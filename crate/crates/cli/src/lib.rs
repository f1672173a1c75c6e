//! Config-driven front end for `pmcgraph`: solves, structural checks,
//! conformal transforms, warped reparametrizations, refinement diagnostics
//! and residual evaluation, each writing a deterministic JSON report.
//!
//! Exit codes: 0 success, 1 check failed, 2 invalid config or I/O, 3 solver failure.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use commands::{Failure, Outcome, Paths, EXIT_INVALID, EXIT_SOLVER};

#[derive(Debug, Parser)]
#[command(
    name = "pmcg",
    version,
    about = "Prescribed mean curvature graphs on flat grids"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Report path; overrides `outputs.report`. Without either the report goes to stdout.
    #[arg(long, global = true)]
    pub out_report: Option<PathBuf>,
    /// Field or table path; overrides `outputs.field`.
    #[arg(long, global = true)]
    pub out_field: Option<PathBuf>,
    /// Refinement levels of `diagnose`.
    #[arg(long, global = true, default_value_t = 3)]
    pub levels: usize,
    /// Recorded in the report; the pipeline itself uses no randomness.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `key=value` with a dot-separated key, applied in order.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Solve between the barriers (penalized outer iteration).
    Solve,
    /// Check the sub- and supersolution inequalities of the barriers.
    CheckBarrier,
    /// Sample dH/dz (dH1/dz for h1/h2 configs) over the working box.
    CheckMonotone,
    /// Tabulate H and its product-metric form on a sample lattice.
    Transform,
    /// Tabulate r(s) and f(s) of a warped profile.
    Reparam,
    /// Solve on successively halved grids and look for gradient blow-up.
    Diagnose,
    /// Residual of the field in `inputs.field`.
    EvalResidual,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::CheckBarrier => "check-barrier",
            Command::CheckMonotone => "check-monotone",
            Command::Transform => "transform",
            Command::Reparam => "reparam",
            Command::Diagnose => "diagnose",
            Command::EvalResidual => "eval-residual",
        }
    }
}

fn header(cli: &Cli, hash: Option<&str>, status: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(cli.command.name()));
    m.insert("version".into(), json!(pmcgraph::VERSION));
    m.insert("config_hash".into(), json!(hash));
    m.insert("status".into(), json!(status));
    m.insert("seed".into(), json!(cli.seed));
    m
}

fn emit(report: Map<String, Value>, path: Option<&PathBuf>) -> Result<(), String> {
    let text = report::canonical_json(&Value::Object(report));
    match path {
        Some(p) => commands::write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let mut report_path = cli.out_report.clone();
    let result = execute(cli, &mut report_path);
    let (exit, body) = match result {
        Ok((hash, Outcome { exit, report })) => {
            let status = match exit {
                0 => "ok",
                1 => "check_failed",
                _ => "solver_failure",
            };
            let mut m = header(cli, Some(&hash), status);
            m.extend(report);
            (exit, m)
        }
        Err((hash, Failure::Solver(report))) => {
            let mut m = header(cli, hash.as_deref(), "solver_failure");
            if let Some(e) = report.get("error").and_then(Value::as_str) {
                eprintln!("error: {e}");
            }
            m.extend(report);
            (EXIT_SOLVER, m)
        }
        Err((hash, Failure::Invalid(msg))) => {
            eprintln!("error: {msg}");
            if report_path.is_none() {
                return EXIT_INVALID;
            }
            let mut m = header(cli, hash.as_deref(), "invalid_config");
            m.insert("error".into(), json!(msg));
            (EXIT_INVALID, m)
        }
    };
    match emit(body, report_path.as_ref()) {
        Ok(()) => exit,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

type Executed = Result<(String, Outcome), (Option<String>, Failure)>;

fn execute(cli: &Cli, report_path: &mut Option<PathBuf>) -> Executed {
    let invalid = |hash: Option<String>, msg: String| (hash, Failure::Invalid(msg));
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| invalid(None, "--config is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(None, format!("cannot read {}: {e}", path.display())))?;
    let (value, cfg) = config::load(&text, &cli.overrides).map_err(|e| invalid(None, e))?;
    let hash = report::config_hash(&value);
    if report_path.is_none() {
        *report_path = cfg.outputs.report.as_ref().map(PathBuf::from);
    }
    let setup = config::validate(&cfg).map_err(|e| invalid(Some(hash.clone()), e))?;
    let paths = Paths {
        report: report_path.clone(),
        field: cli
            .out_field
            .clone()
            .or_else(|| setup.outputs.field.as_ref().map(PathBuf::from)),
    };
    let outcome = match cli.command {
        Command::Solve => commands::solve(&setup, &paths),
        Command::CheckBarrier => commands::check_barrier_cmd(&setup, &paths),
        Command::CheckMonotone => commands::check_monotone_cmd(&setup, &paths),
        Command::Transform => commands::transform(&setup, &paths),
        Command::Reparam => commands::reparam(&setup, &paths),
        Command::Diagnose => commands::diagnose(&setup, &paths, cli.levels),
        Command::EvalResidual => commands::eval_residual(&setup, &paths),
    };
    outcome
        .map(|o| (hash.clone(), o))
        .map_err(|f| (Some(hash), f))
}
