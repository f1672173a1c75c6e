//! Run configuration: the JSON schema, dot-path overrides and validation into
//! a ready-to-run [`Setup`].

use std::sync::Arc;

use pmcgraph::{
    conformal_transform_pmc, field_from_expr, parse_pmc, warped_to_conformal, BarrierSpec,
    BaseGrid, ConformalFactor, DerivativeMode, GridSpec, Pmc, Problem, QuasiDecomposition,
    Reparametrization, SolveConfig, WarpedProfile, WorkingBox,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Samples per axis of lattices and tables when the config gives none.
pub const DEFAULT_SAMPLES: usize = 9;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    /// Dimension of the base used by conformal factors; the grid dimension by default.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(rename = "box", default)]
    pub working: Option<BoxConfig>,
    pub pmc: PmcConfig,
    /// `"product"` or `{"f": "<expr in x1, x2, r>"}`.
    #[serde(default)]
    pub conformal: Option<Value>,
    #[serde(default)]
    pub warped: Option<WarpedConfig>,
    #[serde(default)]
    pub barrier: Option<BarrierConfig>,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub inputs: Inputs,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub z: [f64; 2],
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmcConfig {
    pub expr: Option<String>,
    pub h1: Option<String>,
    pub h2: Option<String>,
    #[serde(default)]
    pub derivatives: DerivativeMode,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpedConfig {
    /// Profile `h(r)`.
    pub h: String,
    pub interval: [f64; 2],
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    pub u1: Option<String>,
    pub u0: Option<String>,
    pub psi: Option<String>,
    pub from_phi: Option<FromPhiConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FromPhiConfig {
    pub base: String,
    pub phi: String,
    pub psi: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub report: Option<String>,
    pub field: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub field: Option<String>,
}

/// Ambient metric of a run.
#[derive(Clone, Debug)]
pub enum Geometry {
    Product,
    Conformal(ConformalFactor),
    /// Warped product rewritten in the arclength coordinate `s`.
    Warped {
        factor: ConformalFactor,
        rep: Arc<Reparametrization>,
    },
}

impl Geometry {
    pub fn factor(&self) -> Option<&ConformalFactor> {
        match self {
            Geometry::Product => None,
            Geometry::Conformal(f) | Geometry::Warped { factor: f, .. } => Some(f),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Product => "product",
            Geometry::Conformal(_) => "conformal",
            Geometry::Warped { .. } => "warped",
        }
    }
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct Setup {
    pub spec: GridSpec,
    pub grid: Arc<BaseGrid>,
    pub n: usize,
    /// The PMC function as configured, in the ambient metric.
    pub h: Pmc,
    /// Its product-metric form, used by the solvers.
    pub h_product: Pmc,
    pub quasi: Option<QuasiDecomposition>,
    pub geometry: Geometry,
    pub barriers: Option<BarrierSpec>,
    pub working: Option<WorkingBox>,
    pub solver: SolveConfig,
    pub samples: usize,
    pub outputs: Outputs,
    pub inputs: Inputs,
}

impl Setup {
    pub fn problem(&self) -> Result<Problem, String> {
        let barriers = self
            .barriers
            .clone()
            .ok_or("this command needs a `barrier` section")?;
        Ok(Problem {
            grid: self.spec.clone(),
            h: self.h_product.clone(),
            quasi: self.quasi.clone(),
            barriers,
            working: self.working,
            config: self.solver.clone(),
        })
    }
}

/// Applies `key=value` with a dot-separated key. The value is read as JSON
/// when it parses, as a string otherwise; replacing a string always keeps the
/// raw text, so `barrier.u1=2` stays an expression. Missing objects are
/// created; numeric segments index into arrays.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), String> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override `{assignment}` is not key=value"))?;
    if key.is_empty() {
        return Err(format!("override `{assignment}` has an empty key"));
    }
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| format!("override `{key}`: `{part}` is not an array index"))?;
                items
                    .get_mut(idx)
                    .ok_or_else(|| format!("override `{key}`: index {idx} is out of range"))?
            }
            Value::Object(map) => map.entry(part.to_string()).or_insert(Value::Null),
            other => {
                if !other.is_null() {
                    return Err(format!(
                        "override `{key}`: `{part}` is below a non-object value"
                    ));
                }
                *other = Value::Object(Default::default());
                other
                    .as_object_mut()
                    .expect("just set")
                    .entry(part.to_string())
                    .or_insert(Value::Null)
            }
        };
        if last {
            *node = if node.is_string() {
                Value::String(raw.to_string())
            } else {
                value
            };
            return Ok(());
        }
    }
    unreachable!("split always yields a segment")
}

fn pmc(text: &str, mode: DerivativeMode, what: &str) -> Result<Pmc, String> {
    parse_pmc(text)
        .map(|p| Arc::new(p.with_mode(mode)) as Pmc)
        .map_err(|e| format!("{what}: {e}"))
}

/// Checks the config and compiles every expression. Errors name the first failing field.
pub fn validate(cfg: &RunConfig) -> Result<Setup, String> {
    let grid = BaseGrid::build(&cfg.grid).map_err(|e| format!("grid: {e}"))?;
    let n = cfg.n.unwrap_or(grid.dim());
    if n == 0 {
        return Err("n must be positive".into());
    }

    let mode = cfg.pmc.derivatives;
    let (h, quasi) = match (&cfg.pmc.expr, &cfg.pmc.h1, &cfg.pmc.h2) {
        (Some(e), None, None) => (pmc(e, mode, "pmc.expr")?, None),
        (None, Some(a), Some(b)) => {
            let d = QuasiDecomposition::new(pmc(a, mode, "pmc.h1")?, pmc(b, mode, "pmc.h2")?);
            (d.composite(), Some(d))
        }
        (None, Some(_), None) | (None, None, Some(_)) => {
            return Err("pmc: h1 and h2 must be given together".into())
        }
        _ => return Err("pmc: give exactly one of `expr` or the pair `h1`, `h2`".into()),
    };

    let conformal = match &cfg.conformal {
        None => None,
        Some(Value::String(s)) if s == "product" => None,
        Some(Value::Object(m)) => match (m.len(), m.get("f")) {
            (1, Some(Value::String(f))) => Some(
                ConformalFactor::from_expr(f)
                    .map_err(|e| format!("conformal.f: {e}"))?
                    .with_mode(mode),
            ),
            _ => return Err("conformal: expected \"product\" or {\"f\": \"<expr>\"}".into()),
        },
        Some(_) => return Err("conformal: expected \"product\" or {\"f\": \"<expr>\"}".into()),
    };
    let geometry = match (conformal, &cfg.warped) {
        (Some(_), Some(_)) => return Err("give at most one of conformal.f and warped".into()),
        (Some(f), None) => Geometry::Conformal(f),
        (None, Some(w)) => {
            let profile = WarpedProfile::from_expr(&w.h).map_err(|e| format!("warped.h: {e}"))?;
            let [lo, hi] = w.interval;
            let (_, factor, rep) =
                warped_to_conformal(profile, lo, hi).map_err(|e| format!("warped: {e}"))?;
            Geometry::Warped {
                factor: factor.with_mode(mode),
                rep,
            }
        }
        (None, None) => Geometry::Product,
    };
    if quasi.is_some() && !matches!(geometry, Geometry::Product) {
        return Err("pmc.h1/h2 decompositions are only supported in the product metric".into());
    }
    let h_product = match geometry.factor() {
        Some(f) => conformal_transform_pmc(h.clone(), f, n),
        None => h.clone(),
    };

    let working = match (&cfg.working, &geometry) {
        (Some(b), _) => Some(WorkingBox::new(b.z[0], b.z[1]).map_err(|e| format!("box.z: {e}"))?),
        (None, Geometry::Warped { rep, .. }) => {
            let (lo, hi) = rep.s_range();
            Some(WorkingBox::new(lo, hi).map_err(|e| format!("warped: {e}"))?)
        }
        (None, _) => None,
    };

    let barriers = match &cfg.barrier {
        None => None,
        Some(b) => Some(barrier_spec(b, &grid, mode, &geometry, working.is_some())?),
    };

    cfg.solver.validate().map_err(|e| e.to_string())?;
    let samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
    if samples < 2 {
        return Err("samples must be at least 2".into());
    }

    Ok(Setup {
        spec: cfg.grid.clone(),
        grid,
        n,
        h,
        h_product,
        quasi,
        geometry,
        barriers,
        working,
        solver: cfg.solver.clone(),
        samples,
        outputs: cfg.outputs.clone(),
        inputs: cfg.inputs.clone(),
    })
}

fn barrier_spec(
    b: &BarrierConfig,
    grid: &Arc<BaseGrid>,
    mode: DerivativeMode,
    geometry: &Geometry,
    has_box: bool,
) -> Result<BarrierSpec, String> {
    let check = |what: &str, e: &str| {
        field_from_expr(grid, e)
            .map(|_| ())
            .map_err(|err| format!("barrier.{what}: {err}"))
    };
    match (b, &b.from_phi) {
        (
            BarrierConfig {
                u1: Some(u1),
                u0: Some(u0),
                psi,
                from_phi: None,
            },
            _,
        ) => {
            check("u1", u1)?;
            check("u0", u0)?;
            if let Some(p) = psi {
                check("psi", p)?;
            }
            Ok(BarrierSpec::Exprs {
                u1: u1.clone(),
                u0: u0.clone(),
                psi: psi.clone(),
            })
        }
        (
            BarrierConfig {
                u1: None,
                u0: None,
                psi: None,
                ..
            },
            Some(fp),
        ) => {
            if !matches!(geometry, Geometry::Product) {
                return Err("barrier.from_phi is only supported in the product metric".into());
            }
            if !has_box {
                return Err("barrier.from_phi needs an explicit box".into());
            }
            check("from_phi.psi", &fp.psi)?;
            Ok(BarrierSpec::FromPhi {
                base: pmc(&fp.base, mode, "barrier.from_phi.base")?,
                phi: pmc(&fp.phi, mode, "barrier.from_phi.phi")?,
                psi: fp.psi.clone(),
            })
        }
        _ => Err("barrier: give either `u1` and `u0` (optionally `psi`) or `from_phi`".into()),
    }
}

/// Parses the config text, applies overrides and returns the effective JSON
/// together with the typed config.
pub fn load(text: &str, overrides: &[String]) -> Result<(Value, RunConfig), String> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg = serde_json::from_value(value.clone()).map_err(|e| format!("config: {e}"))?;
    Ok((value, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    const TORUS: &str = r#"{
        "grid": {"dim": 2, "shape": [8, 8], "lengths": [1, 1], "topology": ["periodic", "periodic"]},
        "pmc": {"expr": "-z"},
        "barrier": {"u1": "-1", "u0": "1"}
    }"#;

    #[test]
    fn overrides_follow_dot_paths() {
        let mut v = json!({"solver": {"tol_inner": 1e-10}, "grid": {"shape": [4, 4]}});
        apply_override(&mut v, "solver.tol_inner=1e-6").unwrap();
        apply_override(&mut v, "grid.shape.1=16").unwrap();
        apply_override(&mut v, "outputs.report=out/r.json").unwrap();
        assert_eq!(v["solver"]["tol_inner"], json!(1e-6));
        assert_eq!(v["grid"]["shape"], json!([4, 16]));
        assert_eq!(v["outputs"]["report"], json!("out/r.json"));
        let mut b = json!({"barrier": {"u1": "-1"}});
        apply_override(&mut b, "barrier.u1=2").unwrap();
        assert_eq!(b["barrier"]["u1"], json!("2"));
        assert!(apply_override(&mut v, "grid.shape.9=1").is_err());
        assert!(apply_override(&mut v, "no-equals").is_err());
        assert!(apply_override(&mut v, "solver.tol_inner.x=1").is_err());
    }

    #[test]
    fn minimal_config_validates() {
        let (_, cfg) = load(TORUS, &[]).unwrap();
        let s = validate(&cfg).unwrap();
        assert_eq!(s.n, 2);
        assert!(matches!(s.geometry, Geometry::Product));
        assert!(s.quasi.is_none());
        assert!(s.problem().is_ok());
    }

    #[test]
    fn first_failure_is_reported() {
        let bad = |o: &str| {
            let (_, cfg) = load(TORUS, &[o.to_string()]).unwrap();
            validate(&cfg).unwrap_err()
        };
        assert!(bad("pmc.h1=-z").contains("pmc"));
        assert!(bad("pmc.expr=-w").contains("pmc.expr"));
        assert!(bad("barrier.u1=z").contains("barrier.u1"));
        assert!(bad("conformal=hyperbolic").contains("conformal"));
        assert!(bad("solver.tol_inner=-1").contains("tol_inner"));
        assert!(bad("grid.shape.0=2").contains("grid"));
        assert!(load(TORUS, &["solver.bogus=1".into()]).is_err());
    }

    #[test]
    fn conformal_and_warped_are_exclusive() {
        let o = [
            "conformal={\"f\": \"-ln(r)\"}".to_string(),
            "warped={\"h\": \"r\", \"interval\": [1, 2]}".to_string(),
        ];
        let (_, cfg) = load(TORUS, &o).unwrap();
        assert!(validate(&cfg).unwrap_err().contains("at most one"));
        let (_, cfg) = load(TORUS, &o[1..]).unwrap();
        let s = validate(&cfg).unwrap();
        let b = s.working.unwrap();
        assert_eq!(b.lo, 0.0);
        assert!((b.hi - 2f64.ln()).abs() < 1e-10);
    }
}
