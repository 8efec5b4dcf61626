//! JSON problem files.
//!
//! ```json
//! {
//!   "name": "lower_barrier",
//!   "domain": { "dim": 1, "lengths": [1.0], "horizon": 1.0 },
//!   "coefficients": "identity",
//!   "driver": { "f": "-y", "kappa": 0 },
//!   "terminal": "sin(pi*x)",
//!   "measure": { "density": "0", "atoms": [ { "t": 0.5, "rho": "sin(pi*x)" } ] },
//!   "barriers": { "lower": "if(x > 0.25 && x < 0.75, 0.25, -inf)", "upper": null,
//!                 "continuity": "merely_measurable" },
//!   "separation_witness": { "v": "0", "lambda_density": "0", "phi_hat": "sin(pi*x)" }
//! }
//! ```
//!
//! Coefficients are either the built-in `"identity"` or an object with
//! `a` (dimension 1) or `a11`, `a12`, `a22` (dimension 2), plus `lambda` and
//! an optional `smoothness` (`"C1"` by default, or `"measurable"`).
//! Expression fields accept strings in the grammar of [`crate::expr`] or
//! plain numbers. Time dependence is detected from the use of `t`.

use crate::expr::{Env, Expr, ExprError};
use crate::problem::{
    Atom, BarrierContinuity, BarrierPair, CoefficientField, Driver, MeasureData, ProblemError, ProblemSpec,
    SeparationWitness, Smoothness, SpaceFn, SpaceTimeDomain, SpaceTimeFn, Tensor,
};
use serde::Deserialize;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("malformed problem file: {0}")]
    Json(String),
    #[error("field `{field}`: {source}")]
    Expr { field: String, source: ExprError },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ExprValue {
    Num(f64),
    Text(String),
}

impl ExprValue {
    fn parse(&self, field: &str) -> Result<Expr, ConfigError> {
        let src = match self {
            ExprValue::Num(v) => format!("{v:?}"),
            ExprValue::Text(s) => s.clone(),
        };
        Expr::parse(&src).map_err(|source| ConfigError::Expr { field: field.into(), source })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainCfg {
    dim: usize,
    lengths: Vec<f64>,
    horizon: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CoeffCfg {
    Builtin(String),
    Fields(CoeffFields),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffFields {
    a: Option<ExprValue>,
    a11: Option<ExprValue>,
    a12: Option<ExprValue>,
    a22: Option<ExprValue>,
    lambda: f64,
    smoothness: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DriverCfg {
    f: ExprValue,
    kappa: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomCfg {
    t: f64,
    rho: ExprValue,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureCfg {
    density: Option<ExprValue>,
    #[serde(default)]
    atoms: Vec<AtomCfg>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BarrierCfg {
    lower: Option<ExprValue>,
    upper: Option<ExprValue>,
    continuity: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WitnessCfg {
    v: ExprValue,
    lambda_density: ExprValue,
    phi_hat: ExprValue,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    name: Option<String>,
    domain: DomainCfg,
    coefficients: CoeffCfg,
    driver: Option<DriverCfg>,
    terminal: ExprValue,
    measure: Option<MeasureCfg>,
    barriers: Option<BarrierCfg>,
    separation_witness: Option<WitnessCfg>,
}

fn space_time(e: Expr) -> SpaceTimeFn {
    Arc::new(move |t, x| e.eval(&Env::at(t, x)))
}

fn space(e: Expr) -> SpaceFn {
    Arc::new(move |x| e.eval(&Env::at(0.0, x)))
}

fn no_y(e: &Expr, field: &str) -> Result<(), ConfigError> {
    if e.uses_y() {
        return Err(ConfigError::Invalid(format!("`{field}` may not use y")));
    }
    Ok(())
}

fn coefficients(cfg: CoeffCfg, dim: usize) -> Result<CoefficientField, ConfigError> {
    let f = match cfg {
        CoeffCfg::Builtin(name) if name == "identity" => return Ok(CoefficientField::identity()),
        CoeffCfg::Builtin(name) => return Err(ConfigError::Invalid(format!("unknown built-in coefficients `{name}`"))),
        CoeffCfg::Fields(f) => f,
    };
    let smoothness = match f.smoothness.as_deref() {
        None | Some("C1") | Some("c1") => Smoothness::C1,
        Some("measurable") => Smoothness::Measurable,
        Some(other) => return Err(ConfigError::Invalid(format!("unknown smoothness `{other}`"))),
    };
    let entries: Vec<Expr> = if dim == 1 {
        let a = f.a.or(f.a11).ok_or_else(|| ConfigError::Invalid("coefficients need `a`".into()))?;
        if f.a12.is_some() || f.a22.is_some() {
            return Err(ConfigError::Invalid("a12/a22 given for a 1D problem".into()));
        }
        vec![a.parse("coefficients.a")?]
    } else {
        let get = |v: Option<ExprValue>, name: &str| -> Result<Expr, ConfigError> {
            v.ok_or_else(|| ConfigError::Invalid(format!("coefficients need `{name}`")))?.parse(&format!("coefficients.{name}"))
        };
        let a11 = get(f.a11.or(f.a), "a11")?;
        let a12 = match f.a12 {
            Some(v) => v.parse("coefficients.a12")?,
            None => Expr::parse("0").expect("literal"),
        };
        vec![a11, a12, get(f.a22, "a22")?]
    };
    for e in &entries {
        no_y(e, "coefficients")?;
    }
    let time_dependent = entries.iter().any(|e| e.uses_t());
    let consts: Option<Vec<f64>> = entries.iter().map(|e| e.constant_value()).collect();
    if let (Some(c), Smoothness::C1) = (consts, smoothness) {
        let tensor = if dim == 1 { Tensor::scalar(c[0]) } else { Tensor([[c[0], c[1]], [c[1], c[2]]]) };
        return Ok(CoefficientField::constant(tensor, f.lambda)?);
    }
    let a: crate::problem::TensorFn = if dim == 1 {
        let e = entries[0].clone();
        Arc::new(move |t, x| Tensor::scalar(e.eval(&Env::at(t, x))))
    } else {
        let (e11, e12, e22) = (entries[0].clone(), entries[1].clone(), entries[2].clone());
        Arc::new(move |t, x| {
            let env = Env::at(t, x);
            let off = e12.eval(&env);
            Tensor([[e11.eval(&env), off], [off, e22.eval(&env)]])
        })
    };
    Ok(CoefficientField::new(a, f.lambda, smoothness, time_dependent)?)
}

/// Parses a problem from JSON text.
pub fn parse_problem(text: &str) -> Result<ProblemSpec, ConfigError> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
    let d = &file.domain;
    let domain = SpaceTimeDomain::new(d.dim, &d.lengths, d.horizon)?;
    let dim = domain.dim();
    let coeffs = coefficients(file.coefficients, dim)?;

    let driver = match file.driver {
        None => Driver::zero(),
        Some(cfg) => {
            let e = cfg.f.parse("driver.f")?;
            if e.constant_value() == Some(0.0) {
                Driver::zero()
            } else {
                Driver::new(Arc::new(move |t, x, y| e.eval(&Env::at(t, x).with_y(y))), cfg.kappa)
            }
        }
    };

    let terminal = file.terminal.parse("terminal")?;
    no_y(&terminal, "terminal")?;
    if terminal.uses_t() {
        return Err(ConfigError::Invalid("`terminal` may not use t".into()));
    }

    let mcfg = file.measure.unwrap_or_default();
    let density = match mcfg.density {
        None => None,
        Some(v) => {
            let e = v.parse("measure.density")?;
            no_y(&e, "measure.density")?;
            (e.constant_value() != Some(0.0)).then(|| space_time(e))
        }
    };
    let mut atoms = Vec::new();
    for (i, a) in mcfg.atoms.into_iter().enumerate() {
        let e = a.rho.parse(&format!("measure.atoms[{i}].rho"))?;
        no_y(&e, "measure.atoms")?;
        atoms.push(Atom { t: a.t, rho: space(e) });
    }
    let measure = MeasureData::new(density, atoms)?;

    let bcfg = file.barriers.unwrap_or_default();
    let barrier = |v: Option<ExprValue>, field: &str| -> Result<Option<SpaceTimeFn>, ConfigError> {
        v.map(|v| {
            let e = v.parse(field)?;
            no_y(&e, field)?;
            Ok(space_time(e))
        })
        .transpose()
    };
    let continuity = match bcfg.continuity.as_deref() {
        None | Some("quasi_continuous_proxy") => BarrierContinuity::QuasiContinuousProxy,
        Some("merely_measurable") => BarrierContinuity::MerelyMeasurable,
        Some(other) => return Err(ConfigError::Invalid(format!("unknown barrier continuity `{other}`"))),
    };
    let barriers = BarrierPair {
        lower: barrier(bcfg.lower, "barriers.lower")?,
        upper: barrier(bcfg.upper, "barriers.upper")?,
        continuity,
    };

    let witness = match file.separation_witness {
        None => None,
        Some(w) => Some(SeparationWitness {
            v: space_time(w.v.parse("separation_witness.v")?),
            lambda_density: space_time(w.lambda_density.parse("separation_witness.lambda_density")?),
            phi_hat: space(w.phi_hat.parse("separation_witness.phi_hat")?),
        }),
    };

    let spec = ProblemSpec {
        name: file.name.unwrap_or_else(|| "problem".into()),
        domain,
        coeffs,
        driver,
        terminal: space(terminal),
        measure,
        barriers,
        witness,
    };
    spec.check_structure()?;
    Ok(spec)
}

/// Reads and parses a problem file; also returns the raw text.
pub fn load_problem(path: &Path) -> Result<(ProblemSpec, String), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    Ok((parse_problem(&text)?, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file_parses() {
        let text = r#"{
            "name": "demo",
            "domain": {"dim": 1, "lengths": [1.0], "horizon": 1.0},
            "coefficients": {"a": "1 + 0.5*sin(pi*x)", "lambda": 2},
            "driver": {"f": "-y^3", "kappa": 0},
            "terminal": "sin(pi*x)",
            "measure": {"density": "t*x", "atoms": [{"t": 0.5, "rho": 2}]},
            "barriers": {"lower": "if(x > 0.25 && x < 0.75, 0.25, -inf)", "continuity": "merely_measurable"},
            "separation_witness": {"v": "0.3", "lambda_density": "0", "phi_hat": "1"}
        }"#;
        let spec = parse_problem(text).unwrap();
        assert_eq!(spec.name, "demo");
        assert!(!spec.coeffs.is_time_dependent());
        assert!((spec.coeffs.eval(0.0, &[0.5]).get(0, 0) - 1.5).abs() < 1e-15);
        assert_eq!(spec.driver.eval(0.0, &[0.5], 2.0), -8.0);
        assert_eq!(spec.measure.atoms().len(), 1);
        assert_eq!(spec.barriers.lower_at(0.0, &[0.1]), f64::NEG_INFINITY);
        assert_eq!(spec.barriers.lower_at(0.0, &[0.5]), 0.25);
        assert_eq!(spec.barriers.upper_at(0.0, &[0.5]), f64::INFINITY);
        assert!(spec.witness.is_some());
    }

    #[test]
    fn identity_and_defaults() {
        let text = r#"{"domain": {"dim": 2, "lengths": [1, 2], "horizon": 0.5},
                       "coefficients": "identity", "terminal": 0}"#;
        let spec = parse_problem(text).unwrap();
        assert!(spec.driver.is_zero() && spec.measure.is_zero() && spec.barriers.is_empty());
        assert_eq!(spec.dim(), 2);
    }

    #[test]
    fn errors_are_reported() {
        assert!(matches!(parse_problem("{"), Err(ConfigError::Json(_))));
        let bad_expr = r#"{"domain": {"dim": 1, "lengths": [1], "horizon": 1},
                           "coefficients": "identity", "terminal": "sin(("}"#;
        assert!(matches!(parse_problem(bad_expr), Err(ConfigError::Expr { .. })));
        let bad_atom = r#"{"domain": {"dim": 1, "lengths": [1], "horizon": 1},
                           "coefficients": "identity", "terminal": 0,
                           "measure": {"atoms": [{"t": 2, "rho": 1}]}}"#;
        assert!(matches!(parse_problem(bad_atom), Err(ConfigError::Problem(_))));
        assert!(matches!(load_problem(Path::new("/nonexistent/p.json")), Err(ConfigError::Io { .. })));
    }
}
