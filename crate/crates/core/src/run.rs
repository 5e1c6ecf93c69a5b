//! Single-command runners behind the `thin`, `invariance` and `cgs`
//! subcommands.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::cgs::{
    make_log_family, make_theorem1, pair_grid, parse_rational, residual_check, residual_field,
    CgsError, CgsInstance, DomainPoint, EquationForm, LogFamilySolution, PointResidual,
    ResidualStats, Theorem1Solution,
};
use crate::config::{CgsFamily, CgsRequest, ConfigError, RunConfig, ThinMode};
use crate::magma::{Carrier, MagmaElement, MagmaError, MagmaOps};
use crate::plot::{PlotData, PlotError};
use crate::psf::{tv_distance, PsfError};
use crate::thinning::{
    invariance_grid, thin_exact, thin_mc, InvarianceTolerances, ThinningError, ThinningParam,
    ThinningReport,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Psf(#[from] PsfError),
    #[error(transparent)]
    Thinning(#[from] ThinningError),
    #[error(transparent)]
    Cgs(#[from] CgsError),
    #[error(transparent)]
    Magma(#[from] MagmaError),
    #[error(transparent)]
    Plot(#[from] PlotError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinOutput {
    pub family: String,
    pub theta: f64,
    pub p: f64,
    pub mode: ThinMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    pub masses: Vec<f64>,
    pub tail_bound: f64,
    /// TV distance to the exact thinned PMF, for Monte Carlo runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_to_exact: Option<f64>,
}

impl ThinOutput {
    pub fn plot_data(&self) -> PlotData {
        let mut d = PlotData::default();
        for (k, m) in self.masses.iter().enumerate() {
            d.push(k as f64, "mass", *m);
        }
        d
    }
}

pub fn run_thin(cfg: &RunConfig) -> Result<ThinOutput, RunError> {
    cfg.validate()?;
    let t = ThinningParam::new(cfg.p)?;
    let mu = cfg.family.pmf(cfg.theta, cfg.tolerances.trunc)?;
    let exact = thin_exact(&mu, t);
    let (nu, samples, tv) = match cfg.mode {
        ThinMode::Exact => (exact, None, None),
        ThinMode::Mc => {
            let seed = cfg.seed.ok_or_else(|| ConfigError::new("seed", "required for mc"))?;
            let mc = thin_mc(&mu, t, cfg.mc_samples, seed)?;
            let tv = tv_distance(&mc, &exact).distance;
            (mc, Some(cfg.mc_samples), Some(tv))
        }
    };
    Ok(ThinOutput {
        family: cfg.family.id(),
        theta: cfg.theta,
        p: cfg.p,
        mode: cfg.mode,
        samples,
        masses: nu.masses,
        tail_bound: nu.tail_bound,
        tv_to_exact: tv,
    })
}

pub fn invariance_tolerances(cfg: &RunConfig) -> InvarianceTolerances {
    InvarianceTolerances {
        invariance_tol: cfg.tolerances.tv,
        identity_tol: cfg.tolerances.phi_identity,
        trunc_tol: cfg.tolerances.trunc,
    }
}

pub fn run_invariance(cfg: &RunConfig) -> Result<Vec<ThinningReport>, RunError> {
    cfg.validate()?;
    Ok(invariance_grid(&cfg.family, &cfg.thetas, &cfg.ps, &invariance_tolerances(cfg))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgsOutput {
    pub family: CgsFamily,
    pub grid: String,
    pub stats: ResidualStats,
    #[serde(skip)]
    pub field: Vec<PointResidual>,
}

fn param<'a>(params: &'a Value, key: &str) -> Option<&'a Value> {
    params.get(key).filter(|v| !v.is_null())
}

fn scalar_param(params: &Value, key: &str, default: i64) -> Result<Rational64, ConfigError> {
    let field = format!("cgs.params.{key}");
    match param(params, key) {
        None => Ok(Rational64::from_integer(default)),
        Some(Value::Number(n)) => {
            parse_rational(&n.to_string()).map_err(|e| ConfigError::new(field, e.to_string()))
        }
        Some(Value::String(s)) => parse_rational(s).map_err(|e| ConfigError::new(field, e.to_string())),
        Some(other) => Err(ConfigError::new(field, format!("expected a number, got {other}"))),
    }
}

fn float_param(params: &Value, key: &str, default: f64) -> Result<f64, ConfigError> {
    match param(params, key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| ConfigError::new(format!("cgs.params.{key}"), format!("expected a number, got {v}"))),
    }
}

/// The coefficient `a`, read according to the magma's carrier.
fn element_param(params: &Value, magma: &MagmaOps) -> Result<MagmaElement, ConfigError> {
    let field = "cgs.params.a";
    let bad = |v: &Value| ConfigError::new(field, format!("{v} is not an element of {}", magma.name()));
    let v = param(params, "a");
    Ok(match (magma.carrier(), v) {
        (Carrier::Word, None) => MagmaElement::word("x"),
        (Carrier::Word, Some(Value::String(s))) => MagmaElement::word(s),
        (Carrier::Real, None) => MagmaElement::Real(1.0),
        (Carrier::Real, Some(v)) => MagmaElement::Real(v.as_f64().ok_or_else(|| bad(v))?),
        (Carrier::Rational, None) => MagmaElement::Rational(Rational64::from_integer(1)),
        (Carrier::Rational, Some(v)) => {
            let text = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                _ => return Err(bad(v)),
            };
            MagmaElement::Rational(parse_rational(&text).map_err(|_| bad(v))?)
        }
        (Carrier::Vector(d), None) => MagmaElement::Vector(vec![1.0; d]),
        (Carrier::Vector(d), Some(Value::Array(xs))) if xs.len() == d => MagmaElement::Vector(
            xs.iter()
                .map(|x| x.as_f64().ok_or_else(|| bad(x)))
                .collect::<Result<_, _>>()?,
        ),
        (_, Some(v)) => return Err(bad(v)),
    })
}

fn evaluate<P: DomainPoint>(
    inst: CgsInstance<P>,
    wanted: Option<EquationForm>,
    axis: &[P],
    tol: f64,
) -> Result<(ResidualStats, Vec<PointResidual>), CgsError> {
    let inst = match wanted {
        Some(form) if form != inst.form() => inst.dual(axis)?,
        _ => inst,
    };
    let pairs = pair_grid(axis, axis);
    Ok((residual_check(&inst, &pairs, tol)?, residual_field(&inst, &pairs)?))
}

/// Residual check of one solution family on `grid × grid`.
pub fn run_cgs(req: &CgsRequest, tol: f64) -> Result<CgsOutput, RunError> {
    let magma = MagmaOps::from_name(&req.magma)
        .map_err(|e| ConfigError::new("cgs.magma", e.to_string()))?;
    let p = &req.params;
    let (stats, field) = match req.family {
        CgsFamily::Theorem1a | CgsFamily::Theorem1b => {
            let a = element_param(p, &magma)?;
            let sol = if req.family == CgsFamily::Theorem1a {
                Theorem1Solution::S0Zero {
                    a,
                    b: scalar_param(p, "b", 1)?,
                }
            } else {
                Theorem1Solution::S0Positive {
                    s0: scalar_param(p, "s0", 1)?,
                    a,
                }
            };
            let axis = req.grid.values_rational()?;
            evaluate(make_theorem1(&sol, &magma)?, req.equation, &axis, tol)?
        }
        CgsFamily::Linear | CgsFamily::Log => {
            let alpha = match req.family {
                CgsFamily::Linear => 0.0,
                _ => float_param(p, "alpha", 1.0)?,
            };
            let a = element_param(p, &magma)?;
            let inst = make_log_family(&LogFamilySolution { alpha, a })?;
            let axis = req.grid.values_f64()?;
            evaluate(inst, req.equation, &axis, tol)?
        }
    };
    Ok(CgsOutput {
        family: req.family,
        grid: req.grid.to_string(),
        stats,
        field,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn theorem1_over_words_is_exact() {
        let req = CgsRequest {
            family: CgsFamily::Theorem1b,
            magma: "words".into(),
            params: json!({"s0": 0.75, "a": "ab"}),
            grid: "0:19/4:1/4".parse().unwrap(),
            equation: None,
        };
        let out = run_cgs(&req, 1e-10).unwrap();
        assert_eq!(out.stats.n_points, 400);
        assert_eq!(out.stats.max_residual, 0.0);
        assert!(out.stats.passed);
        assert_eq!(out.field.len(), 400);
    }

    #[test]
    fn theorem1_has_no_rew_dual() {
        let req = CgsRequest {
            family: CgsFamily::Theorem1a,
            magma: "reals".into(),
            params: json!({"a": 2.0}),
            equation: Some(EquationForm::Rew),
            ..CgsRequest::default()
        };
        assert!(matches!(run_cgs(&req, 1e-10), Err(RunError::Cgs(CgsError::KernelNonEmpty(_)))));
    }

    #[test]
    fn log_dual_passes() {
        let req = CgsRequest {
            family: CgsFamily::Log,
            magma: "vec2".into(),
            params: json!({"alpha": 0.5, "a": [1, -2]}),
            equation: Some(EquationForm::Equ),
            ..CgsRequest::default()
        };
        let out = run_cgs(&req, 1e-10).unwrap();
        assert_eq!(out.stats.form, EquationForm::Equ);
        assert!(out.stats.passed, "{}", out.stats.max_residual);
    }

    #[test]
    fn bad_params_name_the_field() {
        let req = CgsRequest {
            family: CgsFamily::Log,
            magma: "vec2".into(),
            params: json!({"a": [1, 2, 3]}),
            ..CgsRequest::default()
        };
        match run_cgs(&req, 1e-10) {
            Err(RunError::Config(e)) => assert_eq!(e.field, "cgs.params.a"),
            other => panic!("{other:?}"),
        }
        let req = CgsRequest {
            magma: "quaternions".into(),
            ..CgsRequest::default()
        };
        assert!(matches!(run_cgs(&req, 1e-10), Err(RunError::Config(_))));
    }

    #[test]
    fn thin_mc_reports_distance() {
        let cfg = RunConfig {
            command: crate::config::Command::Thin,
            mode: ThinMode::Mc,
            theta: 2.0,
            p: 0.3,
            seed: Some(3),
            mc_samples: 20_000,
            ..RunConfig::default()
        };
        let out = run_thin(&cfg).unwrap();
        assert!(out.tv_to_exact.unwrap() < 0.05);
        assert_eq!(run_thin(&cfg).unwrap(), out);
    }
}
