//! Run configuration shared by the CLI and the suite.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cgs::{EquationForm, GridSpec};
use crate::psf::CoefficientSequence;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid configuration field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Thin,
    Invariance,
    Cgs,
    #[default]
    Suite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThinMode {
    #[default]
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CgsFamily {
    /// Step solution of (equ) with `s0 = 0`.
    Theorem1a,
    /// Step solution of (equ) with `s0 > 0`.
    Theorem1b,
    Linear,
    #[default]
    Log,
}

/// A single residual check of one solution family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgsRequest {
    /// Defaults to the family's native form.
    pub equation: Option<EquationForm>,
    pub family: CgsFamily,
    /// Family parameters: `a`, `b`, `s0`, `alpha`.
    pub params: serde_json::Value,
    pub grid: GridSpec,
    pub magma: String,
}

impl Default for CgsRequest {
    fn default() -> Self {
        CgsRequest {
            equation: None,
            family: CgsFamily::Log,
            params: serde_json::Value::Object(Default::default()),
            grid: "0:10:0.5".parse().expect("valid literal"),
            magma: "reals".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub tv: f64,
    pub theta_match: f64,
    pub phi_identity: f64,
    pub pgf: f64,
    pub rho: f64,
    /// Minimum TV that the negative control must exceed.
    pub negative_control_tv: f64,
    pub mc_tv: f64,
    pub cgs: f64,
    /// Minimum residual the perturbed control must reach.
    pub perturbation_min: f64,
    pub br: f64,
    pub duality: f64,
    /// Multiplicativity of `g` and additivity of `log ∘ g`.
    pub gs: f64,
    pub trunc: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tv: 1e-10,
            theta_match: 1e-8,
            phi_identity: 1e-8,
            pgf: 1e-10,
            rho: 1e-9,
            negative_control_tv: 1e-3,
            mc_tv: 5e-3,
            cgs: 1e-10,
            perturbation_min: 1e-5,
            br: 1e-6,
            duality: 1e-10,
            gs: 1e-12,
            trunc: 1e-12,
        }
    }
}

impl Tolerances {
    fn fields(&self) -> [(&'static str, f64); 13] {
        [
            ("tv", self.tv),
            ("theta_match", self.theta_match),
            ("phi_identity", self.phi_identity),
            ("pgf", self.pgf),
            ("rho", self.rho),
            ("negative_control_tv", self.negative_control_tv),
            ("mc_tv", self.mc_tv),
            ("cgs", self.cgs),
            ("perturbation_min", self.perturbation_min),
            ("br", self.br),
            ("duality", self.duality),
            ("gs", self.gs),
            ("trunc", self.trunc),
        ]
    }
}

/// Grids used by the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteGrids {
    /// θ values for families with unbounded parameter domain.
    pub thetas: Vec<f64>,
    /// θ values for families whose domain is `[0, R)` with finite `R`.
    pub bounded_thetas: Vec<f64>,
    pub ps: Vec<f64>,
    pub pgf_s: Vec<f64>,
    pub rho_u: GridSpec,
    pub rho_v: GridSpec,
    pub rho_p: f64,
    /// Per-axis grid for the linear and log families.
    pub cgs: GridSpec,
    /// Per-axis exact grid for the step solutions.
    pub step: GridSpec,
    pub br: GridSpec,
    /// Per-axis grid for the structure of `g`.
    pub gs: GridSpec,
    pub fd_step: f64,
    pub perturbation_eps: f64,
    pub rigidity_extent: f64,
    pub rigidity_points_per_axis: usize,
    pub rigidity_candidates: usize,
}

impl Default for SuiteGrids {
    fn default() -> Self {
        let g = |s: &str| s.parse::<GridSpec>().expect("valid literal");
        SuiteGrids {
            thetas: vec![0.5, 1.0, 2.0, 5.0],
            bounded_thetas: vec![0.1, 0.3, 0.5, 0.8],
            ps: vec![0.1, 0.3, 0.5, 0.9],
            pgf_s: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            rho_u: g("-0.5:0.5:0.1"),
            rho_v: g("0:0.5:0.05"),
            rho_p: 0.5,
            cgs: g("0:100:2.5"),
            step: g("0:19/4:1/4"),
            br: g("0:9.5:0.5"),
            gs: g("0:10:0.5"),
            fd_step: 1e-4,
            perturbation_eps: 1e-3,
            rigidity_extent: 2.0,
            rigidity_points_per_axis: 5,
            rigidity_candidates: 10,
        }
    }
}

/// Everything a run needs. Unset fields take their defaults; a missing seed
/// is never defaulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Family for `thin`, `invariance`.
    pub family: CoefficientSequence,
    pub theta: f64,
    pub p: f64,
    pub mode: ThinMode,
    /// θ and p grids for `invariance`.
    pub thetas: Vec<f64>,
    pub ps: Vec<f64>,
    pub cgs: CgsRequest,
    /// Families of the suite's invariance battery.
    pub families: Vec<CoefficientSequence>,
    /// Further families appended to the battery.
    pub extra_families: Vec<CoefficientSequence>,
    pub grids: SuiteGrids,
    pub tolerances: Tolerances,
    pub seed: Option<u64>,
    pub mc_samples: usize,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Suite,
            family: CoefficientSequence::Poisson,
            theta: 1.0,
            p: 0.5,
            mode: ThinMode::Exact,
            thetas: vec![0.5, 1.0, 2.0, 5.0],
            ps: vec![0.1, 0.3, 0.5, 0.9],
            cgs: CgsRequest::default(),
            families: named_families(),
            extra_families: Vec::new(),
            grids: SuiteGrids::default(),
            tolerances: Tolerances::default(),
            seed: None,
            mc_samples: 1_000_000,
            format: OutputFormat::Json,
            output: None,
        }
    }
}

/// Poisson, Binomial(10) and NegBin(3).
pub fn named_families() -> Vec<CoefficientSequence> {
    vec![
        CoefficientSequence::Poisson,
        CoefficientSequence::Binomial { n: 10 },
        CoefficientSequence::NegativeBinomial { r: 3.0 },
    ]
}

fn positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be positive and finite, got {x}")))
    }
}

fn nonempty<T>(field: &str, v: &[T]) -> Result<(), ConfigError> {
    if v.is_empty() {
        Err(ConfigError::new(field, "grid is empty"))
    } else {
        Ok(())
    }
}

fn probabilities(field: &str, v: &[f64]) -> Result<(), ConfigError> {
    nonempty(field, v)?;
    match v.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(p) => Err(ConfigError::new(field, format!("{p} is not in [0, 1]"))),
        None => Ok(()),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    /// The suite always draws random rigidity candidates, even with
    /// `mc_samples = 0`.
    pub fn needs_seed(&self) -> bool {
        match self.command {
            Command::Thin => self.mode == ThinMode::Mc,
            Command::Suite => true,
            Command::Invariance | Command::Cgs => false,
        }
    }

    /// Checks the fields the selected command reads.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, x) in self.tolerances.fields() {
            positive(&format!("tolerances.{name}"), x)?;
        }
        if self.needs_seed() && self.seed.is_none() {
            return Err(ConfigError::new("seed", "a seed is required for randomized checks"));
        }
        match self.command {
            Command::Thin => {
                probabilities("p", &[self.p])?;
                if self.mode == ThinMode::Mc && self.mc_samples == 0 {
                    return Err(ConfigError::new("mc_samples", "must be positive"));
                }
            }
            Command::Invariance => {
                nonempty("thetas", &self.thetas)?;
                probabilities("ps", &self.ps)?;
            }
            Command::Cgs => {
                self.cgs
                    .grid
                    .values_rational()
                    .map_err(|e| ConfigError::new("cgs.grid", e.to_string()))?;
            }
            Command::Suite => {
                let g = &self.grids;
                if self.families.is_empty() && self.extra_families.is_empty() {
                    return Err(ConfigError::new("families", "no families to check"));
                }
                nonempty("grids.thetas", &g.thetas)?;
                nonempty("grids.bounded_thetas", &g.bounded_thetas)?;
                probabilities("grids.ps", &g.ps)?;
                nonempty("grids.pgf_s", &g.pgf_s)?;
                if let Some(s) = g.pgf_s.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
                    return Err(ConfigError::new("grids.pgf_s", format!("{s} is not in [-1, 1]")));
                }
                if !(g.rho_p > 0.0 && g.rho_p < 1.0) {
                    return Err(ConfigError::new("grids.rho_p", "must lie in (0, 1)"));
                }
                for (name, spec) in [
                    ("grids.rho_u", &g.rho_u),
                    ("grids.rho_v", &g.rho_v),
                    ("grids.cgs", &g.cgs),
                    ("grids.step", &g.step),
                    ("grids.br", &g.br),
                    ("grids.gs", &g.gs),
                ] {
                    spec.values_rational()
                        .map_err(|e| ConfigError::new(name, e.to_string()))?;
                }
                positive("grids.fd_step", g.fd_step)?;
                positive("grids.perturbation_eps", g.perturbation_eps)?;
                positive("grids.rigidity_extent", g.rigidity_extent)?;
                if g.rigidity_points_per_axis < 2 {
                    return Err(ConfigError::new("grids.rigidity_points_per_axis", "needs at least 2"));
                }
                if g.rigidity_candidates == 0 {
                    return Err(ConfigError::new("grids.rigidity_candidates", "must be positive"));
                }
            }
        }
        Ok(())
    }
}
