//! Power series families of distributions on the nonnegative integers.
//!
//! A coefficient sequence `a = (a_k)` with `a_0 = 1` and `a_k >= 0` generates
//! the series `φ(θ) = Σ a_k θ^k` and, for every `θ` inside the convergence
//! domain, the distribution with masses `a_k θ^k / φ(θ)`. The probability
//! generating function of that distribution is `s ↦ φ(sθ)/φ(θ)`.
//!
//! Masses are always computed in log space and truncated at an index
//! `K_max` chosen so that a geometric-ratio majorant of the remaining tail
//! falls below the requested tolerance. The majorant is carried alongside the
//! masses as [`PmfVector::tail_bound`].

use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Default truncation tolerance for tails and series.
pub const DEFAULT_TRUNC_TOL: f64 = 1e-12;

/// Hard cap on the number of terms any truncation may use.
pub const MAX_TERMS: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsfError {
    #[error("theta = {theta} lies outside the parameter domain [0, {sup_theta})")]
    Domain { theta: f64, sup_theta: f64 },
    #[error("invalid coefficient sequence: {0}")]
    InvalidSequence(String),
    #[error("unsupported evaluation: {0}")]
    Unsupported(String),
    #[error("closed form {closed} and partial sum {series} disagree beyond tolerance {tol}")]
    SeriesMismatch { closed: f64, series: f64, tol: f64 },
    #[error("series did not reach tolerance {tol} within {terms} terms")]
    TruncationLimit { terms: usize, tol: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Convergence domain `Θ_a = {θ >= 0 : φ(θ) < ∞}` described by its supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    pub sup_theta: f64,
    pub closed_at_sup: bool,
}

impl ParameterDomain {
    pub fn unbounded() -> Self {
        ParameterDomain {
            sup_theta: f64::INFINITY,
            closed_at_sup: false,
        }
    }

    pub fn open(sup_theta: f64) -> Self {
        ParameterDomain {
            sup_theta,
            closed_at_sup: false,
        }
    }

    /// `0 <= θ < sup`.
    pub fn interior_contains(&self, theta: f64) -> bool {
        theta.is_finite() && theta >= 0.0 && theta < self.sup_theta
    }

    /// `|x| < sup`, the region where the series converges absolutely.
    pub fn contains_abs(&self, x: f64) -> bool {
        x.is_finite() && x.abs() < self.sup_theta
    }

    fn require_interior(&self, theta: f64) -> Result<(), PsfError> {
        if self.interior_contains(theta) {
            Ok(())
        } else {
            Err(PsfError::Domain {
                theta,
                sup_theta: self.sup_theta,
            })
        }
    }

    fn require_abs(&self, x: f64) -> Result<(), PsfError> {
        if self.contains_abs(x) {
            Ok(())
        } else {
            Err(PsfError::Domain {
                theta: x,
                sup_theta: self.sup_theta,
            })
        }
    }
}

/// Validated user-supplied coefficients.
///
/// Without `decay` the sequence is finite: `a_k = 0` past the list. With a
/// decay `d > 0` the last listed coefficient is continued geometrically,
/// `a_k = a_{L-1} d^{k-L+1}` for `k >= L`, which gives radius `1/d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomCoefficients {
    coeffs: Vec<f64>,
    decay: Option<f64>,
}

impl CustomCoefficients {
    pub fn new(coeffs: Vec<f64>, decay: Option<f64>) -> Result<Self, PsfError> {
        if coeffs.is_empty() {
            return Err(PsfError::InvalidSequence("coeffs must be nonempty".into()));
        }
        if coeffs[0] != 1.0 {
            return Err(PsfError::InvalidSequence(format!(
                "a_0 must equal 1 exactly, got {}",
                coeffs[0]
            )));
        }
        if let Some((k, a)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, a)| !a.is_finite() || **a < 0.0)
        {
            return Err(PsfError::InvalidSequence(format!(
                "a_{k} = {a} is not a finite nonnegative number"
            )));
        }
        if let Some(d) = decay {
            if !d.is_finite() || d <= 0.0 {
                return Err(PsfError::InvalidSequence(format!(
                    "decay must be finite and positive, got {d}"
                )));
            }
        }
        Ok(CustomCoefficients { coeffs, decay })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn decay(&self) -> Option<f64> {
        self.decay
    }

    fn coefficient(&self, k: usize) -> f64 {
        let len = self.coeffs.len();
        if k < len {
            return self.coeffs[k];
        }
        match self.decay {
            None => 0.0,
            Some(d) => self.coeffs[len - 1] * d.powi((k - len + 1) as i32),
        }
    }

    fn ln_coefficient(&self, k: usize) -> f64 {
        let len = self.coeffs.len();
        if k < len {
            return self.coeffs[k].ln();
        }
        match self.decay {
            None => f64::NEG_INFINITY,
            Some(d) => self.coeffs[len - 1].ln() + (k - len + 1) as f64 * d.ln(),
        }
    }
}

/// The generating sequence `a_k` of a power series family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilySpec", into = "FamilySpec")]
pub enum CoefficientSequence {
    /// `a_k = 1/k!`
    Poisson,
    /// `a_k = C(n, k)`
    Binomial { n: u32 },
    /// `a_k = C(r + k - 1, k)`
    NegativeBinomial { r: f64 },
    Custom(CustomCoefficients),
}

/// Wire format of a family, e.g. `{"kind": "binomial", "n": 10}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilySpec {
    Poisson,
    Binomial {
        n: u32,
    },
    Negbin {
        r: f64,
    },
    Custom {
        coeffs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decay: Option<f64>,
    },
}

impl TryFrom<FamilySpec> for CoefficientSequence {
    type Error = PsfError;

    fn try_from(spec: FamilySpec) -> Result<Self, PsfError> {
        match spec {
            FamilySpec::Poisson => Ok(CoefficientSequence::Poisson),
            FamilySpec::Binomial { n } => CoefficientSequence::binomial(n),
            FamilySpec::Negbin { r } => CoefficientSequence::negative_binomial(r),
            FamilySpec::Custom { coeffs, decay } => CoefficientSequence::custom(coeffs, decay),
        }
    }
}

impl From<CoefficientSequence> for FamilySpec {
    fn from(seq: CoefficientSequence) -> Self {
        match seq {
            CoefficientSequence::Poisson => FamilySpec::Poisson,
            CoefficientSequence::Binomial { n } => FamilySpec::Binomial { n },
            CoefficientSequence::NegativeBinomial { r } => FamilySpec::Negbin { r },
            CoefficientSequence::Custom(c) => FamilySpec::Custom {
                coeffs: c.coeffs,
                decay: c.decay,
            },
        }
    }
}

impl std::str::FromStr for CoefficientSequence {
    type Err = PsfError;

    /// Short names: `poisson`, `binomial:<n>`, `negbin:<r>`, or a JSON spec.
    fn from_str(s: &str) -> Result<Self, PsfError> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| PsfError::InvalidSequence(e.to_string()));
        }
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let bad = |what: &str| PsfError::InvalidSequence(format!("{what} in family `{s}`"));
        match (name, arg) {
            ("poisson", None) => Ok(CoefficientSequence::Poisson),
            ("binomial", Some(n)) => {
                CoefficientSequence::binomial(n.parse().map_err(|_| bad("bad n"))?)
            }
            ("negbin", Some(r)) => {
                CoefficientSequence::negative_binomial(r.parse().map_err(|_| bad("bad r"))?)
            }
            _ => Err(bad("unknown family")),
        }
    }
}

impl CoefficientSequence {
    pub fn poisson() -> Self {
        CoefficientSequence::Poisson
    }

    pub fn binomial(n: u32) -> Result<Self, PsfError> {
        if n == 0 {
            return Err(PsfError::InvalidSequence("binomial n must be positive".into()));
        }
        Ok(CoefficientSequence::Binomial { n })
    }

    pub fn negative_binomial(r: f64) -> Result<Self, PsfError> {
        if !r.is_finite() || r <= 0.0 {
            return Err(PsfError::InvalidSequence(format!(
                "negative binomial r must be positive, got {r}"
            )));
        }
        Ok(CoefficientSequence::NegativeBinomial { r })
    }

    pub fn custom(coeffs: Vec<f64>, decay: Option<f64>) -> Result<Self, PsfError> {
        CustomCoefficients::new(coeffs, decay).map(CoefficientSequence::Custom)
    }

    /// Stable identifier used in reports.
    pub fn id(&self) -> String {
        match self {
            CoefficientSequence::Poisson => "poisson".into(),
            CoefficientSequence::Binomial { n } => format!("binomial(n={n})"),
            CoefficientSequence::NegativeBinomial { r } => format!("negbin(r={r})"),
            CoefficientSequence::Custom(c) => {
                let coeffs: Vec<String> = c.coeffs.iter().map(|a| a.to_string()).collect();
                match c.decay {
                    None => format!("custom([{}])", coeffs.join(",")),
                    Some(d) => format!("custom([{}],decay={d})", coeffs.join(",")),
                }
            }
        }
    }

    pub fn is_named(&self) -> bool {
        !matches!(self, CoefficientSequence::Custom(_))
    }

    pub fn domain(&self) -> ParameterDomain {
        match self {
            CoefficientSequence::Poisson | CoefficientSequence::Binomial { .. } => {
                ParameterDomain::unbounded()
            }
            CoefficientSequence::NegativeBinomial { .. } => ParameterDomain::open(1.0),
            CoefficientSequence::Custom(c) => match c.decay {
                None => ParameterDomain::unbounded(),
                Some(d) => ParameterDomain::open(1.0 / d),
            },
        }
    }

    /// Number of indices with possibly nonzero `a_k`, if finite.
    pub fn support_len(&self) -> Option<usize> {
        match self {
            CoefficientSequence::Binomial { n } => Some(*n as usize + 1),
            CoefficientSequence::Custom(c) if c.decay.is_none() => Some(c.coeffs.len()),
            _ => None,
        }
    }

    /// `a_k`.
    pub fn coefficient(&self, k: usize) -> f64 {
        match self {
            CoefficientSequence::Custom(c) => c.coefficient(k),
            _ => self.ln_coefficient(k).exp(),
        }
    }

    /// `ln a_k`, `-inf` where `a_k = 0`.
    pub fn ln_coefficient(&self, k: usize) -> f64 {
        match self {
            CoefficientSequence::Poisson => -ln_factorial(k as u64),
            CoefficientSequence::Binomial { n } => {
                if k > *n as usize {
                    f64::NEG_INFINITY
                } else {
                    ln_binomial(*n as u64, k as u64)
                }
            }
            CoefficientSequence::NegativeBinomial { r } => {
                if k == 0 {
                    0.0
                } else {
                    ln_gamma(r + k as f64) - ln_gamma(*r) - ln_factorial(k as u64)
                }
            }
            CoefficientSequence::Custom(c) => c.ln_coefficient(k),
        }
    }

    /// An upper bound on `a_{j+1} |x| / a_j` over all `j >= k`.
    /// Infinite when no bound is available yet at index `k`.
    fn ratio_sup_from(&self, k: usize, x_abs: f64) -> f64 {
        let kf = k as f64;
        match self {
            CoefficientSequence::Poisson => x_abs / (kf + 1.0),
            CoefficientSequence::Binomial { n } => {
                let n = *n as f64;
                if kf >= n {
                    0.0
                } else {
                    (n - kf) * x_abs / (kf + 1.0)
                }
            }
            CoefficientSequence::NegativeBinomial { r } => {
                // (r + j)/(j + 1) decreases in j for r >= 1 and increases to 1 for r < 1.
                let at_k = (r + kf) / (kf + 1.0) * x_abs;
                if *r >= 1.0 {
                    at_k
                } else {
                    x_abs
                }
            }
            CoefficientSequence::Custom(c) => {
                let len = c.coeffs.len();
                match c.decay {
                    None if k + 1 >= len => 0.0,
                    Some(d) if k + 1 >= len => d * x_abs,
                    _ => f64::INFINITY,
                }
            }
        }
    }

    /// Closed form of `φ(x)` for the named families, valid for `|x| < sup`.
    pub fn phi_closed(&self, x: f64) -> Option<f64> {
        match self {
            CoefficientSequence::Poisson => Some(x.exp()),
            CoefficientSequence::Binomial { n } => Some((1.0 + x).powi(*n as i32)),
            CoefficientSequence::NegativeBinomial { r } => Some((1.0 - x).powf(-r)),
            CoefficientSequence::Custom(_) => None,
        }
    }

    /// Closed form of `ln φ(θ)` for `θ >= 0`.
    fn ln_phi_closed(&self, theta: f64) -> Option<f64> {
        match self {
            CoefficientSequence::Poisson => Some(theta),
            CoefficientSequence::Binomial { n } => Some(*n as f64 * theta.ln_1p()),
            CoefficientSequence::NegativeBinomial { r } => Some(-r * (-theta).ln_1p()),
            CoefficientSequence::Custom(_) => None,
        }
    }

    /// Partial sum of `Σ a_k x^k` with an absolute tail bound `<= tol`.
    ///
    /// Works for negative `x` with `|x| < sup` by summing the same series.
    pub fn phi_partial_sum(&self, x: f64, tol: f64) -> Result<SeriesSum, PsfError> {
        require_positive(tol, "tol")?;
        self.domain().require_abs(x)?;
        if x == 0.0 {
            return Ok(SeriesSum {
                value: 1.0,
                tail_bound: 0.0,
                terms: 1,
            });
        }
        let x_abs = x.abs();
        let ln_x = x_abs.ln();
        let negative = x < 0.0;
        let support = self.support_len();
        let mut sum = 0.0;
        for k in 0..MAX_TERMS {
            let ln_term = self.ln_coefficient(k) + k as f64 * ln_x;
            let mut term = ln_term.exp();
            if negative && k % 2 == 1 {
                term = -term;
            }
            sum += term;
            if support.is_some_and(|len| k + 1 >= len) {
                return Ok(SeriesSum {
                    value: sum,
                    tail_bound: 0.0,
                    terms: k + 1,
                });
            }
            let r = self.ratio_sup_from(k, x_abs);
            if r < 1.0 {
                let tail = term.abs() * r / (1.0 - r);
                if tail <= tol {
                    return Ok(SeriesSum {
                        value: sum,
                        tail_bound: tail,
                        terms: k + 1,
                    });
                }
            }
        }
        Err(PsfError::TruncationLimit {
            terms: MAX_TERMS,
            tol,
        })
    }

    /// `φ(x)` on `|x| < sup`: closed form for the named families, partial sums
    /// otherwise.
    pub(crate) fn phi_at(&self, x: f64, tol: f64) -> Result<f64, PsfError> {
        self.domain().require_abs(x)?;
        match self.phi_closed(x) {
            Some(v) => Ok(v),
            None => Ok(self.phi_partial_sum(x, tol)?.value),
        }
    }

    /// `φ(θ)` for `θ` strictly inside `Θ_a`, within absolute tolerance `tol`
    /// of the series (relative to `max(1, φ)` for large values).
    ///
    /// For the named families the closed form is returned after being
    /// cross-checked against the partial sum.
    pub fn phi_eval(&self, theta: f64, tol: f64) -> Result<f64, PsfError> {
        require_positive(tol, "tol")?;
        self.domain().require_interior(theta)?;
        let series = self.phi_partial_sum(theta, tol)?;
        match self.phi_closed(theta) {
            None => Ok(series.value),
            Some(closed) => {
                // Rounding in the partial sum grows with the magnitude of φ.
                let slack = tol * closed.abs().max(1.0) + series.tail_bound;
                if (closed - series.value).abs() > slack {
                    return Err(PsfError::SeriesMismatch {
                        closed,
                        series: series.value,
                        tol,
                    });
                }
                Ok(closed)
            }
        }
    }

    /// `ln φ(θ)` for `θ >= 0` inside the domain.
    fn ln_phi(&self, theta: f64, tol: f64) -> Result<f64, PsfError> {
        match self.ln_phi_closed(theta) {
            Some(v) => Ok(v),
            None => {
                // log-sum-exp over the partial sum terms keeps huge φ finite.
                let support = self.support_len();
                if theta == 0.0 {
                    return Ok(0.0);
                }
                let ln_x = theta.ln();
                let mut lns = Vec::new();
                for k in 0..MAX_TERMS {
                    let ln_term = self.ln_coefficient(k) + k as f64 * ln_x;
                    lns.push(ln_term);
                    if support.is_some_and(|len| k + 1 >= len) {
                        return Ok(log_sum_exp(&lns));
                    }
                    let r = self.ratio_sup_from(k, theta);
                    if r < 1.0 {
                        let ln_tail = ln_term + (r / (1.0 - r)).ln();
                        if ln_tail - log_sum_exp(&lns) <= tol.ln() - 2.0 {
                            return Ok(log_sum_exp(&lns));
                        }
                    }
                }
                Err(PsfError::TruncationLimit {
                    terms: MAX_TERMS,
                    tol,
                })
            }
        }
    }

    /// The distribution `μ_{a,θ}` truncated so that `tail_bound <= trunc_tol`.
    pub fn pmf(&self, theta: f64, trunc_tol: f64) -> Result<PmfVector, PsfError> {
        require_positive(trunc_tol, "trunc_tol")?;
        self.domain().require_interior(theta)?;
        if theta == 0.0 {
            return Ok(PmfVector::delta(0));
        }
        let ln_phi = self.ln_phi(theta, trunc_tol)?;
        let ln_theta = theta.ln();
        let support = self.support_len();
        let mut masses = Vec::new();
        for k in 0..MAX_TERMS {
            let m = (self.ln_coefficient(k) + k as f64 * ln_theta - ln_phi).exp();
            masses.push(m);
            if support.is_some_and(|len| k + 1 >= len) {
                return Ok(PmfVector {
                    masses,
                    tail_bound: 0.0,
                });
            }
            let r = self.ratio_sup_from(k, theta);
            if r < 1.0 {
                let tail = m * r / (1.0 - r);
                if tail <= trunc_tol {
                    return Ok(PmfVector {
                        masses,
                        tail_bound: tail,
                    });
                }
            }
        }
        Err(PsfError::TruncationLimit {
            terms: MAX_TERMS,
            tol: trunc_tol,
        })
    }

    /// `ψ(s) = φ(sθ)/φ(θ)` for `s ∈ [-1, 1]`.
    pub fn pgf_eval(&self, theta: f64, s: f64, tol: f64) -> Result<f64, PsfError> {
        require_positive(tol, "tol")?;
        if !(-1.0..=1.0).contains(&s) {
            return Err(PsfError::InvalidArgument(format!("s = {s} is outside [-1, 1]")));
        }
        let domain = self.domain();
        domain.require_interior(theta)?;
        domain.require_abs(s * theta)?;
        if s == 1.0 {
            return Ok(1.0);
        }
        Ok(self.phi_at(s * theta, tol)? / self.phi_at(theta, tol)?)
    }

    /// Mean of `μ_{a,θ}`, `θ φ'(θ)/φ(θ)`.
    pub fn mean(&self, theta: f64) -> Result<f64, PsfError> {
        self.domain().require_interior(theta)?;
        Ok(match self {
            CoefficientSequence::Poisson => theta,
            CoefficientSequence::Binomial { n } => *n as f64 * theta / (1.0 + theta),
            CoefficientSequence::NegativeBinomial { r } => r * theta / (1.0 - theta),
            CoefficientSequence::Custom(_) => self.pmf(theta, DEFAULT_TRUNC_TOL)?.mean(),
        })
    }
}

/// A truncated series value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

fn require_positive(x: f64, name: &str) -> Result<(), PsfError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(PsfError::InvalidArgument(format!("{name} must be positive, got {x}")))
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Finite probability mass function on `{0, ..., K_max}` plus an upper bound
/// on the mass beyond `K_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfVector {
    pub masses: Vec<f64>,
    pub tail_bound: f64,
}

impl PmfVector {
    pub fn new(masses: Vec<f64>, tail_bound: f64) -> Result<Self, PsfError> {
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(PsfError::InvalidArgument(
                "masses must be finite and nonnegative".into(),
            ));
        }
        if !tail_bound.is_finite() || tail_bound < 0.0 {
            return Err(PsfError::InvalidArgument(format!(
                "tail bound must be finite and nonnegative, got {tail_bound}"
            )));
        }
        Ok(PmfVector { masses, tail_bound })
    }

    /// Dirac mass at `k`.
    pub fn delta(k: usize) -> Self {
        let mut masses = vec![0.0; k + 1];
        masses[k] = 1.0;
        PmfVector {
            masses,
            tail_bound: 0.0,
        }
    }

    /// Index of the last stored mass.
    pub fn k_max(&self) -> usize {
        self.masses.len().saturating_sub(1)
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.masses.get(k).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `|Σ masses + tail_bound - 1|`.
    pub fn normalization_error(&self) -> f64 {
        (self.total() + self.tail_bound - 1.0).abs()
    }

    pub fn mean(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(k, m)| k as f64 * m)
            .sum()
    }

    /// `Σ s^k masses[k]` by Horner's rule; for `|s| <= 1` the truncated tail
    /// contributes at most `tail_bound`.
    pub fn pgf(&self, s: f64) -> f64 {
        self.masses.iter().rev().fold(0.0, |acc, m| acc * s + m)
    }
}

/// Total variation distance `½ Σ |p_k - q_k|` over the stored supports,
/// with `½ (tail_p + tail_q)` reported separately as slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvDistance {
    pub distance: f64,
    pub slack: f64,
}

pub fn tv_distance(p: &PmfVector, q: &PmfVector) -> TvDistance {
    let n = p.masses.len().max(q.masses.len());
    let l1: f64 = (0..n).map(|k| (p.mass(k) - q.mass(k)).abs()).sum();
    TvDistance {
        distance: 0.5 * l1,
        slack: 0.5 * (p.tail_bound + q.tail_bound),
    }
}
