//! Binomial thinning `T_p` and invariance of power series families.
//!
//! `T_p(μ)` is the law of `K̃ = I_1 + ... + I_K` where `K ~ μ` and the `I_n`
//! are independent `Ber(p)` indicators. In PGF terms `ψ_ν(s) = ψ_μ(ps + q)`.
//! A family is invariant when the thinned distribution is again a member,
//! with parameter `h_p(θ)` pinned by `φ(h_p(θ)) = φ(θ)/φ(qθ)`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

use crate::psf::{tv_distance, CoefficientSequence, PmfVector, PsfError, DEFAULT_TRUNC_TOL};
use crate::roots::{self, RootError};

/// Binomial coefficients up to this row are computed with exact integers.
const EXACT_BINOMIAL_ROWS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThinningError {
    #[error(transparent)]
    Psf(#[from] PsfError),
    #[error("thinning probability p = {0} is outside [0, 1]")]
    InvalidP(f64),
    #[error("root bracket violated while solving for h_p: {0}")]
    Bracket(#[from] RootError),
    #[error("h_p solution {theta_prime} misses the φ identity by {residual} (tol {tol})")]
    ToleranceNotMet {
        theta_prime: f64,
        residual: f64,
        tol: f64,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Thinning probability `p`, with `q = 1 - p` always derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ThinningParam {
    p: f64,
}

impl ThinningParam {
    pub fn new(p: f64) -> Result<Self, ThinningError> {
        if p.is_finite() && (0.0..=1.0).contains(&p) {
            Ok(ThinningParam { p })
        } else {
            Err(ThinningError::InvalidP(p))
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }
}

impl TryFrom<f64> for ThinningParam {
    type Error = ThinningError;
    fn try_from(p: f64) -> Result<Self, ThinningError> {
        ThinningParam::new(p)
    }
}

impl From<ThinningParam> for f64 {
    fn from(t: ThinningParam) -> f64 {
        t.p
    }
}

/// `C(k, j)` as `f64`: exact for `k <= 30`, via `ln Γ` above.
pub fn binomial_coefficient(k: usize, j: usize) -> f64 {
    if j > k {
        return 0.0;
    }
    if k <= EXACT_BINOMIAL_ROWS {
        let j = j.min(k - j) as u64;
        let k = k as u64;
        // C(k, i+1) = C(k, i) (k - i) / (i + 1) stays integral at every step.
        let c = (0..j).fold(1u64, |c, i| c * (k - i) / (i + 1));
        c as f64
    } else {
        ln_binomial(k as u64, j as u64).exp()
    }
}

/// `P(Bin(k, p) = j)`.
fn binomial_pmf(k: usize, j: usize, t: ThinningParam) -> f64 {
    let (p, q) = (t.p(), t.q());
    if k <= EXACT_BINOMIAL_ROWS {
        binomial_coefficient(k, j) * p.powi(j as i32) * q.powi((k - j) as i32)
    } else {
        let ln = ln_binomial(k as u64, j as u64) + j as f64 * p.ln() + (k - j) as f64 * (-p).ln_1p();
        ln.exp()
    }
}

/// Exact thinning `ν_j = Σ_{k >= j} μ_k C(k, j) p^j q^(k-j)`.
///
/// The tail of `μ` beyond its last stored index is carried over unchanged as
/// the tail bound of `ν`. `p = 0` gives `δ_0` and `p = 1` returns `μ`.
pub fn thin_exact(mu: &PmfVector, t: ThinningParam) -> PmfVector {
    if t.p() == 0.0 {
        return PmfVector::delta(0);
    }
    if t.p() == 1.0 {
        return mu.clone();
    }
    let n = mu.masses.len();
    let mut nu = vec![0.0; n];
    for (k, &mk) in mu.masses.iter().enumerate() {
        if mk == 0.0 {
            continue;
        }
        for (j, nj) in nu.iter_mut().enumerate().take(k + 1) {
            *nj += mk * binomial_pmf(k, j, t);
        }
    }
    PmfVector {
        masses: nu,
        tail_bound: mu.tail_bound,
    }
}

/// Monte Carlo thinning: draws `K` from the stored masses of `μ` (the tail is
/// ignored), sums `K` Bernoulli indicators and returns the empirical PMF.
/// Deterministic for a given seed.
pub fn thin_mc(
    mu: &PmfVector,
    t: ThinningParam,
    n_samples: usize,
    seed: u64,
) -> Result<PmfVector, ThinningError> {
    if n_samples == 0 {
        return Err(ThinningError::InvalidArgument("n_samples must be positive".into()));
    }
    let sampler = WeightedIndex::new(&mu.masses)
        .map_err(|e| ThinningError::InvalidArgument(format!("cannot sample from μ: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: Vec<u64> = vec![0; mu.masses.len()];
    for _ in 0..n_samples {
        let k = sampler.sample(&mut rng);
        let thinned = (0..k).filter(|_| rng.random_bool(t.p())).count();
        counts[thinned] += 1;
    }
    while counts.len() > 1 && counts.last() == Some(&0) {
        counts.pop();
    }
    let n = n_samples as f64;
    Ok(PmfVector {
        masses: counts.into_iter().map(|c| c as f64 / n).collect(),
        tail_bound: 0.0,
    })
}

/// `max_s |ψ_ν(s) - φ((ps+q)θ)/φ(θ)|` where `ν = T_p(μ_{a,θ})`.
pub fn pgf_composition_check(
    seq: &CoefficientSequence,
    theta: f64,
    t: ThinningParam,
    s_grid: &[f64],
    trunc_tol: f64,
) -> Result<f64, ThinningError> {
    let domain = seq.domain();
    for &s in s_grid {
        let x = (t.p() * s + t.q()) * theta;
        if !domain.contains_abs(x) {
            return Err(PsfError::Domain {
                theta: x,
                sup_theta: domain.sup_theta,
            }
            .into());
        }
    }
    let nu = thin_exact(&seq.pmf(theta, trunc_tol)?, t);
    let phi_theta = seq.phi_at(theta, trunc_tol)?;
    let mut worst: f64 = 0.0;
    for &s in s_grid {
        let composed = seq.phi_at((t.p() * s + t.q()) * theta, trunc_tol)? / phi_theta;
        worst = worst.max((nu.pgf(s) - composed).abs());
    }
    Ok(worst)
}

/// Closed-form parameter map for the three invariant families.
pub fn closed_form_h_p(seq: &CoefficientSequence, theta: f64, t: ThinningParam) -> Option<f64> {
    let (p, q) = (t.p(), t.q());
    match seq {
        CoefficientSequence::Poisson => Some(p * theta),
        CoefficientSequence::Binomial { .. } => Some(p * theta / (1.0 + q * theta)),
        CoefficientSequence::NegativeBinomial { .. } => Some(p * theta / (1.0 - q * theta)),
        CoefficientSequence::Custom(_) => None,
    }
}

/// Solve `φ(θ') = φ(θ)/φ(qθ)` for `θ' ∈ [0, θ]` by bisection.
pub fn solve_h_p(
    seq: &CoefficientSequence,
    theta: f64,
    t: ThinningParam,
    tol: f64,
) -> Result<f64, ThinningError> {
    let domain = seq.domain();
    if !domain.interior_contains(theta) {
        return Err(PsfError::Domain {
            theta,
            sup_theta: domain.sup_theta,
        }
        .into());
    }
    if t.p() == 1.0 || theta == 0.0 {
        return Ok(theta);
    }
    let series_tol = DEFAULT_TRUNC_TOL * 1e-2;
    let target = seq.phi_at(theta, series_tol)? / seq.phi_at(t.q() * theta, series_tol)?;
    if t.p() == 0.0 {
        return Ok(0.0);
    }
    let residual = |x: f64| seq.phi_at(x, series_tol).map_or(f64::NAN, |v| v - target);
    let root = roots::bisect(residual, 0.0, theta, roots::DEFAULT_MAX_ITER)?;
    let miss = residual(root).abs();
    if miss > tol {
        return Err(ThinningError::ToleranceNotMet {
            theta_prime: root,
            residual: miss,
            tol,
        });
    }
    Ok(root)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceTolerances {
    pub invariance_tol: f64,
    pub identity_tol: f64,
    pub trunc_tol: f64,
}

impl Default for InvarianceTolerances {
    fn default() -> Self {
        InvarianceTolerances {
            invariance_tol: 1e-8,
            identity_tol: 1e-8,
            trunc_tol: DEFAULT_TRUNC_TOL,
        }
    }
}

/// Outcome of checking `T_p(μ_{a,θ}) = μ_{a,θ'}` for a fitted `θ'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinningReport {
    pub family: String,
    pub theta: f64,
    pub p: f64,
    pub fitted_theta_prime: f64,
    pub tv: f64,
    /// `(φ(θ') - φ(θ)/φ(qθ)) / (φ(θ)/φ(qθ))`, relative because `φ` grows
    /// quickly in `θ`.
    pub phi_identity_residual: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// Fit `θ'` by matching the mean of the thinned distribution.
///
/// The mean of a power series distribution is strictly increasing in `θ`,
/// so `[0, θ]` brackets the root. Every sign change found by a scan is
/// reported, and if no root is found the fit falls back to minimizing the TV
/// distance over a grid.
fn fit_theta_prime(
    seq: &CoefficientSequence,
    theta: f64,
    nu: &PmfVector,
    trunc_tol: f64,
    diagnostics: &mut Vec<String>,
) -> f64 {
    let target = nu.mean();
    let mean_gap = |x: f64| seq.mean(x).map_or(f64::NAN, |m| m - target);
    let fitted = if seq.is_named() {
        roots::bisect(mean_gap, 0.0, theta, roots::DEFAULT_MAX_ITER).ok()
    } else {
        let found = roots::find_all_roots(mean_gap, 0.0, theta, 64, roots::DEFAULT_MAX_ITER);
        if found.len() > 1 {
            diagnostics.push(format!("mean matching has {} bracketing roots: {found:?}", found.len()));
        }
        found.into_iter().min_by(|a, b| {
            let tv = |x: f64| {
                seq.pmf(x, trunc_tol)
                    .map_or(f64::INFINITY, |m| tv_distance(nu, &m).distance)
            };
            tv(*a).total_cmp(&tv(*b))
        })
    };
    match fitted {
        Some(x) => x,
        None => {
            diagnostics.push("mean matching found no root; fell back to TV minimization".into());
            let tv = |x: f64| {
                seq.pmf(x, trunc_tol)
                    .map_or(f64::INFINITY, |m| tv_distance(nu, &m).distance)
            };
            let n = 200;
            let best = (0..=n)
                .map(|i| theta * i as f64 / n as f64)
                .min_by(|a, b| tv(*a).total_cmp(&tv(*b)))
                .unwrap_or(0.0);
            let step = theta / n as f64;
            roots::golden_section_min(tv, (best - step).max(0.0), (best + step).min(theta), 80)
        }
    }
}

/// Thin `μ_{a,θ}`, fit `θ'`, and compare against `μ_{a,θ'}` and the φ identity.
pub fn check_invariance(
    seq: &CoefficientSequence,
    theta: f64,
    t: ThinningParam,
    tols: &InvarianceTolerances,
) -> Result<ThinningReport, ThinningError> {
    let mu = seq.pmf(theta, tols.trunc_tol)?;
    let nu = thin_exact(&mu, t);
    let mut diagnostics = Vec::new();
    let fitted = if t.p() == 1.0 {
        theta
    } else {
        fit_theta_prime(seq, theta, &nu, tols.trunc_tol, &mut diagnostics)
    };
    let refit = seq.pmf(fitted, tols.trunc_tol)?;
    let tv = tv_distance(&nu, &refit).distance;
    let series_tol = tols.trunc_tol * 1e-2;
    let rhs = seq.phi_at(theta, series_tol)? / seq.phi_at(t.q() * theta, series_tol)?;
    let phi_identity_residual = (seq.phi_at(fitted, series_tol)? - rhs) / rhs;
    let passed = tv <= tols.invariance_tol && phi_identity_residual.abs() <= tols.identity_tol;
    if !passed && !seq.is_named() {
        diagnostics.push(format!(
            "thinned distribution leaves the family: tv = {tv:.6e}, identity residual = {phi_identity_residual:.6e}"
        ));
    }
    Ok(ThinningReport {
        family: seq.id(),
        theta,
        p: t.p(),
        fitted_theta_prime: fitted,
        tv,
        phi_identity_residual,
        passed,
        diagnostics,
    })
}

/// [`check_invariance`] over the product grid `thetas × ps`, in row-major order
/// (`θ` outer). Points are evaluated in parallel.
pub fn invariance_grid(
    seq: &CoefficientSequence,
    thetas: &[f64],
    ps: &[f64],
    tols: &InvarianceTolerances,
) -> Result<Vec<ThinningReport>, ThinningError> {
    let params: Vec<ThinningParam> = ps.iter().map(|&p| ThinningParam::new(p)).collect::<Result<_, _>>()?;
    let points: Vec<(f64, ThinningParam)> = thetas
        .iter()
        .flat_map(|&th| params.iter().map(move |&t| (th, t)))
        .collect();
    points
        .par_iter()
        .map(|&(th, t)| check_invariance(seq, th, t, tols))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMode {
    /// `ρ(v) = (q/(pv)) h_p(v/q)` with `h_p` from [`solve_h_p`].
    Solved,
    /// Closed forms: `1`, `1/(1+v)`, `1/(1-v)`.
    ClosedForm,
}

/// `ρ(v) = (q/(pv)) h_p(v/q)` for `v > 0`, `ρ(0) = 1`.
#[derive(Debug, Clone)]
pub struct RhoMap {
    seq: CoefficientSequence,
    t: ThinningParam,
    mode: RhoMode,
}

impl RhoMap {
    pub fn new(seq: CoefficientSequence, t: ThinningParam, mode: RhoMode) -> Result<Self, ThinningError> {
        if !(t.p() > 0.0 && t.p() < 1.0) {
            return Err(ThinningError::InvalidArgument(format!(
                "ρ needs p in (0, 1), got {}",
                t.p()
            )));
        }
        if mode == RhoMode::ClosedForm && !seq.is_named() {
            return Err(ThinningError::Unsupported(format!(
                "no closed-form ρ for {}",
                seq.id()
            )));
        }
        Ok(RhoMap { seq, t, mode })
    }

    pub fn family(&self) -> &CoefficientSequence {
        &self.seq
    }

    pub fn eval(&self, v: f64) -> Result<f64, ThinningError> {
        if v == 0.0 {
            return Ok(1.0);
        }
        if v < 0.0 {
            return Err(ThinningError::InvalidArgument(format!("ρ is defined for v >= 0, got {v}")));
        }
        match self.mode {
            RhoMode::ClosedForm => Ok(match self.seq {
                CoefficientSequence::Poisson => 1.0,
                CoefficientSequence::Binomial { .. } => 1.0 / (1.0 + v),
                CoefficientSequence::NegativeBinomial { .. } => 1.0 / (1.0 - v),
                CoefficientSequence::Custom(_) => unreachable!("rejected in RhoMap::new"),
            }),
            RhoMode::Solved => {
                let (p, q) = (self.t.p(), self.t.q());
                let h = solve_h_p(&self.seq, v / q, self.t, 1e-9)?;
                Ok(q / (p * v) * h)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    pub max_residual: f64,
    pub evaluated: usize,
    pub skipped: usize,
    pub worst_point: Option<(f64, f64)>,
}

/// `max |φ(u+v) - φ(v) φ(u ρ(v))|` over `u_grid × v_grid`.
///
/// Points leave the domain when `v < 0`, `ρ(v)` cannot be evaluated, or
/// `|u| + v`, `|u ρ(v)|` reach the radius of convergence. Those are skipped
/// and counted.
pub fn rho_check(rho: &RhoMap, u_grid: &[f64], v_grid: &[f64]) -> Result<RhoReport, ThinningError> {
    if u_grid.is_empty() || v_grid.is_empty() {
        return Err(ThinningError::InvalidArgument("empty u or v grid".into()));
    }
    let seq = &rho.seq;
    let domain = seq.domain();
    let tol = DEFAULT_TRUNC_TOL * 1e-2;
    let mut report = RhoReport {
        max_residual: 0.0,
        evaluated: 0,
        skipped: 0,
        worst_point: None,
    };
    for &v in v_grid {
        let r = match (v >= 0.0 && domain.interior_contains(v)).then(|| rho.eval(v)) {
            Some(Ok(r)) => r,
            _ => {
                report.skipped += u_grid.len();
                continue;
            }
        };
        let phi_v = seq.phi_at(v, tol)?;
        for &u in u_grid {
            if !(domain.contains_abs(u.abs() + v) && domain.contains_abs(u * r)) {
                report.skipped += 1;
                continue;
            }
            let lhs = seq.phi_at(u + v, tol)?;
            let rhs = phi_v * seq.phi_at(u * r, tol)?;
            let res = (lhs - rhs).abs();
            report.evaluated += 1;
            if report.worst_point.is_none() || res > report.max_residual {
                report.max_residual = res;
                report.worst_point = Some((u, v));
            }
        }
    }
    Ok(report)
}
