//! Closed-form solution families.

use serde::{Deserialize, Serialize};

use super::{CgsError, CgsInstance, Domain, EquationForm, HalfLineScalar};
use crate::magma::{Carrier, MagmaElement, MagmaOps};

/// Solutions of (equ) on `[0, ∞)` whose side function `h` has a zero.
/// `s0 = inf Ker(h)` selects the case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem1Solution<S> {
    /// `f = 0` at `0` and `a` on `(0, ∞)`; `h(0) = b > 0`, `h = 0` on `(0, ∞)`.
    S0Zero { a: MagmaElement, b: S },
    /// `f = 0` on `[0, s0)` and `a` on `[s0, ∞)`;
    /// `h(s) = s0/(s0 - s)` on `[0, s0)` and `0` on `[s0, ∞)`.
    S0Positive { s0: S, a: MagmaElement },
}

/// Build the (equ) instance of a step solution over `magma`.
///
/// Over `f64` the jump at `s0` is subject to rounding of `h(s) t` near the
/// boundary `s + t = s0`; with [`num_rational::Rational64`] points the
/// residual is exactly zero on every grid.
pub fn make_theorem1<S: HalfLineScalar>(
    sol: &Theorem1Solution<S>,
    magma: &MagmaOps,
) -> Result<CgsInstance<S>, CgsError> {
    let (a, label) = match sol {
        Theorem1Solution::S0Zero { a, b } => {
            if *b <= S::zero() {
                return Err(CgsError::InvalidParameters(format!("b = {b} must be positive")));
            }
            (a, format!("theorem1(s0=0, a={a}, b={b})"))
        }
        Theorem1Solution::S0Positive { s0, a } => {
            if *s0 <= S::zero() {
                return Err(CgsError::InvalidParameters(format!("s0 = {s0} must be positive")));
            }
            (a, format!("theorem1(s0={s0}, a={a})"))
        }
    };
    if !magma.contains(a) {
        return Err(CgsError::InvalidParameters(format!(
            "a = {a} is not an element of {}",
            magma.name()
        )));
    }
    if magma.is_identity(a, 0.0) {
        return Err(CgsError::InvalidParameters("a must differ from the neutral element".into()));
    }
    let zero_m = magma.identity().clone();
    let a = a.clone();
    let inst = match sol.clone() {
        Theorem1Solution::S0Zero { b, .. } => CgsInstance::new(
            label,
            EquationForm::Equ,
            Domain::HalfLine,
            magma.clone(),
            move |s: &S| if s.is_zero() { zero_m.clone() } else { a.clone() },
            move |s: &S| if s.is_zero() { b } else { S::zero() },
        ),
        Theorem1Solution::S0Positive { s0, .. } => CgsInstance::new(
            label,
            EquationForm::Equ,
            Domain::HalfLine,
            magma.clone(),
            move |s: &S| if *s < s0 { zero_m.clone() } else { a.clone() },
            move |s: &S| if *s < s0 { s0 / (s0 - *s) } else { S::zero() },
        ),
    };
    Ok(inst)
}

/// `f(s) = a log(αs + 1)`, `g(s) = αs + 1` for `α > 0`, and the linear
/// solution `f(s) = a s`, `g ≡ 1` for `α = 0`. The coefficient `a` is a
/// nonzero real scalar or vector; vectors are handled coordinatewise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFamilySolution {
    pub alpha: f64,
    pub a: MagmaElement,
}

pub fn make_log_family(sol: &LogFamilySolution) -> Result<CgsInstance<f64>, CgsError> {
    let alpha = sol.alpha;
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(CgsError::InvalidParameters(format!("alpha = {alpha} must be >= 0")));
    }
    let (magma, coords, scalar) = match &sol.a {
        MagmaElement::Real(x) => (MagmaOps::reals(), vec![*x], true),
        MagmaElement::Vector(v) if !v.is_empty() => (MagmaOps::vectors(v.len()), v.clone(), false),
        other => {
            return Err(CgsError::InvalidParameters(format!(
                "a must be a real scalar or vector, got {}",
                other.carrier()
            )))
        }
    };
    if coords.iter().any(|c| !c.is_finite()) || coords.iter().all(|c| *c == 0.0) {
        return Err(CgsError::InvalidParameters(format!("a = {} must be finite and nonzero", sol.a)));
    }
    debug_assert!(matches!(magma.carrier(), Carrier::Real | Carrier::Vector(_)));
    let label = if alpha == 0.0 {
        format!("linear(a={})", sol.a)
    } else {
        format!("log(alpha={alpha}, a={})", sol.a)
    };
    let k = move |s: f64| if alpha == 0.0 { s } else { (alpha * s).ln_1p() };
    let f = move |s: &f64| {
        let c = k(*s);
        if scalar {
            MagmaElement::Real(coords[0] * c)
        } else {
            MagmaElement::Vector(coords.iter().map(|x| x * c).collect())
        }
    };
    Ok(CgsInstance::new(
        label,
        EquationForm::Rew,
        Domain::HalfLine,
        magma,
        f,
        move |s: &f64| alpha * s + 1.0,
    ))
}

/// `max |g(s + g(s)t) - g(s)g(t)|` for `g(s) = αs + 1`.
pub fn gs_multiplicativity_check(alpha: f64, grid: &[(f64, f64)]) -> Result<f64, CgsError> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(CgsError::InvalidParameters(format!("alpha = {alpha} must be >= 0")));
    }
    let g = |s: f64| alpha * s + 1.0;
    Ok(grid
        .iter()
        .map(|&(s, t)| (g(s + g(s) * t) - g(s) * g(t)).abs())
        .fold(0.0, f64::max))
}

/// `max |k(s + g(s)t) - k(s) - k(t)|` for `k = log ∘ g`.
pub fn gs_log_additivity_check(alpha: f64, grid: &[(f64, f64)]) -> Result<f64, CgsError> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(CgsError::InvalidParameters(format!("alpha = {alpha} must be >= 0")));
    }
    let g = |s: f64| alpha * s + 1.0;
    let k = |s: f64| (alpha * s).ln_1p();
    Ok(grid
        .iter()
        .map(|&(s, t)| (k(s + g(s) * t) - k(s) - k(t)).abs())
        .fold(0.0, f64::max))
}

/// `h(s) = f'(s)/f'(0)` by central differences with step `fd_step`.
///
/// `f` must be defined on `[s - fd_step, s + fd_step]` for every grid point,
/// including a small left neighbourhood of `0`.
pub fn derive_h_from_f(
    f: &dyn Fn(f64) -> f64,
    s_grid: &[f64],
    fd_step: f64,
) -> Result<Vec<f64>, CgsError> {
    if !fd_step.is_finite() || fd_step <= 0.0 {
        return Err(CgsError::InvalidParameters(format!("fd_step = {fd_step} must be positive")));
    }
    let d = |s: f64| (f(s + fd_step) - f(s - fd_step)) / (2.0 * fd_step);
    let d0 = d(0.0);
    if d0.is_nan() || d0.abs() < 1e-10 {
        return Err(CgsError::DegenerateDerivative(d0.abs()));
    }
    Ok(s_grid.iter().map(|&s| d(s) / d0).collect())
}
