//! Cauchy–Gołąb–Schinzel equations
//!
//! ```text
//! (equ)  f(s + t)        = f(s) + f(h(s) t)
//! (rew)  f(s + g(s) t)   = f(s) + f(t)
//! ```
//!
//! for `f : U → M` into a unital cancellative magma and a scalar side
//! function (`h` or `g`). `U` is either the half line `[0, ∞)` or `R^d`.
//!
//! Universally quantified statements are approximated by explicit finite
//! grids; every residual report carries the number of points and the worst
//! pair. Domain points can be `f64`, exact [`Rational64`] (so that step
//! solutions can be checked without rounding at their jump), or `Vec<f64>`
//! for the vector-space setting.

mod grid;
mod probes;
mod rigidity;
mod solutions;

use std::fmt;
use std::sync::Arc;

use num_rational::Rational64;
use num_traits::{Num, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::magma::{distance, MagmaElement, MagmaError, MagmaOps};

pub use grid::{pair_grid, parse_rational, GridSpec};
pub use probes::{
    kernel_probe, probe_g_lower_bound, probe_regularity, probe_regularity_components,
    screen_candidate, CandidateScreen, KernelReport, RegularityReport, DEFAULT_RC_STEPS,
    INJECTIVITY_SEPARATION,
};
pub use rigidity::{
    symmetric_grid, vector_space_rigidity_falsifier, RigidityVerdict, Witness, WitnessKind,
};
pub use solutions::{
    derive_h_from_f, gs_log_additivity_check, gs_multiplicativity_check, make_log_family,
    make_theorem1, LogFamilySolution, Theorem1Solution,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CgsError {
    #[error(transparent)]
    Magma(#[from] MagmaError),
    #[error("point {point} lies outside the domain {domain}")]
    Domain { point: String, domain: String },
    #[error("side function is undefined at {0}")]
    SideUndefined(String),
    #[error("side function value {value} at {point} leaves [0, ∞)")]
    SideRange { point: String, value: String },
    #[error("kernel of the side function is nonempty: zero at {0}")]
    KernelNonEmpty(String),
    #[error("invalid solution parameters: {0}")]
    InvalidParameters(String),
    #[error("f vanishes on the whole grid; the trivial solution is excluded")]
    TrivialF,
    #[error("operation requires the {expected} form")]
    WrongForm { expected: EquationForm },
    #[error("degenerate derivative: |f'(0)| = {0} is below 1e-10")]
    DegenerateDerivative(f64),
    #[error("grid error: {0}")]
    Grid(String),
}

/// Scalars usable as domain points and side-function values.
pub trait Scalar:
    Clone + fmt::Debug + fmt::Display + PartialOrd + Num + ToPrimitive + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Clone + fmt::Debug + fmt::Display + PartialOrd + Num + ToPrimitive + Send + Sync + 'static
{
}

/// A point of `U`, with the scalar field acting on it.
pub trait DomainPoint: Clone + fmt::Debug + Send + Sync + 'static {
    type Field: Scalar;

    fn add(&self, other: &Self) -> Self;
    fn scale(&self, c: &Self::Field) -> Self;
    fn coords(&self) -> Vec<f64>;
    fn dim(&self) -> usize;
    /// Human-readable form used in messages and labels.
    fn label(&self) -> String;
    /// `Some(x >= 0)` for scalars, `None` for vectors.
    fn nonnegative(&self) -> Option<bool>;
}

macro_rules! scalar_point {
    ($t:ty) => {
        impl DomainPoint for $t {
            type Field = $t;

            fn add(&self, other: &Self) -> Self {
                *self + *other
            }
            fn scale(&self, c: &Self) -> Self {
                *c * *self
            }
            fn coords(&self) -> Vec<f64> {
                vec![self.to_f64().unwrap_or(f64::NAN)]
            }
            fn dim(&self) -> usize {
                1
            }
            fn label(&self) -> String {
                self.to_string()
            }
            fn nonnegative(&self) -> Option<bool> {
                Some(*self >= <$t as num_traits::Zero>::zero())
            }
        }
    };
}

scalar_point!(f64);
scalar_point!(Rational64);

impl DomainPoint for Vec<f64> {
    type Field = f64;

    fn add(&self, other: &Self) -> Self {
        self.iter().zip(other).map(|(a, b)| a + b).collect()
    }
    fn scale(&self, c: &f64) -> Self {
        self.iter().map(|a| c * a).collect()
    }
    fn coords(&self) -> Vec<f64> {
        self.clone()
    }
    fn dim(&self) -> usize {
        self.len()
    }
    fn label(&self) -> String {
        format!("{self:?}")
    }
    fn nonnegative(&self) -> Option<bool> {
        None
    }
}

/// Scalar domain points: `f64` and [`Rational64`].
pub trait HalfLineScalar: Scalar + Copy + DomainPoint<Field = Self> {}
impl<T> HalfLineScalar for T where T: Scalar + Copy + DomainPoint<Field = T> {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationForm {
    /// `f(s+t) = f(s) + f(h(s) t)`
    Equ,
    /// `f(s + g(s) t) = f(s) + f(t)`
    Rew,
}

impl fmt::Display for EquationForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquationForm::Equ => write!(f, "equ"),
            EquationForm::Rew => write!(f, "rew"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    HalfLine,
    VectorSpace(usize),
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::HalfLine => write!(f, "[0, ∞)"),
            Domain::VectorSpace(d) => write!(f, "R^{d}"),
        }
    }
}

impl Domain {
    fn contains<P: DomainPoint>(&self, x: &P) -> bool {
        match self {
            Domain::HalfLine => x.nonnegative() == Some(true),
            Domain::VectorSpace(d) => x.dim() == *d && x.coords().iter().all(|c| c.is_finite()),
        }
    }
}

pub(crate) fn show<P: DomainPoint>(x: &P) -> String {
    x.label()
}

pub type PointFn<P> = Arc<dyn Fn(&P) -> MagmaElement + Send + Sync>;
pub type SideFn<P> =
    Arc<dyn Fn(&P) -> Result<<P as DomainPoint>::Field, CgsError> + Send + Sync>;

/// A candidate pair `(f, h)` for (equ) or `(f, g)` for (rew).
#[derive(Clone)]
pub struct CgsInstance<P: DomainPoint> {
    label: String,
    form: EquationForm,
    domain: Domain,
    magma: MagmaOps,
    f: PointFn<P>,
    side: SideFn<P>,
}

impl<P: DomainPoint> fmt::Debug for CgsInstance<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CgsInstance")
            .field("label", &self.label)
            .field("form", &self.form)
            .field("domain", &self.domain)
            .field("magma", &self.magma.name())
            .finish()
    }
}

impl<P: DomainPoint> CgsInstance<P> {
    pub fn new(
        label: impl Into<String>,
        form: EquationForm,
        domain: Domain,
        magma: MagmaOps,
        f: impl Fn(&P) -> MagmaElement + Send + Sync + 'static,
        side: impl Fn(&P) -> P::Field + Send + Sync + 'static,
    ) -> Self {
        CgsInstance {
            label: label.into(),
            form,
            domain,
            magma,
            f: Arc::new(f),
            side: Arc::new(move |x| Ok(side(x))),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn form(&self) -> EquationForm {
        self.form
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn magma(&self) -> &MagmaOps {
        &self.magma
    }

    pub fn f(&self, x: &P) -> MagmaElement {
        (self.f)(x)
    }

    /// `h(x)` for (equ) instances, `g(x)` for (rew) instances.
    pub fn side(&self, x: &P) -> Result<P::Field, CgsError> {
        (self.side)(x)
    }

    fn check_point(&self, x: &P) -> Result<(), CgsError> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(CgsError::Domain {
                point: show(x),
                domain: self.domain.to_string(),
            })
        }
    }

    fn side_checked(&self, x: &P) -> Result<P::Field, CgsError> {
        let v = self.side(x)?;
        if self.domain == Domain::HalfLine && v < <P::Field as num_traits::Zero>::zero() {
            return Err(CgsError::SideRange {
                point: show(x),
                value: v.to_string(),
            });
        }
        Ok(v)
    }

    /// Both sides of the equation at `(s, t)`.
    pub fn sides_at(&self, s: &P, t: &P) -> Result<(MagmaElement, MagmaElement), CgsError> {
        self.check_point(s)?;
        self.check_point(t)?;
        let side = self.side_checked(s)?;
        let (lhs, rhs) = match self.form {
            EquationForm::Equ => {
                let lhs = self.f(&s.add(t));
                let rhs = self.magma.op(&self.f(s), &self.f(&t.scale(&side)))?;
                (lhs, rhs)
            }
            EquationForm::Rew => {
                let lhs = self.f(&s.add(&t.scale(&side)));
                let rhs = self.magma.op(&self.f(s), &self.f(t))?;
                (lhs, rhs)
            }
        };
        Ok((lhs, rhs))
    }

    /// Magma distance between the two sides at `(s, t)`.
    pub fn residual_at(&self, s: &P, t: &P) -> Result<f64, CgsError> {
        let (lhs, rhs) = self.sides_at(s, t)?;
        Ok(distance(&lhs, &rhs)?)
    }

    /// Swap (equ) and (rew) through `g = 1/h`. The kernel of the side
    /// function must be empty on `probe`; elsewhere a zero makes the dual side
    /// function undefined, which surfaces as [`CgsError::SideUndefined`].
    pub fn dual(&self, probe: &[P]) -> Result<Self, CgsError> {
        let zero = <P::Field as num_traits::Zero>::zero();
        for x in probe {
            if self.side(x)? == zero {
                return Err(CgsError::KernelNonEmpty(show(x)));
            }
        }
        let side = Arc::clone(&self.side);
        let form = match self.form {
            EquationForm::Equ => EquationForm::Rew,
            EquationForm::Rew => EquationForm::Equ,
        };
        Ok(CgsInstance {
            label: format!("dual({})", self.label),
            form,
            domain: self.domain,
            magma: self.magma.clone(),
            f: Arc::clone(&self.f),
            side: Arc::new(move |x| {
                let v = side(x)?;
                let zero = <P::Field as num_traits::Zero>::zero();
                if v == zero {
                    Err(CgsError::SideUndefined(show(x)))
                } else {
                    Ok(<P::Field as num_traits::One>::one() / v)
                }
            }),
        })
    }

    /// The same `f` with the side function multiplied by `factor`.
    pub fn with_side_factor(&self, factor: P::Field) -> Self {
        let side = Arc::clone(&self.side);
        CgsInstance {
            label: format!("{}*({factor})", self.label),
            form: self.form,
            domain: self.domain,
            magma: self.magma.clone(),
            f: Arc::clone(&self.f),
            side: Arc::new(move |x| Ok(side(x)? * factor.clone())),
        }
    }
}

/// Worst violation of an equation over a finite grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub label: String,
    pub form: EquationForm,
    pub magma: String,
    /// Absolute difference (numeric magmas) or 0/1 mismatch (exact magmas).
    pub max_residual: f64,
    pub n_points: usize,
    pub worst_point: Option<(Vec<f64>, Vec<f64>)>,
    pub exact: bool,
    pub tolerance: f64,
    pub passed: bool,
}

/// Per-point residual, used to export heat maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub residual: f64,
}

pub fn residual_field<P: DomainPoint>(
    inst: &CgsInstance<P>,
    grid: &[(P, P)],
) -> Result<Vec<PointResidual>, CgsError> {
    grid.par_iter()
        .map(|(s, t)| {
            inst.residual_at(s, t).map(|r| PointResidual {
                s: s.coords(),
                t: t.coords(),
                residual: r,
            })
        })
        .collect()
}

/// Evaluate the instance's equation on every `(s, t)` in `grid`.
///
/// The first point attaining the maximum (in grid order) is reported as the
/// worst point, so results do not depend on evaluation order.
pub fn residual_check<P: DomainPoint>(
    inst: &CgsInstance<P>,
    grid: &[(P, P)],
    tol: f64,
) -> Result<ResidualStats, CgsError> {
    if grid.is_empty() {
        return Err(CgsError::Grid("empty grid".into()));
    }
    let residuals: Vec<f64> = grid
        .par_iter()
        .map(|(s, t)| inst.residual_at(s, t))
        .collect::<Result<_, _>>()?;
    let mut worst = 0;
    for (i, r) in residuals.iter().enumerate() {
        if *r > residuals[worst] || r.is_nan() && !residuals[worst].is_nan() {
            worst = i;
        }
    }
    let max_residual = residuals[worst];
    let exact = inst.magma.is_exact();
    let passed = if exact {
        max_residual == 0.0
    } else {
        max_residual <= tol
    };
    Ok(ResidualStats {
        label: inst.label.clone(),
        form: inst.form,
        magma: inst.magma.name().to_owned(),
        max_residual,
        n_points: grid.len(),
        worst_point: Some((grid[worst].0.coords(), grid[worst].1.coords())),
        exact,
        tolerance: tol,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    fn real_rew(
        label: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> CgsInstance<f64> {
        CgsInstance::new(
            label,
            EquationForm::Rew,
            Domain::HalfLine,
            MagmaOps::reals(),
            move |s: &f64| MagmaElement::Real(f(*s)),
            move |s: &f64| g(*s),
        )
    }

    #[test]
    fn additive_case_is_exact_enough() {
        let inst = real_rew("3s", |s| 3.0 * s, |_| 1.0);
        let g = linspace(0.0, 10.0, 21);
        let stats = residual_check(&inst, &pair_grid(&g, &g), 1e-12).unwrap();
        assert!(stats.max_residual <= 1e-12);
        assert!(stats.passed);
        assert_eq!(stats.n_points, 441);
    }

    #[test]
    fn log_case_on_half_step_grid() {
        let inst = real_rew("2log(0.5s+1)", |s| 2.0 * (0.5 * s).ln_1p(), |s| 0.5 * s + 1.0);
        let g = linspace(0.0, 10.0, 21);
        let stats = residual_check(&inst, &pair_grid(&g, &g), 1e-12).unwrap();
        assert!(stats.max_residual <= 1e-12, "{}", stats.max_residual);
    }

    #[test]
    fn square_is_not_a_solution() {
        let inst = real_rew("s^2", |s| s * s, |_| 1.0);
        let stats = residual_check(&inst, &[(1.0, 1.0), (0.0, 0.0)], 1e-12).unwrap();
        assert_eq!(stats.max_residual, 2.0);
        assert_eq!(stats.worst_point, Some((vec![1.0], vec![1.0])));
        assert!(!stats.passed);
    }

    #[test]
    fn domain_violation_names_the_point() {
        let inst = real_rew("s", |s| s, |_| 1.0);
        let err = residual_check(&inst, &[(1.0, -0.5)], 1e-12).unwrap_err();
        match err {
            CgsError::Domain { point, .. } => assert!(point.contains("-0.5")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(residual_check(&inst, &[], 1e-12), Err(CgsError::Grid(_))));
        let negative_g = real_rew("s", |s| s, |_| -1.0);
        assert!(matches!(
            residual_check(&negative_g, &[(1.0, 1.0)], 1e-12),
            Err(CgsError::SideRange { .. })
        ));
    }

    #[test]
    fn dual_swaps_forms() {
        let inst = real_rew("log", |s| s.ln_1p(), |s| 1.0 + s);
        let g = linspace(0.0, 5.0, 11);
        let dual = inst.dual(&g).unwrap();
        assert_eq!(dual.form(), EquationForm::Equ);
        assert!(residual_check(&dual, &pair_grid(&g, &g), 1e-12).unwrap().passed);
        let back = dual.dual(&g).unwrap();
        assert_eq!(back.form(), EquationForm::Rew);
        assert!(residual_check(&back, &pair_grid(&g, &g), 1e-12).unwrap().passed);
        let degenerate = real_rew("s", |s| s, |s| s);
        assert!(matches!(degenerate.dual(&g), Err(CgsError::KernelNonEmpty(_))));
    }
}
