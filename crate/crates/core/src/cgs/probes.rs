//! Numeric probes for the regularity lemmas.
//!
//! None of these certify a hypothesis. A `true` only means the finite sample
//! did not refute it.

use serde::{Deserialize, Serialize};

use super::{residual_check, CgsError, CgsInstance, DomainPoint, EquationForm, ResidualStats};
use crate::magma::MagmaElement;

/// Shrinking one-sided steps used for right-continuity.
pub const DEFAULT_RC_STEPS: [f64; 6] = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

/// Values closer than this are treated as equal by the injectivity probe.
pub const INJECTIVITY_SEPARATION: f64 = 1e-9;

const RC_TOL: f64 = 1e-6;
const RC_SMALLEST: usize = 3;
const G_LOWER_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub form: EquationForm,
    pub n_points: usize,
    pub min_abs_side: f64,
    pub zeros: Vec<Vec<f64>>,
    pub empty: bool,
}

/// Zeros of the side function on `points`.
pub fn kernel_probe<P: DomainPoint>(
    inst: &CgsInstance<P>,
    points: &[P],
) -> Result<KernelReport, CgsError> {
    let mut zeros = Vec::new();
    let mut min_abs = f64::INFINITY;
    for x in points {
        let v = inst.side(x)?;
        let a = num_traits::ToPrimitive::to_f64(&v).unwrap_or(f64::NAN).abs();
        min_abs = min_abs.min(a);
        if v == <P::Field as num_traits::Zero>::zero() {
            zeros.push(x.coords());
        }
    }
    Ok(KernelReport {
        form: inst.form(),
        n_points: points.len(),
        min_abs_side: min_abs,
        empty: zeros.is_empty(),
        zeros,
    })
}

/// `g(s) >= 1 - 1e-12` at every grid point. Necessary for a (rew) solution
/// whose `f` is right continuous somewhere.
pub fn probe_g_lower_bound(inst: &CgsInstance<f64>, s_grid: &[f64]) -> Result<bool, CgsError> {
    if inst.form() != EquationForm::Rew {
        return Err(CgsError::WrongForm {
            expected: EquationForm::Rew,
        });
    }
    for s in s_grid {
        if inst.side(s)? < 1.0 - G_LOWER_SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub right_continuous: bool,
    pub monotone: bool,
    pub injective_on_grid: bool,
}

impl RegularityReport {
    /// Right continuity at a point forces continuity, monotonicity and then
    /// injectivity for a genuine (rew) solution.
    pub fn chain_holds(&self) -> bool {
        !self.right_continuous || (self.monotone && self.injective_on_grid)
    }
}

/// Right continuity is judged on the three smallest of `steps` with tolerance
/// `1e-6 · max(1, |f(x)|)`. Monotonicity and injectivity use `points` sorted.
pub fn probe_regularity(f: &dyn Fn(f64) -> f64, points: &[f64], steps: &[f64]) -> RegularityReport {
    let mut steps: Vec<f64> = steps.iter().copied().filter(|h| *h > 0.0).collect();
    steps.sort_by(f64::total_cmp);
    steps.truncate(RC_SMALLEST);

    let right_continuous = !steps.is_empty()
        && points.iter().all(|&x| {
            let fx = f(x);
            let tol = RC_TOL * fx.abs().max(1.0);
            steps.iter().all(|h| (f(x + h) - fx).abs() <= tol)
        });

    let mut xs = points.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let diffs: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|d| *d >= 0.0) || diffs.iter().all(|d| *d <= 0.0);

    let mut sorted = ys.clone();
    sorted.sort_by(f64::total_cmp);
    let injective_on_grid = sorted
        .windows(2)
        .all(|w| w[1] - w[0] > INJECTIVITY_SEPARATION);

    RegularityReport {
        right_continuous,
        monotone,
        injective_on_grid,
    }
}

/// [`probe_regularity`] applied to each coordinate of a vector-valued `f`.
pub fn probe_regularity_components(
    f: &dyn Fn(f64) -> Vec<f64>,
    dim: usize,
    points: &[f64],
    steps: &[f64],
) -> Vec<RegularityReport> {
    (0..dim)
        .map(|i| probe_regularity(&|s| f(s).get(i).copied().unwrap_or(f64::NAN), points, steps))
        .collect()
}

/// Residual together with the necessary conditions, for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScreen {
    pub residual: ResidualStats,
    pub g_lower_bound: bool,
    pub regularity: Vec<RegularityReport>,
    /// Residual check failed or a necessary condition was violated.
    pub flagged: bool,
    /// For a passing candidate, the lemma chain holds in every coordinate.
    pub chain_consistent: bool,
}

pub fn screen_candidate(
    inst: &CgsInstance<f64>,
    pairs: &[(f64, f64)],
    points: &[f64],
    tol: f64,
) -> Result<CandidateScreen, CgsError> {
    let residual = residual_check(inst, pairs, tol)?;
    let g_lower_bound = probe_g_lower_bound(inst, points)?;
    let coords = |s: f64| match inst.f(&s) {
        MagmaElement::Real(x) => vec![x],
        MagmaElement::Vector(v) => v,
        _ => vec![f64::NAN],
    };
    let dim = points.first().map(|s| coords(*s).len()).unwrap_or(0);
    if dim == 0 {
        return Err(CgsError::Grid(format!("no probe points for {}", inst.label())));
    }
    let regularity = probe_regularity_components(&coords, dim, points, &DEFAULT_RC_STEPS);
    let flagged = !residual.passed || !g_lower_bound;
    let chain_consistent = !residual.passed || regularity.iter().all(RegularityReport::chain_holds);
    Ok(CandidateScreen {
        residual,
        g_lower_bound,
        regularity,
        flagged,
        chain_consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{make_log_family, make_theorem1, pair_grid, Domain, LogFamilySolution, Theorem1Solution};
    use super::*;
    use crate::magma::MagmaOps;

    fn grid(n: usize, h: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * h).collect()
    }

    #[test]
    fn log_family_passes_every_probe() {
        let inst = make_log_family(&LogFamilySolution {
            alpha: 1.0,
            a: MagmaElement::Real(1.0),
        })
        .unwrap();
        let pts = grid(20, 0.5);
        let screen = screen_candidate(&inst, &pair_grid(&pts, &pts), &pts, 1e-10).unwrap();
        assert!(!screen.flagged);
        assert!(screen.g_lower_bound);
        assert_eq!(
            screen.regularity,
            vec![RegularityReport {
                right_continuous: true,
                monotone: true,
                injective_on_grid: true
            }]
        );
        assert!(screen.chain_consistent);
    }

    #[test]
    fn step_solution_is_not_injective() {
        let inst = make_theorem1(
            &Theorem1Solution::S0Positive {
                s0: 1.0,
                a: MagmaElement::Real(5.0),
            },
            &MagmaOps::reals(),
        )
        .unwrap();
        let f = |s: f64| match inst.f(&s) {
            MagmaElement::Real(x) => x,
            _ => unreachable!(),
        };
        let r = probe_regularity(&f, &grid(12, 0.25), &DEFAULT_RC_STEPS);
        assert!(r.right_continuous);
        assert!(r.monotone);
        assert!(!r.injective_on_grid);
    }

    #[test]
    fn left_jump_is_not_right_continuous() {
        let f = |s: f64| if s <= 1.0 { 0.0 } else { 1.0 };
        let r = probe_regularity(&f, &[0.5, 1.0], &DEFAULT_RC_STEPS);
        assert!(!r.right_continuous);
    }

    #[test]
    fn sine_fails_the_residual() {
        let inst = CgsInstance::new(
            "sin",
            EquationForm::Rew,
            Domain::HalfLine,
            MagmaOps::reals(),
            |s: &f64| MagmaElement::Real(s.sin()),
            |_: &f64| 1.0,
        );
        let h = std::f64::consts::FRAC_PI_2;
        let pts = vec![0.0, h, 2.0 * h];
        let screen = screen_candidate(&inst, &pair_grid(&pts, &pts), &pts, 1e-10).unwrap();
        assert!(screen.flagged);
        assert!(screen.residual.max_residual > 1.0);
        assert!(!screen.regularity[0].monotone);
    }

    #[test]
    fn fabricated_pair_is_flagged_twice() {
        let inst = CgsInstance::new(
            "s with g=0.5",
            EquationForm::Rew,
            Domain::HalfLine,
            MagmaOps::reals(),
            |s: &f64| MagmaElement::Real(*s),
            |_: &f64| 0.5,
        );
        assert!(!probe_g_lower_bound(&inst, &[0.0, 1.0]).unwrap());
        let r = inst.residual_at(&1.0, &1.0).unwrap();
        assert_eq!(r, 0.5);
        let pts = grid(5, 1.0);
        let screen = screen_candidate(&inst, &pair_grid(&pts, &pts), &pts, 1e-10).unwrap();
        assert!(screen.flagged && !screen.g_lower_bound && !screen.residual.passed);
    }

    #[test]
    fn kernel_probe_finds_zeros() {
        let inst = make_theorem1(
            &Theorem1Solution::S0Positive {
                s0: 1.0,
                a: MagmaElement::Real(5.0),
            },
            &MagmaOps::reals(),
        )
        .unwrap();
        let k = kernel_probe(&inst, &[0.0, 0.5, 1.0, 2.0]).unwrap();
        assert!(!k.empty);
        assert_eq!(k.zeros, vec![vec![1.0], vec![2.0]]);
        assert!(probe_g_lower_bound(&inst, &[0.0]).is_err());
    }

    #[test]
    fn vector_coordinates_are_probed_separately() {
        let f = |s: f64| vec![s.ln_1p(), 0.0];
        let r = probe_regularity_components(&f, 2, &grid(5, 1.0), &DEFAULT_RC_STEPS);
        assert!(r[0].injective_on_grid);
        assert!(!r[1].injective_on_grid);
    }
}
