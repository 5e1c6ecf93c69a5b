//! On a vector space the only solutions of (rew) with `f ≢ 0` are additive
//! `f` with `g ≡ 1`. The falsifier searches for a concrete violating pair.

use serde::{Deserialize, Serialize};

use super::{CgsError, CgsInstance, Domain, DomainPoint, EquationForm};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// `t = s/(1 - g(s))` makes `s + g(s)t = t`, so (rew) forces `f(s) = 0`.
    ForcedZero,
    /// `t = u/(g(s) - 1)` with `f(u) ≠ 0`: additivity would give
    /// `f(s + g(s)t) = f(s) + f(t) + f(u)`.
    CauchyChain,
    /// The worst pair of the supplied grid.
    GridResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub residual: f64,
    pub construction: WitnessKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RigidityVerdict {
    /// `g ≡ 1` and `f` additive on the grid.
    ConsistentSolution { residual: f64, max_g_deviation: f64 },
    Falsified(Witness),
    /// `g` deviates from 1 but no violating pair was found.
    Inconclusive { reason: String },
}

impl RigidityVerdict {
    pub fn is_falsified(&self) -> bool {
        matches!(self, RigidityVerdict::Falsified(_))
    }

    pub fn is_consistent(&self) -> bool {
        matches!(self, RigidityVerdict::ConsistentSolution { .. })
    }
}

/// The lattice `{-extent, …, extent}^d` with `n` points per axis.
pub fn symmetric_grid(dim: usize, extent: f64, n: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| -extent + 2.0 * extent * i as f64 / (n - 1) as f64)
            .collect(),
    };
    // Mirror the lower half so the grid is symmetric to the bit.
    let axis: Vec<f64> = (0..axis.len())
        .map(|i| if 2 * i + 1 > axis.len() { -axis[axis.len() - 1 - i] } else { axis[i] })
        .collect();
    let mut out: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |a| {
                    let mut q = p.clone();
                    q.push(*a);
                    q
                })
            })
            .collect();
    }
    if dim == 0 {
        out.clear();
    }
    out
}

fn is_symmetric(grid: &[Vec<f64>]) -> bool {
    grid.iter().all(|p| {
        grid.iter().any(|q| {
            p.len() == q.len() && p.iter().zip(q).all(|(a, b)| (a + b).abs() <= SYMMETRY_TOL)
        })
    })
}

/// Test a (rew) candidate on `R^d`, `d ∈ {1, 2}`, against rigidity.
///
/// `grid` must be symmetric about the origin. Constructed witnesses are tried
/// first; points with `|g(s) - 1| <= tol` are skipped for those. If none
/// violates the equation by more than `tol`, the worst grid pair is used.
pub fn vector_space_rigidity_falsifier(
    inst: &CgsInstance<Vec<f64>>,
    grid: &[Vec<f64>],
    tol: f64,
) -> Result<RigidityVerdict, CgsError> {
    let d = match inst.domain() {
        Domain::VectorSpace(d @ (1 | 2)) => d,
        other => {
            return Err(CgsError::InvalidParameters(format!(
                "rigidity needs R^1 or R^2, got {other}"
            )))
        }
    };
    if inst.form() != EquationForm::Rew {
        return Err(CgsError::WrongForm {
            expected: EquationForm::Rew,
        });
    }
    if grid.is_empty() {
        return Err(CgsError::Grid("empty grid".into()));
    }
    if let Some(p) = grid.iter().find(|p| p.dim() != d) {
        return Err(CgsError::Domain {
            point: format!("{p:?}"),
            domain: inst.domain().to_string(),
        });
    }
    if !is_symmetric(grid) {
        return Err(CgsError::Grid("grid is not symmetric about the origin".into()));
    }
    let magma = inst.magma();
    if grid.iter().all(|p| magma.is_identity(&inst.f(p), 0.0)) {
        return Err(CgsError::TrivialF);
    }

    let g: Vec<f64> = grid.iter().map(|p| inst.side(p)).collect::<Result<_, _>>()?;
    let max_g_deviation = g.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);

    let mut worst = (0.0, 0usize, 0usize);
    for (i, s) in grid.iter().enumerate() {
        for (j, t) in grid.iter().enumerate() {
            let r = inst.residual_at(s, t)?;
            if r > worst.0 || r.is_nan() && !worst.0.is_nan() {
                worst = (r, i, j);
            }
        }
    }
    let residual = worst.0;
    if residual <= tol && max_g_deviation <= tol {
        return Ok(RigidityVerdict::ConsistentSolution {
            residual,
            max_g_deviation,
        });
    }

    let nonzero: Vec<&Vec<f64>> = grid
        .iter()
        .filter(|u| !magma.is_identity(&inst.f(u), tol))
        .collect();
    for (s, gs) in grid.iter().zip(&g) {
        if (gs - 1.0).abs() <= tol {
            continue;
        }
        let t = s.scale(&(1.0 / (1.0 - gs)));
        let r = inst.residual_at(s, &t)?;
        if r > tol {
            return Ok(RigidityVerdict::Falsified(Witness {
                s: s.clone(),
                t,
                residual: r,
                construction: WitnessKind::ForcedZero,
            }));
        }
        for u in &nonzero {
            let t = u.scale(&(1.0 / (gs - 1.0)));
            let r = inst.residual_at(s, &t)?;
            if r > tol {
                return Ok(RigidityVerdict::Falsified(Witness {
                    s: s.clone(),
                    t,
                    residual: r,
                    construction: WitnessKind::CauchyChain,
                }));
            }
        }
    }

    if residual > tol {
        return Ok(RigidityVerdict::Falsified(Witness {
            s: grid[worst.1].clone(),
            t: grid[worst.2].clone(),
            residual,
            construction: WitnessKind::GridResidual,
        }));
    }
    Ok(RigidityVerdict::Inconclusive {
        reason: format!(
            "max |g - 1| = {max_g_deviation} but no pair exceeded tolerance {tol}"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magma::{MagmaElement, MagmaOps};

    fn linear(a: [f64; 2], g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> CgsInstance<Vec<f64>> {
        CgsInstance::new(
            "candidate",
            EquationForm::Rew,
            Domain::VectorSpace(2),
            MagmaOps::reals(),
            move |v: &Vec<f64>| MagmaElement::Real(a[0] * v[0] + a[1] * v[1]),
            move |v: &Vec<f64>| g(v),
        )
    }

    #[test]
    fn symmetric_grid_shape() {
        let g = symmetric_grid(2, 2.0, 5);
        assert_eq!(g.len(), 25);
        assert!(is_symmetric(&g));
        assert!(g.contains(&vec![0.0, 0.0]));
        let odd = symmetric_grid(1, 1.0, 4);
        assert!(is_symmetric(&odd));
    }

    #[test]
    fn additive_with_unit_g_is_consistent() {
        let inst = linear([1.0, 2.0], |_| 1.0);
        let v = vector_space_rigidity_falsifier(&inst, &symmetric_grid(2, 2.0, 5), 1e-10).unwrap();
        assert!(v.is_consistent(), "{v:?}");
    }

    #[test]
    fn non_constant_g_is_falsified() {
        let inst = linear([1.0, 2.0], |v| 1.0 + v[0]);
        let v = vector_space_rigidity_falsifier(&inst, &symmetric_grid(2, 2.0, 5), 1e-10).unwrap();
        let RigidityVerdict::Falsified(w) = v else { panic!("{v:?}") };
        assert!(w.residual > 1e-10);
        assert_eq!(w.construction, WitnessKind::ForcedZero);
        // s₁ ⟨a, t⟩ by direct expansion
        let expected = (w.s[0] * (w.t[0] + 2.0 * w.t[1])).abs();
        assert!((w.residual - expected).abs() <= 1e-9 * expected.max(1.0));
    }

    #[test]
    fn cauchy_chain_when_f_vanishes_off_the_unit_set() {
        // f(v) = v₂ and g(v) = 1 + v₁: on the axis v₂ = 0 the forced zero holds.
        let inst = linear([0.0, 1.0], |v| 1.0 + v[0]);
        let grid = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let v = vector_space_rigidity_falsifier(&inst, &grid, 1e-10).unwrap();
        let RigidityVerdict::Falsified(w) = v else { panic!("{v:?}") };
        assert_eq!(w.construction, WitnessKind::CauchyChain);
    }

    #[test]
    fn rejects_bad_inputs() {
        let zero = CgsInstance::new(
            "zero",
            EquationForm::Rew,
            Domain::VectorSpace(2),
            MagmaOps::reals(),
            |_: &Vec<f64>| MagmaElement::Real(0.0),
            |_: &Vec<f64>| 1.0,
        );
        let grid = symmetric_grid(2, 1.0, 3);
        assert!(matches!(
            vector_space_rigidity_falsifier(&zero, &grid, 1e-10),
            Err(CgsError::TrivialF)
        ));
        let inst = linear([1.0, 2.0], |_| 1.0);
        let half = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        assert!(matches!(
            vector_space_rigidity_falsifier(&inst, &half, 1e-10),
            Err(CgsError::Grid(_))
        ));
    }
}
