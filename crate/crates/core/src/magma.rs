//! Unital magmas with two-sided cancellation.
//!
//! The functional equations in [`crate::cgs`] take values in an abstract
//! magma `(M, +)` with a neutral element `0`. Four concrete carriers are
//! shipped: `(R, +)`, `(Q, +)`, `(R^d, +)` and `(Σ*, concat)`. Words are the
//! only non-commutative instance. Custom operations (for example `min`, which
//! is *not* cancellative) can be assembled with [`MagmaOps::custom`] for
//! negative tests.
//!
//! Rational and word elements compare exactly. Real scalars and vectors
//! compare with a caller-supplied absolute tolerance.

use std::fmt;
use std::sync::Arc;

use num_rational::Rational64;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MagmaError {
    #[error("element of carrier {found} passed to magma `{magma}` over {expected}")]
    Mismatch {
        magma: String,
        expected: Carrier,
        found: Carrier,
    },
    #[error("cannot scale a {0} element by a real number")]
    NotScalable(Carrier),
    #[error("unknown magma `{0}` (expected reals, rationals, vec<d> or words)")]
    UnknownName(String),
}

/// The set an element lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Carrier {
    Real,
    Rational,
    Vector(usize),
    Word,
}

impl fmt::Display for Carrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Carrier::Real => write!(f, "reals"),
            Carrier::Rational => write!(f, "rationals"),
            Carrier::Vector(d) => write!(f, "vec{d}"),
            Carrier::Word => write!(f, "words"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MagmaElement {
    Real(f64),
    Rational(Rational64),
    Vector(Vec<f64>),
    Word(String),
}

impl MagmaElement {
    pub fn carrier(&self) -> Carrier {
        match self {
            MagmaElement::Real(_) => Carrier::Real,
            MagmaElement::Rational(_) => Carrier::Rational,
            MagmaElement::Vector(v) => Carrier::Vector(v.len()),
            MagmaElement::Word(_) => Carrier::Word,
        }
    }

    pub fn word(s: &str) -> Self {
        MagmaElement::Word(s.to_owned())
    }

    /// Whether this element compares exactly (no tolerance).
    pub fn is_exact(&self) -> bool {
        matches!(self, MagmaElement::Rational(_) | MagmaElement::Word(_))
    }

    /// `c · self` for real scalars and vectors.
    pub fn scaled(&self, c: f64) -> Result<MagmaElement, MagmaError> {
        match self {
            MagmaElement::Real(x) => Ok(MagmaElement::Real(c * x)),
            MagmaElement::Vector(v) => Ok(MagmaElement::Vector(v.iter().map(|x| c * x).collect())),
            other => Err(MagmaError::NotScalable(other.carrier())),
        }
    }

    /// Coordinates of a numeric element viewed as a point of `R^d`.
    pub fn coordinates(&self) -> Option<Vec<f64>> {
        match self {
            MagmaElement::Real(x) => Some(vec![*x]),
            MagmaElement::Rational(r) => Some(vec![ratio_to_f64(r)]),
            MagmaElement::Vector(v) => Some(v.clone()),
            MagmaElement::Word(_) => None,
        }
    }
}

impl fmt::Display for MagmaElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MagmaElement::Real(x) => write!(f, "{x}"),
            MagmaElement::Rational(r) => write!(f, "{r}"),
            MagmaElement::Vector(v) => {
                write!(f, "(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
            MagmaElement::Word(w) => write!(f, "{w:?}"),
        }
    }
}

pub(crate) fn ratio_to_f64(r: &Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Mismatch between two elements of the same carrier: absolute difference for
/// real scalars, max-norm for vectors, and a 0/1 indicator for exact carriers.
pub fn distance(a: &MagmaElement, b: &MagmaElement) -> Result<f64, MagmaError> {
    match (a, b) {
        (MagmaElement::Real(x), MagmaElement::Real(y)) => Ok((x - y).abs()),
        (MagmaElement::Rational(x), MagmaElement::Rational(y)) => {
            Ok(if x == y { 0.0 } else { 1.0 })
        }
        (MagmaElement::Vector(x), MagmaElement::Vector(y)) if x.len() == y.len() => Ok(x
            .iter()
            .zip(y)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)),
        (MagmaElement::Word(x), MagmaElement::Word(y)) => Ok(if x == y { 0.0 } else { 1.0 }),
        _ => Err(MagmaError::Mismatch {
            magma: "distance".into(),
            expected: a.carrier(),
            found: b.carrier(),
        }),
    }
}

/// Equality with tolerance `tol` for real carriers and exact equality otherwise.
pub fn approx_eq(a: &MagmaElement, b: &MagmaElement, tol: f64) -> bool {
    match distance(a, b) {
        Ok(d) if a.is_exact() => d == 0.0,
        Ok(d) => d <= tol,
        Err(_) => false,
    }
}

pub type BinaryOp = Arc<dyn Fn(&MagmaElement, &MagmaElement) -> MagmaElement + Send + Sync>;

#[derive(Clone)]
enum OpKind {
    Add,
    Concat,
    Custom(BinaryOp),
}

/// A unital magma: carrier, operation, neutral element, commutativity flag.
#[derive(Clone)]
pub struct MagmaOps {
    name: String,
    carrier: Carrier,
    op: OpKind,
    identity: MagmaElement,
    commutative: bool,
}

impl fmt::Debug for MagmaOps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MagmaOps")
            .field("name", &self.name)
            .field("carrier", &self.carrier)
            .field("identity", &self.identity)
            .field("commutative", &self.commutative)
            .finish()
    }
}

impl MagmaOps {
    pub fn reals() -> Self {
        MagmaOps {
            name: "reals".into(),
            carrier: Carrier::Real,
            op: OpKind::Add,
            identity: MagmaElement::Real(0.0),
            commutative: true,
        }
    }

    pub fn rationals() -> Self {
        MagmaOps {
            name: "rationals".into(),
            carrier: Carrier::Rational,
            op: OpKind::Add,
            identity: MagmaElement::Rational(Rational64::zero()),
            commutative: true,
        }
    }

    pub fn vectors(dim: usize) -> Self {
        MagmaOps {
            name: format!("vec{dim}"),
            carrier: Carrier::Vector(dim),
            op: OpKind::Add,
            identity: MagmaElement::Vector(vec![0.0; dim]),
            commutative: true,
        }
    }

    pub fn words() -> Self {
        MagmaOps {
            name: "words".into(),
            carrier: Carrier::Word,
            op: OpKind::Concat,
            identity: MagmaElement::Word(String::new()),
            commutative: false,
        }
    }

    /// Arbitrary operation over one of the known carriers. The caller is
    /// responsible for `op` being closed on `carrier`.
    pub fn custom(
        name: impl Into<String>,
        carrier: Carrier,
        identity: MagmaElement,
        commutative: bool,
        op: impl Fn(&MagmaElement, &MagmaElement) -> MagmaElement + Send + Sync + 'static,
    ) -> Self {
        MagmaOps {
            name: name.into(),
            carrier,
            op: OpKind::Custom(Arc::new(op)),
            identity,
            commutative,
        }
    }

    /// Look up a shipped instance by its CLI identifier:
    /// `reals`, `rationals`, `vec<d>` (e.g. `vec2`) or `words`.
    pub fn from_name(name: &str) -> Result<Self, MagmaError> {
        match name {
            "reals" => Ok(Self::reals()),
            "rationals" => Ok(Self::rationals()),
            "words" => Ok(Self::words()),
            other => other
                .strip_prefix("vec")
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|&d| d > 0)
                .map(Self::vectors)
                .ok_or_else(|| MagmaError::UnknownName(other.to_owned())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn carrier(&self) -> Carrier {
        self.carrier
    }

    pub fn identity(&self) -> &MagmaElement {
        &self.identity
    }

    pub fn is_commutative(&self) -> bool {
        self.commutative
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.carrier, Carrier::Rational | Carrier::Word)
    }

    pub fn contains(&self, x: &MagmaElement) -> bool {
        x.carrier() == self.carrier
    }

    fn ensure_member(&self, x: &MagmaElement) -> Result<(), MagmaError> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(MagmaError::Mismatch {
                magma: self.name.clone(),
                expected: self.carrier,
                found: x.carrier(),
            })
        }
    }

    /// `x + y` in this magma.
    pub fn op(&self, x: &MagmaElement, y: &MagmaElement) -> Result<MagmaElement, MagmaError> {
        self.ensure_member(x)?;
        self.ensure_member(y)?;
        let z = match (&self.op, x, y) {
            (OpKind::Custom(op), _, _) => op(x, y),
            (OpKind::Add, MagmaElement::Real(a), MagmaElement::Real(b)) => MagmaElement::Real(a + b),
            (OpKind::Add, MagmaElement::Rational(a), MagmaElement::Rational(b)) => {
                MagmaElement::Rational(a + b)
            }
            (OpKind::Add, MagmaElement::Vector(a), MagmaElement::Vector(b)) => {
                MagmaElement::Vector(a.iter().zip(b).map(|(p, q)| p + q).collect())
            }
            (_, MagmaElement::Word(a), MagmaElement::Word(b)) => {
                let mut w = String::with_capacity(a.len() + b.len());
                w.push_str(a);
                w.push_str(b);
                MagmaElement::Word(w)
            }
            // Add over words and Concat over numbers are never constructed.
            (_, a, _) => {
                return Err(MagmaError::Mismatch {
                    magma: self.name.clone(),
                    expected: self.carrier,
                    found: a.carrier(),
                })
            }
        };
        Ok(z)
    }

    pub fn eq(&self, x: &MagmaElement, y: &MagmaElement, tol: f64) -> bool {
        approx_eq(x, y, tol)
    }

    pub fn is_identity(&self, x: &MagmaElement, tol: f64) -> bool {
        approx_eq(x, &self.identity, tol)
    }

    /// Both cancellation laws on every triple drawn from `samples`:
    /// `a+x = a+y ⇒ x = y` and `x+a = y+a ⇒ x = y`.
    pub fn check_cancellation(&self, samples: &[MagmaElement], tol: f64) -> bool {
        for a in samples {
            for x in samples {
                for y in samples {
                    if self.eq(x, y, tol) {
                        continue;
                    }
                    let left = match (self.op(a, x), self.op(a, y)) {
                        (Ok(ax), Ok(ay)) => self.eq(&ax, &ay, tol),
                        _ => return false,
                    };
                    let right = match (self.op(x, a), self.op(y, a)) {
                        (Ok(xa), Ok(ya)) => self.eq(&xa, &ya, tol),
                        _ => return false,
                    };
                    if left || right {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// `0 + x = x + 0 = x` on every sample.
    pub fn check_identity(&self, samples: &[MagmaElement], tol: f64) -> bool {
        samples.iter().all(|x| {
            matches!(self.op(&self.identity, x), Ok(ex) if self.eq(&ex, x, tol))
                && matches!(self.op(x, &self.identity), Ok(xe) if self.eq(&xe, x, tol))
        })
    }

    /// `x + y = y + x` on every sampled pair.
    pub fn check_commutativity(&self, samples: &[MagmaElement], tol: f64) -> bool {
        samples.iter().all(|x| {
            samples.iter().all(|y| match (self.op(x, y), self.op(y, x)) {
                (Ok(xy), Ok(yx)) => self.eq(&xy, &yx, tol),
                _ => false,
            })
        })
    }

    /// Draw `n` random elements of the carrier.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<MagmaElement> {
        (0..n).map(|_| random_element(self.carrier, rng)).collect()
    }
}

fn random_element<R: Rng + ?Sized>(carrier: Carrier, rng: &mut R) -> MagmaElement {
    match carrier {
        Carrier::Real => MagmaElement::Real(rng.random_range(-10.0..10.0)),
        Carrier::Rational => {
            let num: i64 = rng.random_range(-50..=50);
            let den: i64 = rng.random_range(1..=12);
            MagmaElement::Rational(Rational64::new(num, den))
        }
        Carrier::Vector(d) => {
            MagmaElement::Vector((0..d).map(|_| rng.random_range(-10.0..10.0)).collect())
        }
        Carrier::Word => {
            let len = rng.random_range(0..6);
            let w = (0..len)
                .map(|_| ['a', 'b', 'c'][rng.random_range(0..3)])
                .collect();
            MagmaElement::Word(w)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn op_examples() {
        let r = MagmaOps::reals();
        assert_eq!(
            r.op(&MagmaElement::Real(2.0), &MagmaElement::Real(3.0)).unwrap(),
            MagmaElement::Real(5.0)
        );
        let w = MagmaOps::words();
        assert_eq!(
            w.op(&MagmaElement::word("ab"), &MagmaElement::word("c")).unwrap(),
            MagmaElement::word("abc")
        );
        let v = MagmaOps::vectors(2);
        assert_eq!(
            v.op(
                &MagmaElement::Vector(vec![1.0, 0.0]),
                &MagmaElement::Vector(vec![0.0, 1.0])
            )
            .unwrap(),
            MagmaElement::Vector(vec![1.0, 1.0])
        );
    }

    #[test]
    fn mixed_instance_is_a_type_error() {
        let r = MagmaOps::reals();
        let err = r
            .op(&MagmaElement::Real(1.0), &MagmaElement::word("a"))
            .unwrap_err();
        assert!(matches!(err, MagmaError::Mismatch { found: Carrier::Word, .. }));
        let v = MagmaOps::vectors(2);
        assert!(v
            .op(&MagmaElement::Vector(vec![1.0]), &MagmaElement::Vector(vec![1.0, 2.0]))
            .is_err());
    }

    #[test]
    fn cancellation_examples() {
        let r = MagmaOps::reals();
        let s: Vec<_> = [0.0, 1.0, 2.0].into_iter().map(MagmaElement::Real).collect();
        assert!(r.check_cancellation(&s, 1e-12));

        // exhaustive triple oracle for words: a+x = a+y forces x = y by length
        // and prefix comparison, written here independently of MagmaOps.
        let words = ["", "a", "ab"];
        let mut oracle = true;
        for a in words {
            for x in words {
                for y in words {
                    if x != y && (format!("{a}{x}") == format!("{a}{y}") || format!("{x}{a}") == format!("{y}{a}")) {
                        oracle = false;
                    }
                }
            }
        }
        let w = MagmaOps::words();
        let ws: Vec<_> = words.iter().map(|s| MagmaElement::word(s)).collect();
        assert_eq!(w.check_cancellation(&ws, 0.0), oracle);
        assert!(oracle);

        let min = MagmaOps::custom(
            "min",
            Carrier::Real,
            MagmaElement::Real(f64::INFINITY),
            true,
            |x, y| match (x, y) {
                (MagmaElement::Real(a), MagmaElement::Real(b)) => MagmaElement::Real(a.min(*b)),
                _ => x.clone(),
            },
        );
        let s: Vec<_> = [0.0, 1.0].into_iter().map(MagmaElement::Real).collect();
        assert!(!min.check_cancellation(&s, 0.0));
    }

    #[test]
    fn shipped_instances_obey_laws_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
        for m in [
            MagmaOps::reals(),
            MagmaOps::rationals(),
            MagmaOps::vectors(2),
            MagmaOps::vectors(3),
            MagmaOps::words(),
        ] {
            let s = m.sample(50, &mut rng);
            assert!(m.check_cancellation(&s, 1e-9), "{}", m.name());
            // neutral law is exact, even for floats
            assert!(m.check_identity(&s, 0.0), "{}", m.name());
            if m.is_commutative() {
                assert!(m.check_commutativity(&s, 0.0), "{}", m.name());
            }
        }
    }

    #[test]
    fn commutativity_flags() {
        assert!(!MagmaOps::words().is_commutative());
        let w = MagmaOps::words();
        let s = vec![MagmaElement::word("a"), MagmaElement::word("b")];
        assert!(!w.check_commutativity(&s, 0.0));
        assert!(MagmaOps::reals().is_commutative());
        assert!(MagmaOps::rationals().is_commutative());
        assert!(MagmaOps::vectors(4).is_commutative());
    }

    #[test]
    fn names_round_trip() {
        for n in ["reals", "rationals", "vec2", "vec7", "words"] {
            assert_eq!(MagmaOps::from_name(n).unwrap().name(), n);
        }
        assert!(MagmaOps::from_name("vec0").is_err());
        assert!(MagmaOps::from_name("complex").is_err());
    }

    #[test]
    fn real_equality_uses_tolerance() {
        let a = MagmaElement::Real(1.0);
        let b = MagmaElement::Real(1.0 + 1e-13);
        assert!(approx_eq(&a, &b, 1e-12));
        assert!(!approx_eq(&a, &b, 0.0));
        let p = MagmaElement::Rational(Rational64::new(1, 3));
        let q = MagmaElement::Rational(Rational64::new(2, 6));
        assert!(approx_eq(&p, &q, 0.0));
    }
}
