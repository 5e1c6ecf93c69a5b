use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::CgsError;

const MAX_GRID_POINTS: usize = 1_000_000;

/// `start:stop:step`, inclusive of `stop` when it lies on the lattice.
///
/// The bounds are kept as text so the same spec can produce either `f64`
/// values or exact rationals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GridSpec {
    start: String,
    stop: String,
    step: String,
}

impl GridSpec {
    pub fn values_rational(&self) -> Result<Vec<Rational64>, CgsError> {
        let start = parse_rational(&self.start)?;
        let stop = parse_rational(&self.stop)?;
        let step = parse_rational(&self.step)?;
        let n = ((stop - start) / step)
            .floor()
            .to_integer()
            .checked_add(1)
            .filter(|n| *n > 0 && (*n as usize) <= MAX_GRID_POINTS)
            .ok_or_else(|| CgsError::Grid(format!("grid `{self}` has no points or too many")))?;
        Ok((0..n).map(|i| start + step * Rational64::from_integer(i)).collect())
    }

    pub fn values_f64(&self) -> Result<Vec<f64>, CgsError> {
        Ok(self
            .values_rational()?
            .iter()
            .map(|r| r.to_f64().unwrap_or(f64::NAN))
            .collect())
    }
}

impl FromStr for GridSpec {
    type Err = CgsError;

    fn from_str(s: &str) -> Result<Self, CgsError> {
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        let [start, stop, step] = parts[..] else {
            return Err(CgsError::Grid(format!("expected start:stop:step, got `{s}`")));
        };
        let spec = GridSpec {
            start: start.to_owned(),
            stop: stop.to_owned(),
            step: step.to_owned(),
        };
        let (a, b, h) = (
            parse_rational(start)?,
            parse_rational(stop)?,
            parse_rational(step)?,
        );
        if h <= Rational64::zero() {
            return Err(CgsError::Grid(format!("step must be positive in `{s}`")));
        }
        if b < a {
            return Err(CgsError::Grid(format!("stop precedes start in `{s}`")));
        }
        Ok(spec)
    }
}

impl TryFrom<String> for GridSpec {
    type Error = CgsError;
    fn try_from(s: String) -> Result<Self, CgsError> {
        s.parse()
    }
}

impl From<GridSpec> for String {
    fn from(g: GridSpec) -> String {
        g.to_string()
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

/// Exact value of a decimal literal (`-1.25`, `3`) or a fraction (`2/3`).
pub fn parse_rational(s: &str) -> Result<Rational64, CgsError> {
    let bad = || CgsError::Grid(format!("`{s}` is not a decimal number or fraction"));
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(n, d));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: i64 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    let denom = 10i64.checked_pow(frac_part.len() as u32).ok_or_else(bad)?;
    let r = Rational64::new(numer, denom);
    Ok(if negative { -r } else { r })
}

/// Cartesian product `s_values × t_values` in row-major order.
pub fn pair_grid<P: Clone>(s_values: &[P], t_values: &[P]) -> Vec<(P, P)> {
    s_values
        .iter()
        .flat_map(|s| t_values.iter().map(move |t| (s.clone(), t.clone())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.25").unwrap(), Rational64::new(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), Rational64::new(-3, 2));
        assert_eq!(parse_rational("3").unwrap(), Rational64::from_integer(3));
        assert_eq!(parse_rational(".5").unwrap(), Rational64::new(1, 2));
        assert_eq!(parse_rational("2/6").unwrap(), Rational64::new(1, 3));
        for bad in ["", "-", "1e3", "a", "1/0", "1.2.3"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn grid_values() {
        let g: GridSpec = "0:10:0.5".parse().unwrap();
        let v = g.values_f64().unwrap();
        assert_eq!(v.len(), 21);
        assert_eq!(v[20], 10.0);
        let g: GridSpec = "0:1:0.3".parse().unwrap();
        assert_eq!(g.values_rational().unwrap().len(), 4);
        assert!("0:1".parse::<GridSpec>().is_err());
        assert!("0:1:0".parse::<GridSpec>().is_err());
        assert!("1:0:0.1".parse::<GridSpec>().is_err());
        assert_eq!(g.to_string(), "0:1:0.3");
    }

    #[test]
    fn pairs_are_row_major() {
        let p = pair_grid(&[1, 2], &[3, 4]);
        assert_eq!(p, vec![(1, 3), (1, 4), (2, 3), (2, 4)]);
    }
}
