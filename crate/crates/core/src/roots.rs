//! Bracketing root finders for monotone scalar functions.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("function returned a non-finite value at x = {0}")]
    NotFinite(f64),
}

pub const DEFAULT_MAX_ITER: usize = 200;

/// Bisection on `[lo, hi]` for a function that changes sign across the
/// interval. Iterates until the bracket cannot shrink further in `f64` or
/// `max_iter` halvings have been done, and returns whichever endpoint has the
/// smaller `|f|`.
pub fn bisect<F>(f: F, lo: f64, hi: f64, max_iter: usize) -> Result<f64, RootError>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    for (x, fx) in [(a, fa), (b, fb)] {
        if !fx.is_finite() {
            return Err(RootError::NotFinite(x));
        }
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoBracket {
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }
    for _ in 0..max_iter {
        let mid = a + 0.5 * (b - a);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if !fm.is_finite() {
            return Err(RootError::NotFinite(mid));
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

/// Every root found by scanning `n_scan` equal cells of `[lo, hi]` for sign
/// changes and bisecting each one. Roots are returned in increasing order.
pub fn find_all_roots<F>(f: F, lo: f64, hi: f64, n_scan: usize, max_iter: usize) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    let n = n_scan.max(1);
    let xs: Vec<f64> = (0..=n)
        .map(|i| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 })
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for i in 0..n {
        let (fa, fb) = (fs[i], fs[i + 1]);
        if !fa.is_finite() || !fb.is_finite() {
            continue;
        }
        if fa == 0.0 {
            roots.push(xs[i]);
            continue;
        }
        if i + 1 == n && fb == 0.0 {
            roots.push(xs[i + 1]);
            continue;
        }
        if fb != 0.0 && fa.signum() != fb.signum() {
            if let Ok(r) = bisect(&f, xs[i], xs[i + 1], max_iter) {
                roots.push(r);
            }
        }
    }
    roots
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section_min<F>(f: F, lo: f64, hi: f64, iters: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}
