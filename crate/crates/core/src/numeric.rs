//! Floating-point building blocks shared by the counting and measure code:
//! error-free transformations, distance to the nearest integer, root
//! bracketing on monotone functions and pairwise summation.

use crate::error::{Error, Result};

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::Argument(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `n` equispaced points including both endpoints.
    pub fn grid(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let n = n.max(2);
        let step = self.len() / (n - 1) as f64;
        (0..n).map(move |k| {
            if k == n - 1 {
                self.hi
            } else {
                self.lo + step * k as f64
            }
        })
    }
}

/// `a + b = s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// `a * b = p + e` exactly (requires a hardware fma for speed, correct either way).
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Distance from `t` to the nearest integer, `‖t‖`.
#[inline]
pub fn dist_to_int(t: f64) -> f64 {
    (t - t.round()).abs()
}

/// `‖hi + lo‖` for an unevaluated double-double sum.
#[inline]
pub fn dist_to_int_dd(hi: f64, lo: f64) -> f64 {
    // hi - round(hi) is exact for |hi| >= 1 (Sterbenz) and trivially for |hi| < 1.
    let r = hi - hi.round();
    dist_to_int(r + lo)
}

/// Compensated Horner evaluation; returns the result as an unevaluated sum.
pub fn comp_horner(coeffs: &[f64], x: f64) -> (f64, f64) {
    let Some((&last, rest)) = coeffs.split_last() else {
        return (0.0, 0.0);
    };
    let mut s = last;
    let mut c: f64 = 0.0;
    for &a in rest.iter().rev() {
        let (p, pe) = two_prod(s, x);
        let (t, se) = two_sum(p, a);
        s = t;
        c = c.mul_add(x, pe + se);
    }
    (s, c)
}

/// Sum in a balanced binary tree; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Root of a continuous function on `[lo, hi]` with a sign change, by bisection
/// to absolute width `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::Numeric(format!(
            "no sign change on [{lo}, {hi}]: f = {flo}, {fhi}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numeric("bisection did not converge".into()))
}

/// Solves `f(x) = y` for `f` increasing on `[lo, hi]` with `f(lo) <= y <= f(hi)`.
///
/// The bracket is maintained throughout; Newton steps are taken when they stay
/// inside it and bisection otherwise, so convergence never depends on `df`.
pub fn invert_increasing<F, D>(f: F, df: D, lo: f64, hi: f64, y: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    invert_increasing_from(f, df, lo, hi, y, None, tol)
}

/// [`invert_increasing`] starting Newton at `start` when it lies inside the
/// bracket, instead of at the secant point.
pub fn invert_increasing_from<F, D>(
    f: F,
    df: D,
    mut lo: f64,
    mut hi: f64,
    y: f64,
    start: Option<f64>,
    tol: f64,
) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let flo = f(lo) - y;
    let fhi = f(hi) - y;
    if flo >= 0.0 {
        return lo;
    }
    if fhi <= 0.0 {
        return hi;
    }
    let mut x = match start {
        Some(s) if s > lo && s < hi => s,
        _ => lo + (hi - lo) * (-flo / (fhi - flo)),
    };
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let fx = f(x) - y;
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= tol {
            break;
        }
        let d = df(x);
        let step = fx / d;
        let xn = x - step;
        if d > 0.0 && xn > lo && xn < hi {
            x = xn;
            if step.abs() <= 0.25 * tol {
                return x;
            }
        } else {
            x = 0.5 * (lo + hi);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dist_to_int_basics() {
        assert_eq!(dist_to_int(3.25), 0.25);
        assert_eq!(dist_to_int(-0.75), 0.25);
        assert_eq!(dist_to_int(7.0), 0.0);
        assert!((dist_to_int_dd(1e6, 0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn comp_horner_beats_cancellation() {
        // (x - 1)^3 expanded, evaluated near the triple root
        let c = [-1.0, 3.0, -3.0, 1.0];
        let x = 1.0 + 1e-5;
        let (hi, lo) = comp_horner(&c, x);
        let exact = 1e-15;
        assert!(((hi + lo) - exact).abs() < 1e-22);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-14).is_err());
    }

    #[test]
    fn invert_increasing_matches_closed_form() {
        for &y in &[0.0, 0.01, 0.5, 0.9, 1.0] {
            let x = invert_increasing(|x| x * x, |x| 2.0 * x, 0.0, 1.0, y, 1e-14);
            assert!((x - f64::sqrt(y)).abs() < 1e-12, "y = {y}: {x}");
        }
    }

    #[test]
    fn pairwise_is_order_dependent_only() {
        let xs: Vec<f64> = (0..1000).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        assert_eq!(pairwise_sum(&xs), pairwise_sum(&xs.clone()));
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }
}
