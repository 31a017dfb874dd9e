//! Exact computation of `A(q, δ)`, the number of integers `a` in `[0, q]` with
//! `‖q f1(a/q)‖ < δ` and `‖q f2(a/q)‖ < δ`, and of the points lying exactly on
//! the dilated curve.
//!
//! The floating path reports a certainty interval: an `a` whose distances are
//! within the guard band of `δ` is neither counted in nor out. The exact path
//! works with integer numerators over the common denominator `D q^(deg-1)`.

use std::time::Instant;

use rayon::prelude::*;

use crate::curves::{frac_dist_lt_exact, frac_dist_lt_i128, is_integer_ratio, MongeCurve3, RatPoly};
use crate::error::{arg, Error, Result};
use crate::numeric::dist_to_int_dd;

/// Work unit for the parallel scan over `a`.
pub const CHUNK: u64 = 1 << 16;

/// Half-width of the uncertainty band around `δ` for the floating path.
pub fn guard_band(q: u64) -> f64 {
    1e-9 * q.max(1000) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountResult {
    pub q: u64,
    pub delta: f64,
    pub count_lo: u64,
    pub count_hi: u64,
    /// Values of `a` whose membership the guard band could not decide.
    pub uncertain: u64,
    pub elapsed_ms: f64,
    /// Produced by the exact rational path.
    pub exact: bool,
}

/// Three-way membership test against the guard band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    In,
    Out,
    Uncertain,
}

impl Membership {
    /// Classifies the distances `‖·‖` of both coordinates against `δ ± eps`.
    #[inline]
    pub fn of(dists: [f64; 2], delta: f64, eps: f64) -> Self {
        if dists.iter().any(|&d| d > delta + eps) {
            Membership::Out
        } else if dists.iter().all(|&d| d < delta - eps) {
            Membership::In
        } else {
            Membership::Uncertain
        }
    }
}

/// `(definitely in, uncertain)` tallies; integer sums so any reduction order
/// gives the same answer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Tally {
    pub inside: u64,
    pub uncertain: u64,
}

impl Tally {
    pub fn add(self, o: Tally) -> Tally {
        Tally { inside: self.inside + o.inside, uncertain: self.uncertain + o.uncertain }
    }

    pub fn push(&mut self, m: Membership) {
        match m {
            Membership::In => self.inside += 1,
            Membership::Uncertain => self.uncertain += 1,
            Membership::Out => {}
        }
    }
}

pub(crate) fn check_args(q: u64, delta: f64) -> Result<()> {
    if q == 0 {
        return arg("q must be positive");
    }
    if !(delta > 0.0 && delta < 0.5) {
        return arg(format!("delta = {delta} must lie in (0, 1/2)"));
    }
    Ok(())
}

/// The integers `a` with `a/q` in the curve's domain.
fn a_range(curve: &MongeCurve3, q: u64) -> (u64, u64) {
    let qf = q as f64;
    let lo = (curve.domain.lo * qf).ceil().max(0.0) as u64;
    let hi = ((curve.domain.hi * qf).floor() as u64).min(q);
    (lo, hi)
}

/// Parallel fold over `lo..=hi` in fixed chunks.
pub(crate) fn chunked_tally<F>(lo: u64, hi: u64, per_a: F) -> Tally
where
    F: Fn(u64) -> Membership + Sync,
{
    if hi < lo {
        return Tally::default();
    }
    let n = hi - lo + 1;
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = lo + c * CHUNK;
            let end = (start + CHUNK - 1).min(hi);
            let mut t = Tally::default();
            for a in start..=end {
                t.push(per_a(a));
            }
            t
        })
        .reduce(Tally::default, Tally::add)
}

/// `A(q, δ)` by the floating path.
pub fn count_near(curve: &MongeCurve3, q: u64, delta: f64) -> Result<CountResult> {
    check_args(q, delta)?;
    let start = Instant::now();
    let eps = guard_band(q);
    let qf = q as f64;
    let [f1, f2] = [curve.component(crate::Component::F1), curve.component(crate::Component::F2)];
    let (lo, hi) = a_range(curve, q);
    let tally = chunked_tally(lo, hi, |a| {
        let af = a as f64;
        let (h1, l1) = f1.scaled(af, qf);
        let d1 = dist_to_int_dd(h1, l1);
        if d1 > delta + eps {
            return Membership::Out;
        }
        let (h2, l2) = f2.scaled(af, qf);
        Membership::of([d1, dist_to_int_dd(h2, l2)], delta, eps)
    });
    Ok(CountResult {
        q,
        delta,
        count_lo: tally.inside,
        count_hi: tally.inside + tally.uncertain,
        uncertain: tally.uncertain,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        exact: false,
    })
}

fn exact_below(p: &RatPoly, a: u64, q: u64, delta: f64) -> bool {
    match p.scaled_exact_i128(a, q) {
        Some((n, d)) => frac_dist_lt_i128(n, d, delta),
        None => {
            let (n, d) = p.scaled_exact_big(a, q);
            frac_dist_lt_exact(&n, &d, delta)
        }
    }
}

fn require_coeffs(curve: &MongeCurve3) -> Result<&[RatPoly; 2]> {
    curve.coeff_form().ok_or_else(|| {
        Error::Unsupported(format!("curve `{}` has no exact coefficient form", curve.id))
    })
}

/// `A(q, δ)` by exact rational arithmetic; `count_lo == count_hi`.
pub fn count_near_exact(curve: &MongeCurve3, q: u64, delta: f64) -> Result<CountResult> {
    check_args(q, delta)?;
    let [p1, p2] = require_coeffs(curve)?;
    let start = Instant::now();
    let (lo, hi) = a_range(curve, q);
    let tally = chunked_tally(lo, hi, |a| {
        if exact_below(p1, a, q, delta) && exact_below(p2, a, q, delta) {
            Membership::In
        } else {
            Membership::Out
        }
    });
    Ok(CountResult {
        q,
        delta,
        count_lo: tally.inside,
        count_hi: tally.inside,
        uncertain: 0,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        exact: true,
    })
}

fn exactly_integral(p: &RatPoly, a: u64, q: u64) -> bool {
    match p.scaled_exact_i128(a, q) {
        Some((n, d)) => n.rem_euclid(d) == 0,
        None => {
            let (n, d) = p.scaled_exact_big(a, q);
            is_integer_ratio(&n, &d)
        }
    }
}

/// Number of `a` in `[0, q]` with `q f1(a/q)` and `q f2(a/q)` both integers.
pub fn count_on_curve(curve: &MongeCurve3, q: u64) -> Result<u64> {
    if q == 0 {
        return arg("q must be positive");
    }
    let [p1, p2] = require_coeffs(curve)?;
    let (lo, hi) = a_range(curve, q);
    let t = chunked_tally(lo, hi, |a| {
        if exactly_integral(p1, a, q) && exactly_integral(p2, a, q) {
            Membership::In
        } else {
            Membership::Out
        }
    });
    Ok(t.inside)
}
