//! Measures of `{x in I : ‖j1 x + j2 f(x)‖ < λ}` and the frequency sum
//! `Σ_{0 < |(j1, j2)|_∞ <= J} |μ(j1, j2, λ)|`.
//!
//! `F = j1 x + j2 f` has `F'' = j2 f''` of constant sign, so `I` splits at the
//! critical point `x0` into at most two monotone pieces and each level
//! `F = p ± λ` has at most one root per piece.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::curves::{DualCurve, PlanarCurve};
use crate::error::{arg, Result};
use crate::numeric::{dist_to_int, invert_increasing_from, pairwise_sum, Interval};

/// Root tolerance for the level-set endpoints.
const ROOT_TOL: f64 = 1e-13;

/// Frequency classes: `Θ1` when `|j1| > 2M |j2|` (no critical point near
/// `I`), `Θ2` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theta {
    One,
    Two,
}

#[derive(Debug, Clone)]
pub struct LevelSetQuery {
    pub planar: PlanarCurve,
    pub j1: i64,
    pub j2: i64,
    pub lambda: f64,
    pub theta: Theta,
    /// `|p| <= C max(|j1|, |j2|)`.
    pub p_range: (i64, i64),
    /// Critical point `g(j1/j2)` of `F` on the extended curve (`Θ2` only).
    pub x0: Option<f64>,
    /// `F(x0)`, computed as `j2 f*(j1/j2)`.
    pub f_x0: Option<f64>,
    /// The integer with `-1/2 < F(x0) - p0 <= 1/2`.
    pub p0: Option<i64>,
}

impl LevelSetQuery {
    /// `F(x) = j1 x + j2 f(x)` on the extended curve.
    pub fn f(&self, x: f64) -> f64 {
        self.j1 as f64 * x + self.j2 as f64 * self.planar.eval(x, 0)
    }

    pub fn df(&self, x: f64) -> f64 {
        self.j1 as f64 + self.j2 as f64 * self.planar.eval(x, 1)
    }
}

/// `p0 = ⌈F - 1/2⌉`, so that `F - p0` lies in `(-1/2, 1/2]`.
pub fn nearest_p0(fx0: f64) -> i64 {
    (fx0 - 0.5).ceil() as i64
}

pub fn classify(planar: &PlanarCurve, j1: i64, j2: i64, lambda: f64) -> Result<LevelSetQuery> {
    let dual = DualCurve::new(planar)?;
    classify_with(&dual, j1, j2, lambda)
}

pub fn classify_with(dual: &DualCurve, j1: i64, j2: i64, lambda: f64) -> Result<LevelSetQuery> {
    if j1 == 0 && j2 == 0 {
        return arg("(j1, j2) must be nonzero");
    }
    if !(lambda > 0.0 && lambda < 0.5) {
        return arg(format!("lambda = {lambda} must lie in (0, 1/2)"));
    }
    let planar = dual.base.clone();
    let big = j1.abs().max(j2.abs()) as f64;
    let pmax = (dual.c * big).floor() as i64;
    let theta = if (j1.abs() as f64) > 2.0 * planar.m * j2.abs() as f64 {
        Theta::One
    } else {
        Theta::Two
    };
    let (x0, f_x0, p0) = match theta {
        Theta::One => (None, None, None),
        Theta::Two => {
            let y = j1 as f64 / j2 as f64;
            let x0 = dual.g(y)?;
            let fx0 = j2 as f64 * dual.fstar(y)?;
            (Some(x0), Some(fx0), Some(nearest_p0(fx0)))
        }
    };
    Ok(LevelSetQuery { planar, j1, j2, lambda, theta, p_range: (-pmax, pmax), x0, f_x0, p0 })
}

/// Monotone pieces of `F` on `I`.
fn pieces(q: &LevelSetQuery) -> Vec<(f64, f64)> {
    let Interval { lo, hi } = q.planar.interval;
    match q.x0 {
        Some(x0) if x0 > lo && x0 < hi => vec![(lo, x0), (x0, hi)],
        _ => vec![(lo, hi)],
    }
}

/// Calls `visit(p, x_lo, x_hi)` for every maximal subinterval of a monotone
/// piece on which `|F - p| < λ`.
fn for_each_level(q: &LevelSetQuery, mut visit: impl FnMut(i64, f64, f64)) {
    let lam = q.lambda;
    for (a, b) in pieces(q) {
        let (fa, fb) = (q.f(a), q.f(b));
        if fa == fb {
            continue;
        }
        // G = sF is increasing on [a, b]
        let s = if fb > fa { 1.0 } else { -1.0 };
        let (ga, gb) = (s * fa, s * fb);
        let g = |x: f64| s * q.f(x);
        let dg = |x: f64| s * q.df(x);
        // targets increase with the level, so each root brackets the next from below
        let (mut cursor, mut at) = (a, ga);
        let mut inv = |y: f64| {
            let x = if y <= ga {
                a
            } else if y >= gb {
                b
            } else {
                // one Newton step from the previous root as the starting guess
                let d = dg(cursor);
                let guess = if d > 0.0 { Some(cursor + (y - at) / d) } else { None };
                invert_increasing_from(g, dg, cursor, b, y, guess, ROOT_TOL)
            };
            cursor = x;
            at = y;
            x
        };
        let first = (ga - lam).ceil() as i64;
        let last = (gb + lam).floor() as i64;
        for level in first..=last {
            let lf = level as f64;
            let (ylo, yhi) = ((lf - lam).max(ga), (lf + lam).min(gb));
            if ylo >= yhi {
                continue;
            }
            let x1 = inv(ylo);
            let x2 = inv(yhi);
            if x2 > x1 {
                visit(s as i64 * level, x1, x2);
            }
        }
    }
}

/// `|μ(j1, j2, λ)|` without the breakdown.
pub fn total_measure(q: &LevelSetQuery) -> f64 {
    let mut total = 0.0;
    for_each_level(q, |_, x1, x2| total += x2 - x1);
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub total: f64,
    /// `|μ(j1, j2, p, λ)|` for each `p` with nonempty set, ascending.
    pub per_p: Vec<(i64, f64)>,
    /// Disjoint subintervals of `I` whose union is the set, ascending.
    pub intervals: Vec<Interval>,
}

pub fn measure_sublevel(q: &LevelSetQuery) -> Result<MeasureReport> {
    let mut per_p: BTreeMap<i64, f64> = BTreeMap::new();
    let mut raw: Vec<Interval> = Vec::new();
    for_each_level(q, |p, x1, x2| {
        *per_p.entry(p).or_default() += x2 - x1;
        raw.push(Interval { lo: x1, hi: x2 });
    });
    raw.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut intervals: Vec<Interval> = Vec::with_capacity(raw.len());
    for iv in raw {
        match intervals.last_mut() {
            Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
            _ => intervals.push(iv),
        }
    }
    let per_p: Vec<(i64, f64)> = per_p.into_iter().collect();
    let total = per_p.iter().map(|&(_, m)| m).sum();
    Ok(MeasureReport { total, per_p, intervals })
}

/// `|μ(j1, j2, p, λ)|` for a single `p`.
pub fn measure_at_p(q: &LevelSetQuery, p: i64) -> f64 {
    let mut m = 0.0;
    for_each_level(q, |pp, x1, x2| {
        if pp == p {
            m += x2 - x1
        }
    });
    m
}

/// `λ J^2 + λ^{1/2} J^{1/2} max(ln J, 1)`.
pub fn prop_bound(j: u32, lambda: f64) -> f64 {
    let jf = j as f64;
    lambda * jf * jf + (lambda * jf).sqrt() * jf.ln().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropSum {
    pub j: u32,
    pub lambda: f64,
    pub sum: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Sum of `|μ(j1, j2, λ)|` over `(j1, j2)` in `[-J, J]^2` minus the origin.
///
/// `(j1, j2)` and `(-j1, -j2)` define the same set, so only half the cells are
/// measured.
pub fn prop_sum(planar: &PlanarCurve, j: u32, lambda: f64) -> Result<PropSum> {
    if j < 2 {
        return arg("J must be at least 2");
    }
    if !(lambda > 0.0 && lambda < 0.5) {
        return arg(format!("lambda = {lambda} must lie in (0, 1/2)"));
    }
    let dual = DualCurve::new(planar)?;
    let ji = j as i64;
    let rows: Vec<f64> = (0..=ji)
        .into_par_iter()
        .map(|j2| {
            let j1_start = if j2 == 0 { 1 } else { -ji };
            let cells: Vec<f64> = (j1_start..=ji)
                .map(|j1| classify_with(&dual, j1, j2, lambda).map(|q| total_measure(&q)))
                .collect::<Result<_>>()?;
            Ok(pairwise_sum(&cells))
        })
        .collect::<Result<_>>()?;
    let sum = 2.0 * pairwise_sum(&rows);
    let bound = prop_bound(j, lambda);
    Ok(PropSum { j, lambda, sum, bound, ratio: sum / bound })
}

/// Lower and upper constants `c1 (2/c2)^{1/2}`, `c2 (2/c1)^{1/2}` bounding
/// `|F'(x)| / (|j2| |F(x) - F(x0)|)^{1/2}`.
pub fn l1_constants(planar: &PlanarCurve) -> (f64, f64) {
    let (c1, c2) = (planar.c1, planar.c2);
    (c1 * (2.0 / c2).sqrt(), c2 * (2.0 / c1).sqrt())
}

/// `|F'(x)| / (|j2| |F(x) - F(x0)|)^{1/2}` for a `Θ2` query and `x != x0`.
pub fn l1_ratio(q: &LevelSetQuery, x: f64) -> Option<f64> {
    let (x0, fx0) = (q.x0?, q.f_x0?);
    if x == x0 {
        return None;
    }
    let denom = (q.j2.abs() as f64 * (q.f(x) - fx0).abs()).sqrt();
    (denom > 0.0).then(|| q.df(x).abs() / denom)
}

/// Which analytic estimate applies to a `(query, p)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundCase {
    /// `j2 = 0`: exactly `2λ / |j1|` before clipping to `I`.
    Linear,
    /// `Θ1`: `|F'| >= |j1| / 2`, giving `2λ / (|j1| / 2)`.
    ThetaOne,
    /// `p = p0`, `‖F(x0)‖ >= 2λ`: `λ |j2|^{-1/2} ‖F(x0)‖^{-1/2}`.
    CriticalFar,
    /// `p = p0`, `‖F(x0)‖ < 2λ`: `(λ / |j2|)^{1/2}`.
    CriticalNear,
    /// `p != p0`: `λ (|j2| |p - p0| / 3)^{-1/2}`.
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRow {
    pub p: i64,
    pub measure: f64,
    pub bound: f64,
    pub ratio: f64,
    pub case: BoundCase,
}

/// Measured `|μ(j1, j2, p, λ)|` next to the applicable estimate, for every `p`
/// with a nonempty set (and `p0` in `Θ2` even when empty).
pub fn cell_bound_check(q: &LevelSetQuery) -> Result<Vec<CellRow>> {
    let report = measure_sublevel(q)?;
    let mut per_p: BTreeMap<i64, f64> = report.per_p.into_iter().collect();
    if let Some(p0) = q.p0 {
        per_p.entry(p0).or_insert(0.0);
    }
    let lam = q.lambda;
    let rows = per_p
        .into_iter()
        .map(|(p, measure)| {
            let (case, bound) = match (q.theta, q.p0, q.f_x0) {
                (Theta::One, _, _) if q.j2 == 0 => (BoundCase::Linear, 2.0 * lam / q.j1.abs() as f64),
                (Theta::One, _, _) => (BoundCase::ThetaOne, 4.0 * lam / q.j1.abs() as f64),
                (Theta::Two, Some(p0), Some(fx0)) => {
                    let j2 = q.j2.abs() as f64;
                    if p == p0 {
                        let n = dist_to_int(fx0);
                        if n >= 2.0 * lam {
                            (BoundCase::CriticalFar, lam / (j2 * n).sqrt())
                        } else {
                            (BoundCase::CriticalNear, (lam / j2).sqrt())
                        }
                    } else {
                        let shift = (p - p0).abs() as f64;
                        (BoundCase::Shifted, lam / (j2 * shift / 3.0).sqrt())
                    }
                }
                _ => unreachable!("Θ2 queries always carry x0 and p0"),
            };
            CellRow { p, measure, bound, ratio: measure / bound, case }
        })
        .collect();
    Ok(rows)
}
