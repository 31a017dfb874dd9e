//! Rational points near planar curves, the geometric-series bound for linear
//! exponential sums, and the error term `E(q, δ)` left after expanding the
//! Selberg majorants on each linearization block.

use std::f64::consts::PI;

use rayon::prelude::*;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::curves::{frac_dist_lt_exact, frac_dist_lt_i128, MongeCurve3, Profile};
use crate::error::{arg, Error, Result};
use crate::linearize::block_params;
use crate::numeric::{bisect, dist_to_int, dist_to_int_dd, pairwise_sum, two_prod, two_sum, Interval};
use crate::Component;

/// Largest number of `(u, t)` pairs a lemma enumeration will visit.
pub const MAX_PAIRS: f64 = 1e8;

/// Default `ε` in the first lemma's bound.
pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaSumReport {
    pub u: f64,
    pub delta: f64,
    pub count_or_sum: f64,
    pub bound: f64,
    pub ratio: f64,
    /// Number of `(u, t)` pairs enumerated.
    pub pairs: u64,
}

fn check_lemma_args(k: Interval, delta: f64, u: f64) -> Result<(u64, u64)> {
    if !(delta > 0.0 && delta <= 0.25) {
        return arg(format!("delta = {delta} must lie in (0, 1/4]"));
    }
    if u.is_nan() || u < 1.0 {
        return arg(format!("U = {u} must be at least 1"));
    }
    let (u_lo, u_hi) = (u.ceil() as u64, (2.0 * u).ceil() as u64);
    let pairs = (u_hi.saturating_sub(u_lo)) as f64 * (2.0 * u * k.len() + 1.0);
    if pairs > MAX_PAIRS {
        return arg(format!("about {pairs:.3e} pairs exceeds the {MAX_PAIRS:.0e} cap"));
    }
    Ok((u_lo, u_hi))
}

/// Distance `‖u φ(t/u)‖` and whether it lies below `δ`. Rational polynomial
/// profiles with `t >= 0` decide the comparison exactly.
fn lemma_dist(phi: &dyn Profile, t: i64, u: u64, delta: f64) -> (f64, bool) {
    if let (Some(p), Ok(a)) = (phi.as_poly(), u64::try_from(t)) {
        if let Some((num, den)) = p.scaled_exact_i128(a, u) {
            let r = num.rem_euclid(den);
            let d = r.min(den - r) as f64 / den as f64;
            return (d, frac_dist_lt_i128(num, den, delta));
        }
        let (num, den) = p.scaled_exact_big(a, u);
        let d = dist_to_int(ratio_to_f64_big(&num, &den));
        return (d, frac_dist_lt_exact(&num, &den, delta));
    }
    let (h, l) = phi.scaled(t as f64, u as f64);
    let d = dist_to_int_dd(h, l);
    (d, d < delta)
}

fn ratio_to_f64_big(num: &BigInt, den: &BigInt) -> f64 {
    BigRational::new(num.clone(), den.clone()).to_f64().unwrap_or(f64::NAN)
}

/// Visits `‖u φ(t/u)‖` for `U <= u < 2U` and integer `t` with `t/u` in `K`,
/// mapping each through `per_value(dist, below_delta)` and summing in order.
fn lemma_enumerate<F>(phi: &dyn Profile, k: Interval, delta: f64, u_lo: u64, u_hi: u64, per_value: F) -> (f64, u64)
where
    F: Fn(f64, bool) -> f64 + Sync,
{
    let rows: Vec<(f64, u64)> = (u_lo..u_hi)
        .into_par_iter()
        .map(|u| {
            let uf = u as f64;
            let (t_lo, t_hi) = ((uf * k.lo).ceil() as i64, (uf * k.hi).floor() as i64);
            let mut vals = Vec::with_capacity((t_hi - t_lo + 1).max(0) as usize);
            for t in t_lo..=t_hi {
                let (d, below) = lemma_dist(phi, t, u, delta);
                vals.push(per_value(d, below));
            }
            (pairwise_sum(&vals), vals.len() as u64)
        })
        .collect();
    let sums: Vec<f64> = rows.iter().map(|r| r.0).collect();
    (pairwise_sum(&sums), rows.iter().map(|r| r.1).sum())
}

fn log2u(u: f64) -> f64 {
    (2.0 * u).ln()
}

/// `#{(u, t) : U <= u < 2U, t/u in K, ‖u φ(t/u)‖ < δ}` against
/// `δ^{1-ε} U^2 + U log(2U)`.
pub fn lemma3_count(phi: &dyn Profile, k: Interval, delta: f64, u: f64, epsilon: f64) -> Result<LemmaSumReport> {
    let (u_lo, u_hi) = check_lemma_args(k, delta, u)?;
    let (count, pairs) = lemma_enumerate(phi, k, delta, u_lo, u_hi, |_, below| if below { 1.0 } else { 0.0 });
    let bound = delta.powf(1.0 - epsilon) * u * u + u * log2u(u);
    Ok(LemmaSumReport { u, delta, count_or_sum: count, bound, ratio: count / bound, pairs })
}

/// `Σ ‖u φ(t/u)‖^{-Λ}` over the pairs with `‖u φ(t/u)‖ >= δ`, against
/// `U^2 + δ^{-Λ} U log(2U)`.
pub fn lemma4_sum(phi: &dyn Profile, k: Interval, delta: f64, lambda: f64, u: f64) -> Result<LemmaSumReport> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return arg(format!("Lambda = {lambda} must lie in (0, 1)"));
    }
    let (u_lo, u_hi) = check_lemma_args(k, delta, u)?;
    let (sum, pairs) =
        lemma_enumerate(phi, k, delta, u_lo, u_hi, |d, below| if below { 0.0 } else { d.powf(-lambda) });
    let bound = u * u + delta.powf(-lambda) * u * log2u(u);
    Ok(LemmaSumReport { u, delta, count_or_sum: sum, bound, ratio: sum / bound, pairs })
}

/// `|Σ_{0 <= n < N} e(nγ)|` by the closed form `|sin(πNγ) / sin(πγ)|`.
pub fn linear_expsum(gamma: f64, n: u64) -> f64 {
    let g = gamma - gamma.round();
    if g == 0.0 {
        return n as f64;
    }
    // N g = p + pe exactly; reduce mod 2 since sin(π·) has period 2
    let (p, pe) = two_prod(n as f64, g);
    let red = p - 2.0 * (p / 2.0).round();
    let (s, se) = two_sum(red, pe);
    let num = (PI * (s + se)).sin();
    (num / (PI * g).sin()).abs()
}

/// `E(q, δ) = 9δ^2 Σ_{0<=s<=r} Σ_{(j1,j2) != 0, |j_i| <= J} min(q0, ‖j1 f1'(x_s) + j2 f2'(x_s)‖^{-1})`
/// with `x_s = q0 s / q` and `J = ⌊1/δ⌋`.
pub fn error_term(curve: &MongeCurve3, q: u64, delta: f64) -> Result<f64> {
    if q == 0 {
        return arg("q must be positive");
    }
    if !(delta > 0.0 && delta < 1.0) {
        return arg(format!("delta = {delta} must lie in (0, 1)"));
    }
    let p = block_params(q, delta, curve.bounds.c4);
    if !p.valid {
        return Err(Error::Degenerate(format!("q0 = 0 for q = {q}, delta = {delta}")));
    }
    let jmax = (1.0 / delta).floor() as i64;
    let q0 = p.q0 as f64;
    let (f1, f2) = (curve.component(Component::F1), curve.component(Component::F2));
    let per_s: Vec<f64> = (0..=p.r)
        .into_par_iter()
        .map(|s| {
            let x = p.anchor(s);
            let (d1, d2) = (f1.deriv(x, 1), f2.deriv(x, 1));
            // (j1, j2) and (-j1, -j2) give the same distance: sum a half plane, double.
            let mut acc = 0.0;
            for j2 in 0..=jmax {
                let start = if j2 == 0 { 1 } else { -jmax };
                let (b, be) = two_prod(j2 as f64, d2);
                for j1 in start..=jmax {
                    let (a, ae) = two_prod(j1 as f64, d1);
                    let (h, l) = two_sum(a, b);
                    let t = dist_to_int_dd(h, l + ae + be);
                    acc += if t * q0 <= 1.0 { q0 } else { 1.0 / t };
                }
            }
            2.0 * acc
        })
        .collect();
    Ok(9.0 * delta * delta * pairwise_sum(&per_s))
}

/// Two evaluations of `(f2' ∘ (f1')^{-1})''` at `β`: numerical
/// differentiation of the composition, and the closed form
/// `(f1'' f2''' - f2'' f1''') / (f1'')^3` at `x = (f1')^{-1}(β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualComposition {
    pub beta: f64,
    pub x: f64,
    pub numeric: f64,
    pub formula: f64,
}

pub fn dual_composition(curve: &MongeCurve3, beta: f64) -> Result<DualComposition> {
    let f1 = curve.component(Component::F1);
    let f2 = curve.component(Component::F2);
    let dom = curve.domain;
    let inv = |b: f64| bisect(|x| f1.deriv(x, 1) - b, dom.lo, dom.hi, 1e-15);
    let h = 1e-3;
    let comp = |b: f64| inv(b).map(|x| f2.deriv(x, 1));
    let (lo, mid, hi) = (comp(beta - h)?, comp(beta)?, comp(beta + h)?);
    let numeric = (hi - 2.0 * mid + lo) / (h * h);
    let x = inv(beta)?;
    let (a2, a3, b2, b3) = (f1.deriv(x, 2), f1.deriv(x, 3), f2.deriv(x, 2), f2.deriv(x, 3));
    let formula = (a2 * b3 - b2 * a3) / (a2 * a2 * a2);
    Ok(DualComposition { beta, x, numeric, formula })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::RatPoly;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> RatPoly {
        RatPoly::from_ints(&[0, 0, 1])
    }

    fn k12() -> Interval {
        Interval::new(1.0, 2.0).unwrap()
    }

    /// Exact rational oracle for φ = x^2: ‖t^2 / u‖ as a reduced fraction.
    fn dist_sq_exact(t: i64, u: i64) -> BigRational {
        let r = (t * t).rem_euclid(u);
        BigRational::new(r.min(u - r).into(), u.into())
    }

    fn dist_sq(t: i64, u: i64) -> f64 {
        dist_sq_exact(t, u).to_f64().unwrap()
    }

    fn below(t: i64, u: i64, delta: f64) -> bool {
        dist_sq_exact(t, u) < BigRational::from_float(delta).unwrap()
    }

    #[test]
    fn lemma3_double_loop() {
        let rep = lemma3_count(&square(), k12(), 0.1, 10.0, DEFAULT_EPSILON).unwrap();
        let mut expect = 0;
        for u in 10i64..20 {
            for t in u..=2 * u {
                if below(t, u, 0.1) {
                    expect += 1;
                }
            }
        }
        assert_eq!(rep.count_or_sum, expect as f64);
        assert_eq!(rep.pairs, (10..20).map(|u| u + 1).sum::<i64>() as u64);
        let bound = 0.1f64.powf(0.9) * 100.0 + 10.0 * 20f64.ln();
        assert!((rep.bound - bound).abs() < 1e-12);
    }

    #[test]
    fn lemma3_single_u() {
        // U = 1: u = 1 only, t in {1, 2}, t^2 integral
        let rep = lemma3_count(&square(), k12(), 0.2499, 1.0, DEFAULT_EPSILON).unwrap();
        assert_eq!(rep.count_or_sum, 2.0);
        assert!(lemma3_count(&square(), k12(), 0.26, 1.0, 0.1).is_err());
        assert!(lemma3_count(&square(), k12(), 0.1, 0.5, 0.1).is_err());
    }

    #[test]
    fn lemma3_monotone_in_delta() {
        let mut prev = 0.0;
        for k in (2..=8).rev() {
            let d = 2f64.powi(-k);
            let c = lemma3_count(&square(), k12(), d, 40.0, DEFAULT_EPSILON).unwrap().count_or_sum;
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn lemma4_double_loop() {
        let rep = lemma4_sum(&square(), k12(), 0.1, 0.5, 10.0).unwrap();
        let mut expect = 0.0;
        let mut max_term: f64 = 0.0;
        for u in 10i64..20 {
            for t in u..=2 * u {
                let d = dist_sq(t, u);
                if !below(t, u, 0.1) {
                    expect += d.powf(-0.5);
                    max_term = max_term.max(d.powf(-0.5));
                }
            }
        }
        assert!((rep.count_or_sum - expect).abs() < 1e-9);
        assert!(max_term <= 0.1f64.powf(-0.5));
        assert!(lemma4_sum(&square(), k12(), 0.1, 1.0, 10.0).is_err());
    }

    #[test]
    fn lemma4_small_lambda_counts_pairs() {
        let rep = lemma4_sum(&square(), k12(), 0.1, 1e-12, 10.0).unwrap();
        let mut n = 0;
        for u in 10i64..20 {
            for t in u..=2 * u {
                if !below(t, u, 0.1) {
                    n += 1;
                }
            }
        }
        assert!((rep.count_or_sum - n as f64).abs() < 1e-6);
    }

    #[test]
    fn pair_cap_enforced() {
        assert!(lemma3_count(&square(), Interval::new(0.0, 100.0).unwrap(), 0.1, 1e4, 0.1).is_err());
    }

    fn direct_sum(gamma: f64, n: u64) -> f64 {
        let g = gamma - gamma.round();
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let (p, pe) = two_prod(k as f64, g);
            let ph = (p - p.round()) + pe;
            acc += Complex64::from_polar(1.0, 2.0 * PI * ph);
        }
        acc.norm()
    }

    #[test]
    fn linear_expsum_examples() {
        assert_eq!(linear_expsum(0.0, 7), 7.0);
        assert_eq!(linear_expsum(3.0, 7), 7.0);
        assert!(linear_expsum(0.5, 4).abs() < 1e-12);
        let v = linear_expsum(0.3, 5);
        assert!((v - direct_sum(0.3, 5)).abs() < 1e-12);
        assert!((v - 1.236_067_977_499_79).abs() < 1e-12);
    }

    #[test]
    fn linear_expsum_vs_direct_and_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let g: f64 = rng.gen_range(-10.0..10.0);
            let n: u64 = rng.gen_range(1..=10_000);
            let v = linear_expsum(g, n);
            assert!((v - direct_sum(g, n)).abs() < 1e-9);
            let d = dist_to_int(g);
            if d > 0.0 {
                assert!(v <= (n as f64).min(1.0 / d) + 1e-9);
            }
        }
    }

    /// Second evaluator: full (j1, j2) square, plain arithmetic.
    fn error_term_oracle(curve: &MongeCurve3, q: u64, delta: f64) -> f64 {
        let p = block_params(q, delta, curve.bounds.c4);
        let jmax = (1.0 / delta).floor() as i64;
        let mut total = 0.0;
        for s in 0..=p.r {
            let x = (p.q0 * s) as f64 / q as f64;
            let d1 = curve.component(Component::F1).deriv(x, 1);
            let d2 = curve.component(Component::F2).deriv(x, 1);
            for j1 in -jmax..=jmax {
                for j2 in -jmax..=jmax {
                    if (j1, j2) == (0, 0) {
                        continue;
                    }
                    let t = dist_to_int(j1 as f64 * d1 + j2 as f64 * d2);
                    total += (p.q0 as f64).min(1.0 / t);
                }
            }
        }
        9.0 * delta * delta * total
    }

    #[test]
    fn error_term_matches_oracle() {
        let v = MongeCurve3::veronese();
        let e = error_term(&v, 10_000, 0.2).unwrap();
        let o = error_term_oracle(&v, 10_000, 0.2);
        assert!((e - o).abs() <= 1e-9 * o, "{e} vs {o}");
        assert!(e >= 0.0);
        let c = MongeCurve3::generic_cubic();
        let e = error_term(&c, 123_457, 0.07).unwrap();
        let o = error_term_oracle(&c, 123_457, 0.07);
        assert!((e - o).abs() <= 1e-9 * o);
        assert!(matches!(error_term(&v, 100, 0.01), Err(Error::Degenerate(_))));
    }

    #[test]
    fn error_term_frequency_count_at_j1() {
        // δ in (1/2, 1) gives J = 1: eight frequency pairs per block
        let v = MongeCurve3::veronese();
        let q = 1_000;
        let p = block_params(q, 0.6, v.bounds.c4);
        let e = error_term(&v, q, 0.6).unwrap();
        let max = 9.0 * 0.36 * 8.0 * (p.r + 1) as f64 * p.q0 as f64;
        assert!(e > 0.0 && e <= max);
        assert!((e - error_term_oracle(&v, q, 0.6)).abs() < 1e-9 * e);
    }

    #[test]
    fn dual_composition_on_veronese() {
        let v = MongeCurve3::veronese();
        for k in 1..20 {
            let beta = 0.1 * k as f64;
            let d = dual_composition(&v, beta).unwrap();
            assert!((d.formula - 1.5).abs() < 1e-12);
            assert!((d.numeric - d.formula).abs() < 1e-6, "{d:?}");
        }
    }
}
