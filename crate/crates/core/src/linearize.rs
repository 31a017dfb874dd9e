//! Tangent-line linearization on blocks of length `q0`.
//!
//! Writing `a = q0 s + a0` with `0 <= a0 < q0`, the value `q f_i(a/q)` is
//! within `c4 q0^2 / (2q) <= δ/4` of `q f_i(q0 s/q) + a0 f_i'(q0 s/q)`, so
//! counting the linearized conditions on each block sandwiches `A(q, δ)`.

use rayon::prelude::*;

use crate::counting::{check_args, count_near, guard_band, CountResult, Membership, Tally};
use crate::curves::MongeCurve3;
use crate::error::{arg, Error, Result};
use crate::numeric::{dist_to_int_dd, two_prod, two_sum, Interval};
use crate::Component;

/// `q0 = floor(sqrt(δ q / (2 c4)))`, `r = floor(q / q0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockParams {
    pub q: u64,
    pub delta: f64,
    pub c4: f64,
    pub q0: u64,
    pub r: u64,
    /// `q0 >= 1`, equivalently `δ >= 2 c4 / q`.
    pub valid: bool,
}

impl BlockParams {
    /// Anchor `q0 s / q` of block `s`.
    pub fn anchor(&self, s: u64) -> f64 {
        (self.q0 * s) as f64 / self.q as f64
    }
}

pub fn block_params(q: u64, delta: f64, c4: f64) -> BlockParams {
    let t = delta * q as f64 / (2.0 * c4);
    let mut q0 = t.max(0.0).sqrt().floor() as u64;
    // repair rounding in the square root so that q0^2 <= t < (q0+1)^2
    while q0 > 0 && (q0 * q0) as f64 > t {
        q0 -= 1;
    }
    while ((q0 + 1) * (q0 + 1)) as f64 <= t {
        q0 += 1;
    }
    let r = q.checked_div(q0).unwrap_or(0);
    BlockParams { q, delta, c4, q0, r, valid: q0 >= 1 }
}

/// Certainty interval for a block count or an aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountBounds {
    pub lo: u64,
    pub hi: u64,
}

impl From<Tally> for CountBounds {
    fn from(t: Tally) -> Self {
        Self { lo: t.inside, hi: t.inside + t.uncertain }
    }
}

fn require_unit_domain(curve: &MongeCurve3) -> Result<()> {
    if curve.domain != Interval::UNIT {
        return arg(format!(
            "linearization runs over [0, q]; curve `{}` is restricted to [{}, {}]",
            curve.id, curve.domain.lo, curve.domain.hi
        ));
    }
    Ok(())
}

/// `F_i(s, a0)` for both coordinates, as distances to the nearest integer.
pub(crate) struct BlockAnchor {
    base: [(f64, f64); 2],
    slope: [f64; 2],
}

impl BlockAnchor {
    pub fn new(curve: &MongeCurve3, p: &BlockParams, s: u64) -> Self {
        let x = p.anchor(s);
        let num = (p.q0 * s) as f64;
        let q = p.q as f64;
        let f = [curve.component(Component::F1), curve.component(Component::F2)];
        Self {
            base: [f[0].scaled(num, q), f[1].scaled(num, q)],
            slope: [f[0].deriv(x, 1), f[1].deriv(x, 1)],
        }
    }

    /// `‖q f_i(q0 s/q) + a0 f_i'(q0 s/q)‖`.
    #[inline]
    pub fn dist(&self, i: usize, a0: u64) -> f64 {
        let (h, l) = self.base[i];
        let (p, pe) = two_prod(a0 as f64, self.slope[i]);
        let (s, se) = two_sum(h, p);
        dist_to_int_dd(s, l + pe + se)
    }
}

fn block_tally(curve: &MongeCurve3, p: &BlockParams, threshold: f64, s: u64) -> Tally {
    let anchor = BlockAnchor::new(curve, p, s);
    let eps = guard_band(p.q);
    let mut t = Tally::default();
    for a0 in 0..p.q0 {
        t.push(Membership::of([anchor.dist(0, a0), anchor.dist(1, a0)], threshold, eps));
    }
    t
}

fn check_threshold(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return arg(format!("threshold {delta} must lie in (0, 1)"));
    }
    Ok(())
}

fn valid_params(curve: &MongeCurve3, q: u64, delta: f64) -> Result<BlockParams> {
    require_unit_domain(curve)?;
    if q == 0 {
        return arg("q must be positive");
    }
    check_threshold(delta)?;
    let p = block_params(q, delta, curve.bounds.c4);
    if !p.valid {
        return Err(Error::Degenerate(format!(
            "q0 = 0 for q = {q}, delta = {delta}, c4 = {} (need delta >= 2 c4 / q)",
            curve.bounds.c4
        )));
    }
    Ok(p)
}

/// `B(q, δ, s)`: the `a0` in `[0, q0)` meeting both linearized conditions at
/// the anchor of block `s`, with `q0` derived from `δ`.
pub fn count_block(curve: &MongeCurve3, q: u64, delta: f64, s: u64) -> Result<CountBounds> {
    let p = valid_params(curve, q, delta)?;
    count_block_with(curve, &p, delta, s)
}

/// Block count for explicit parameters and threshold.
pub fn count_block_with(
    curve: &MongeCurve3,
    params: &BlockParams,
    threshold: f64,
    s: u64,
) -> Result<CountBounds> {
    check_threshold(threshold)?;
    if s > params.r {
        return arg(format!("block index {s} exceeds r = {}", params.r));
    }
    Ok(block_tally(curve, params, threshold, s).into())
}

/// `B1(q, δ)` (blocks `0..=r`) and `B2(q, δ)` (blocks `0..r`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub params: BlockParams,
    pub b1: CountBounds,
    pub b2: CountBounds,
}

pub fn aggregate(curve: &MongeCurve3, q: u64, delta: f64) -> Result<Aggregate> {
    let p = valid_params(curve, q, delta)?;
    aggregate_with(curve, &p, delta)
}

pub fn aggregate_with(curve: &MongeCurve3, params: &BlockParams, threshold: f64) -> Result<Aggregate> {
    require_unit_domain(curve)?;
    check_threshold(threshold)?;
    if !params.valid {
        return Err(Error::Degenerate(format!("q0 = 0 for q = {}", params.q)));
    }
    let last = block_tally(curve, params, threshold, params.r);
    let head = (0..params.r)
        .into_par_iter()
        .map(|s| block_tally(curve, params, threshold, s))
        .reduce(Tally::default, Tally::add);
    Ok(Aggregate {
        params: *params,
        b1: head.add(last).into(),
        b2: head.into(),
    })
}

/// Outcome of `B2(q, δ/2) <= A(q, δ) <= B1(q, 3δ/2)`.
///
/// `b2_half` is the upper end of the `B2` certainty interval and
/// `b1_threehalf` the lower end of the `B1` interval, so `holds` is certified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichReport {
    pub q: u64,
    pub delta: f64,
    pub b2_half: u64,
    pub a_mid: CountResult,
    pub b1_threehalf: u64,
    pub holds: bool,
}

pub fn sandwich_check(curve: &MongeCurve3, q: u64, delta: f64) -> Result<SandwichReport> {
    check_args(q, delta)?;
    let low = aggregate(curve, q, delta / 2.0)?;
    let high = aggregate(curve, q, 1.5 * delta)?;
    let a_mid = count_near(curve, q, delta)?;
    let b2_half = low.b2.hi;
    let b1_threehalf = high.b1.lo;
    Ok(SandwichReport {
        q,
        delta,
        b2_half,
        a_mid,
        b1_threehalf,
        holds: b2_half <= a_mid.count_lo && a_mid.count_hi <= b1_threehalf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::count_near_exact;
    use crate::numeric::dist_to_int;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_params_examples() {
        let p = block_params(1_000_000, 0.1, 6.0);
        assert_eq!((p.q0, p.r, p.valid), (91, 10989, true));
        let p = block_params(100, 0.01, 6.0);
        assert_eq!((p.q0, p.valid), (0, false));
        for q in [1024u64, 1 << 20] {
            let p = block_params(q, 12.0 / q as f64, 6.0);
            assert_eq!((p.q0, p.r, p.valid), (1, q, true));
        }
    }

    #[test]
    fn block_params_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let q: u64 = rng.gen_range(1..100_000_000);
            let delta: f64 = rng.gen_range(1e-6..0.5);
            let c4: f64 = rng.gen_range(1.0..10.0);
            let p = block_params(q, delta, c4);
            let t = delta * q as f64 / (2.0 * c4);
            assert!(((p.q0 * p.q0) as f64) <= t && t < ((p.q0 + 1) * (p.q0 + 1)) as f64);
            assert!(p.r * p.q0 <= q);
            assert_eq!(p.valid, p.q0 >= 1);
        }
    }

    /// Straight re-evaluation of the block definition, without the
    /// double-double machinery.
    fn block_oracle(curve: &MongeCurve3, p: &BlockParams, threshold: f64, s: u64) -> u64 {
        let x = p.anchor(s);
        let q = p.q as f64;
        (0..p.q0)
            .filter(|&a0| {
                [Component::F1, Component::F2].iter().all(|&c| {
                    let f = curve.component(c);
                    dist_to_int(q * f.deriv(x, 0) + a0 as f64 * f.deriv(x, 1)) < threshold
                })
            })
            .count() as u64
    }

    #[test]
    fn origin_block_is_full() {
        let v = MongeCurve3::veronese();
        let b = count_block(&v, 10_000, 0.2, 0).unwrap();
        let p = block_params(10_000, 0.2, 6.0);
        assert_eq!((b.lo, b.hi), (p.q0, p.q0));
    }

    #[test]
    fn block_matches_oracle() {
        let v = MongeCurve3::veronese();
        let p = block_params(10_000, 0.2, 6.0);
        for s in [1, 3, 7, p.r / 2, p.r] {
            let b = count_block(&v, 10_000, 0.2, s).unwrap();
            let o = block_oracle(&v, &p, 0.2, s);
            assert!(b.lo <= o && o <= b.hi, "s = {s}: {b:?} vs {o}");
        }
        assert!(count_block(&v, 10_000, 0.2, p.r + 1).is_err());
    }

    #[test]
    fn single_candidate_block() {
        let v = MongeCurve3::veronese();
        // q0 = 1 needs delta q / 12 in [1, 4)
        let q = 30;
        let p = block_params(q, 0.49, 6.0);
        assert_eq!(p.q0, 1);
        for s in 0..=p.r {
            let b = count_block(&v, q, 0.49, s).unwrap();
            assert!(b.hi <= 1);
        }
    }

    #[test]
    fn aggregate_matches_double_loop() {
        let v = MongeCurve3::veronese();
        let agg = aggregate(&v, 10_000, 0.2).unwrap();
        let p = agg.params;
        let per_s: Vec<u64> = (0..=p.r).map(|s| block_oracle(&v, &p, 0.2, s)).collect();
        let b1: u64 = per_s.iter().sum();
        let b2 = b1 - per_s[p.r as usize];
        assert!(agg.b1.lo <= b1 && b1 <= agg.b1.hi);
        assert!(agg.b2.lo <= b2 && b2 <= agg.b2.hi);
        let last = count_block(&v, 10_000, 0.2, p.r).unwrap();
        assert_eq!(agg.b1.lo - agg.b2.lo, last.lo);
        assert!(agg.b2.hi <= p.q0 * p.r && p.q0 * p.r <= 10_000);
    }

    #[test]
    fn aggregate_additive_over_partitions() {
        let c = MongeCurve3::generic_cubic();
        let p = block_params(200_000, 0.1, c.bounds.c4);
        let agg = aggregate_with(&c, &p, 0.1).unwrap();
        for cut in [1, p.r / 3, p.r - 1] {
            let left: u64 = (0..cut).map(|s| count_block_with(&c, &p, 0.1, s).unwrap().lo).sum();
            let right: u64 = (cut..=p.r).map(|s| count_block_with(&c, &p, 0.1, s).unwrap().lo).sum();
            assert_eq!(left + right, agg.b1.lo);
        }
    }

    #[test]
    fn degenerate_blocks_are_errors() {
        let v = MongeCurve3::veronese();
        assert!(matches!(aggregate(&v, 100, 0.01), Err(Error::Degenerate(_))));
        assert!(matches!(sandwich_check(&v, 100, 0.01), Err(Error::Degenerate(_))));
    }

    #[test]
    fn sandwich_examples() {
        let v = MongeCurve3::veronese();
        for (q, delta) in [(1_000u64, 0.3), (100_000, 0.05)] {
            let rep = sandwich_check(&v, q, delta).unwrap();
            assert!(rep.holds, "{rep:?}");
        }
        let rep = sandwich_check(&MongeCurve3::embedded_parabola(), 10_000, 0.2).unwrap();
        assert!(rep.holds, "{rep:?}");
    }

    #[test]
    fn taylor_gap_is_within_half_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for curve in [MongeCurve3::veronese(), MongeCurve3::generic_cubic()] {
            for &(q, delta) in &[(10_000u64, 0.2), (1_000_000, 0.05)] {
                let p = block_params(q, delta, curve.bounds.c4);
                for _ in 0..1000 {
                    let s = rng.gen_range(0..=p.r);
                    let a0 = rng.gen_range(0..p.q0);
                    let a = p.q0 * s + a0;
                    if a > q {
                        continue;
                    }
                    let anchor = BlockAnchor::new(&curve, &p, s);
                    for (i, c) in [Component::F1, Component::F2].into_iter().enumerate() {
                        let exact = count_exact_dist(&curve, c, a, q);
                        let gap = (exact - anchor.dist(i, a0)).abs();
                        assert!(gap <= delta / 2.0 + 1e-9, "gap {gap}");
                    }
                }
            }
        }
    }

    fn count_exact_dist(curve: &MongeCurve3, c: Component, a: u64, q: u64) -> f64 {
        let poly = &curve.coeff_form().unwrap()[c.index()];
        let (n, d) = poly.scaled_exact_i128(a, q).unwrap();
        let r = n.rem_euclid(d);
        r.min(d - r) as f64 / d as f64
    }

    #[test]
    fn sandwich_against_exact_count() {
        let c = MongeCurve3::generic_cubic();
        let rep = sandwich_check(&c, 50_000, 0.1).unwrap();
        let exact = count_near_exact(&c, 50_000, 0.1).unwrap().count_lo;
        assert!(rep.b2_half <= exact && exact <= rep.b1_threehalf);
    }
}
