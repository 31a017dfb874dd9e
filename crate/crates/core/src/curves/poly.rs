//! Polynomials with rational coefficients, evaluated either exactly or in
//! (compensated) double precision.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};

use super::Profile;
use crate::error::{Error, Result};
use crate::numeric::comp_horner;

/// Polynomial `sum c_k x^k` with `c_k` rational, stored in ascending degree.
#[derive(Clone, PartialEq)]
pub struct RatPoly {
    coeffs: Vec<Ratio<i64>>,
    /// Coefficients of the 0th..3rd derivative as doubles.
    float: [Vec<f64>; 4],
    /// Common denominator and the integer numerators `c_k * denom`.
    denom: i64,
    numer: Vec<i64>,
}

impl fmt::Debug for RatPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RatPoly[")?;
        for (k, c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

impl RatPoly {
    pub fn new(mut coeffs: Vec<Ratio<i64>>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Ratio::zero());
        }
        let denom = coeffs
            .iter()
            .fold(1i64, |acc, c| acc.lcm(c.denom()));
        let numer = coeffs
            .iter()
            .map(|c| {
                (c.numer())
                    .checked_mul(denom / c.denom())
                    .ok_or_else(|| Error::Argument("coefficient overflow".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut float: [Vec<f64>; 4] = Default::default();
        for (order, slot) in float.iter_mut().enumerate() {
            *slot = coeffs
                .iter()
                .enumerate()
                .skip(order)
                .map(|(n, c)| {
                    let falling: i64 = (n - order + 1..=n).map(|m| m as i64).product();
                    ratio_to_f64(c) * falling as f64
                })
                .collect();
        }
        Ok(Self { coeffs, float, denom, numer })
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Ratio::from_integer(c)).collect())
            .expect("integer coefficients cannot overflow the common denominator")
    }

    /// Parses `"num/den, num/den, ..."` (ascending degree); bare integers allowed.
    pub fn parse(text: &str) -> Result<Self> {
        let coeffs = crate::kv::split_list(text)
            .map(parse_ratio)
            .collect::<Result<Vec<_>>>()?;
        if coeffs.is_empty() {
            return Err(Error::Parse("empty coefficient list".into()));
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Ratio<i64>] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Common denominator `D` of the coefficients.
    pub fn denom(&self) -> i64 {
        self.denom
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_zero()
    }

    pub fn eval(&self, x: f64, order: u8) -> f64 {
        let c = &self.float[order as usize];
        c.iter().rev().fold(0.0, |acc, &a| acc.mul_add(x, a))
    }

    /// Exact value of the `order`-th derivative at a rational point.
    pub fn eval_exact(&self, x: &BigRational, order: u8) -> BigRational {
        let order = order as usize;
        let mut acc = BigRational::zero();
        for (n, c) in self.coeffs.iter().enumerate().skip(order).rev() {
            let falling: i64 = (n - order + 1..=n).map(|m| m as i64).product();
            let c = BigRational::new(
                BigInt::from(*c.numer()) * BigInt::from(falling),
                BigInt::from(*c.denom()),
            );
            acc = acc * x + c;
        }
        acc
    }

    /// Exponent `e = max(deg, 1)` used in the exact scaling below.
    fn scale_exponent(&self) -> u32 {
        self.degree().max(1) as u32
    }

    /// `q f(a/q) = num / den` with `den = D q^(e-1)`, in 128-bit arithmetic.
    /// `None` on overflow.
    pub fn scaled_exact_i128(&self, a: u64, q: u64) -> Option<(i128, i128)> {
        let e = self.scale_exponent();
        let a = a as i128;
        let q = q as i128;
        // homogeneous Horner: sum n_k a^k q^(deg-k)
        let deg = self.degree() as u32;
        let mut acc: i128 = 0;
        for (k, &n) in self.numer.iter().enumerate().rev() {
            let term = (n as i128).checked_mul(q.checked_pow(deg - k as u32)?)?;
            acc = acc.checked_mul(a)?.checked_add(term)?;
        }
        // acc = sum n_k a^k q^(deg-k); lift to exponent e when deg == 0.
        let acc = acc.checked_mul(q.checked_pow(e - deg)?)?;
        let den = (self.denom as i128).checked_mul(q.checked_pow(e - 1)?)?;
        Some((acc, den))
    }

    pub fn scaled_exact_big(&self, a: u64, q: u64) -> (BigInt, BigInt) {
        let e = self.scale_exponent();
        let deg = self.degree() as u32;
        let a = BigInt::from(a);
        let qb = BigInt::from(q);
        let mut acc = BigInt::zero();
        for (k, &n) in self.numer.iter().enumerate().rev() {
            acc = acc * &a + BigInt::from(n) * num_traits::pow(qb.clone(), (deg - k as u32) as usize);
        }
        let acc = acc * num_traits::pow(qb.clone(), (e - deg) as usize);
        let den = BigInt::from(self.denom) * num_traits::pow(qb, (e - 1) as usize);
        (acc, den)
    }
}

impl Profile for RatPoly {
    fn deriv(&self, x: f64, order: u8) -> f64 {
        debug_assert!(order <= 3);
        self.eval(x, order)
    }

    fn scaled(&self, a: f64, q: f64) -> (f64, f64) {
        let (hi, lo) = comp_horner(&self.float[0], a / q);
        let (p, pe) = crate::numeric::two_prod(hi, q);
        (p, pe + lo * q)
    }

    fn as_poly(&self) -> Option<&RatPoly> {
        Some(self)
    }
}

pub(crate) fn ratio_to_f64(c: &Ratio<i64>) -> f64 {
    BigRational::new(BigInt::from(*c.numer()), BigInt::from(*c.denom()))
        .to_f64()
        .unwrap_or(f64::NAN)
}

fn parse_ratio(s: &str) -> Result<Ratio<i64>> {
    let bad = |e: std::num::ParseIntError| Error::Parse(format!("coefficient `{s}`: {e}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().map_err(bad)?;
            let d: i64 = d.trim().parse().map_err(bad)?;
            if d == 0 {
                return Err(Error::Parse(format!("coefficient `{s}`: zero denominator")));
            }
            Ok(Ratio::new(n, d))
        }
        None => Ok(Ratio::from_integer(s.trim().parse().map_err(bad)?)),
    }
}

/// Exact `‖num/den‖ < delta` with `den > 0`, `delta` taken as the exact binary
/// value of the double.
pub fn frac_dist_lt_exact(num: &BigInt, den: &BigInt, delta: f64) -> bool {
    let r = num.mod_floor(den);
    let other = den - &r;
    let d = if r < other { r } else { other };
    let (m, k) = dyadic(delta);
    // d / den < m / 2^k  <=>  d * 2^k < m * den
    (d << k) < BigInt::from(m) * den
}

/// Same predicate for 128-bit inputs; exact, falling back to big integers only
/// when the double-precision estimate is too close to call.
pub fn frac_dist_lt_i128(num: i128, den: i128, delta: f64) -> bool {
    let r = num.rem_euclid(den);
    let d = r.min(den - r);
    let approx = d as f64 / den as f64;
    if (approx - delta).abs() > 1e-12 * delta.max(1e-300) + 1e-300 {
        return approx < delta;
    }
    frac_dist_lt_exact(&BigInt::from(num), &BigInt::from(den), delta)
}

/// `x = m / 2^k` exactly for a finite positive double `x < 1`.
fn dyadic(x: f64) -> (u64, usize) {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (m, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    };
    if e >= 0 {
        // x >= 2^52: not reachable for thresholds, treat as integer-scaled
        (m << e.min(11), 0)
    } else {
        (m, (-e) as usize)
    }
}

pub(crate) fn is_integer_ratio(num: &BigInt, den: &BigInt) -> bool {
    (num.mod_floor(den)).is_zero() && !den.is_zero()
}

#[cfg(test)]
fn big_ratio(num: BigInt, den: BigInt) -> BigRational {
    use num_traits::{One, Signed};
    if den.is_negative() {
        BigRational::new(-num, -den)
    } else if den.is_one() {
        BigRational::from_integer(num)
    } else {
        BigRational::new(num, den)
    }
}
