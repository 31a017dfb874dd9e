use std::sync::Arc;

use super::{Profile, RatPoly, BOUNDS_GRID, BOUNDS_INFLATION};
use crate::error::{Error, Result};
use crate::numeric::{bisect, Interval};

/// Tolerance for the bisection that inverts `-f'`.
const G_TOL: f64 = 1e-13;

/// `f` on `I = [xi, eta]` with `0 < c1 <= |f''| <= c2` and `M = 1 + max |f'|`.
///
/// After [`PlanarCurve::extend`] the curve is defined on all of R by its
/// second-order Taylor polynomials at the endpoints.
#[derive(Debug, Clone)]
pub struct PlanarCurve {
    pub id: String,
    f: Arc<dyn Profile>,
    pub interval: Interval,
    pub c1: f64,
    pub c2: f64,
    pub m: f64,
    extended: bool,
}

impl PlanarCurve {
    pub fn with_bounds(
        id: impl Into<String>,
        f: Arc<dyn Profile>,
        interval: Interval,
        c1: f64,
        c2: f64,
        m: f64,
    ) -> Result<Self> {
        if !(c1 > 0.0 && c1 <= c2) {
            return Err(Error::Argument(format!("need 0 < c1 <= c2, got {c1}, {c2}")));
        }
        if m < 1.0 {
            return Err(Error::Argument(format!("M = {m} < 1")));
        }
        if interval.len() <= 0.0 {
            return Err(Error::Argument("empty interval".into()));
        }
        Ok(Self { id: id.into(), f, interval, c1, c2, m, extended: false })
    }

    /// Bounds measured on a grid and inflated.
    pub fn measured(id: impl Into<String>, f: Arc<dyn Profile>, interval: Interval) -> Result<Self> {
        let (mut lo, mut hi, mut slope) = (f64::INFINITY, 0.0f64, 0.0f64);
        let mut sign = 0.0;
        for x in interval.grid(BOUNDS_GRID) {
            let d2 = f.deriv(x, 2);
            if sign == 0.0 {
                sign = d2.signum();
            }
            if d2 == 0.0 || d2.signum() != sign {
                return Err(Error::Argument(format!("f'' vanishes or changes sign near {x}")));
            }
            lo = lo.min(d2.abs());
            hi = hi.max(d2.abs());
            slope = slope.max(f.deriv(x, 1).abs());
        }
        Self::with_bounds(
            id,
            f,
            interval,
            lo / BOUNDS_INFLATION,
            hi * BOUNDS_INFLATION,
            1.0 + slope * BOUNDS_INFLATION,
        )
    }

    /// `x^2` on `[0, 1]`.
    pub fn parabola() -> Self {
        Self::with_bounds("x2", Arc::new(RatPoly::from_ints(&[0, 0, 1])), Interval::UNIT, 2.0, 2.0, 3.0)
            .expect("built-in")
    }

    /// `x^2 / 2` on `[0, 1]`.
    pub fn half_parabola() -> Self {
        let f = RatPoly::parse("0, 0, 1/2").expect("literal");
        Self::with_bounds("half_x2", Arc::new(f), Interval::UNIT, 1.0, 1.0, 2.0).expect("built-in")
    }

    /// `x^2 / 2 + x^3 / 10` on `[0, 1]`: `f'' = 1 + 3x/5`, `max f' = 13/10`.
    pub fn perturbed_parabola() -> Self {
        let f = RatPoly::parse("0, 0, 1/2, 1/10").expect("literal");
        Self::with_bounds("x2_x3", Arc::new(f), Interval::UNIT, 1.0, 1.6, 2.3).expect("built-in")
    }

    pub const BUILTIN_IDS: [&'static str; 3] = ["x2", "half_x2", "x2_x3"];

    pub fn builtin(id: &str) -> Option<Self> {
        match id {
            "x2" => Some(Self::parabola()),
            "half_x2" => Some(Self::half_parabola()),
            "x2_x3" => Some(Self::perturbed_parabola()),
            _ => None,
        }
    }

    pub fn resolve(id: &str) -> Result<Self> {
        Self::builtin(id).ok_or_else(|| {
            Error::Argument(format!(
                "unknown planar curve `{id}` (built-ins: {})",
                Self::BUILTIN_IDS.join(", ")
            ))
        })
    }

    /// The underlying profile `f`, without the Taylor extension.
    pub fn profile(&self) -> &Arc<dyn Profile> {
        &self.f
    }

    pub fn is_extended(&self) -> bool {
        self.extended
    }

    /// The C^2 extension to all of R by endpoint Taylor polynomials.
    pub fn extend(&self) -> Self {
        Self { extended: true, ..self.clone() }
    }

    /// `+1` when `f'' > 0`, `-1` when `f'' < 0`.
    pub fn convexity(&self) -> f64 {
        self.f.deriv(0.5 * (self.interval.lo + self.interval.hi), 2).signum()
    }

    /// `f^(order)(x)`, `order <= 2`, using the extension outside `I` when extended.
    pub fn eval(&self, x: f64, order: u8) -> f64 {
        let Interval { lo, hi } = self.interval;
        if !self.extended || (lo..=hi).contains(&x) {
            return self.f.deriv(x, order);
        }
        let x0 = if x > hi { hi } else { lo };
        let h = x - x0;
        let (v, d1, d2) = (self.f.deriv(x0, 0), self.f.deriv(x0, 1), self.f.deriv(x0, 2));
        match order {
            0 => v + d1 * h + 0.5 * d2 * h * h,
            1 => d1 + d2 * h,
            2 => d2,
            _ => 0.0,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x, 0)
    }

    /// Grid check of `c1 <= |f''| <= c2` and `|f'| <= M - 1` on `I`.
    pub fn validate(&self) -> Result<()> {
        for x in self.interval.grid(BOUNDS_GRID) {
            let d2 = self.f.deriv(x, 2).abs();
            if d2 < self.c1 * (1.0 - 1e-12) || d2 > self.c2 * (1.0 + 1e-12) {
                return Err(Error::Argument(format!("|f''({x})| = {d2} outside [c1, c2]")));
            }
            let d1 = self.f.deriv(x, 1).abs();
            if d1 > (self.m - 1.0) * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Argument(format!("|f'({x})| = {d1} exceeds M - 1")));
            }
        }
        Ok(())
    }

    /// `C = max over I of |x| + |f(x)| + 1`, measured on a grid.
    pub fn c_const(&self) -> f64 {
        self.interval
            .grid(BOUNDS_GRID)
            .map(|x| x.abs() + self.f.deriv(x, 0).abs() + 1.0)
            .fold(0.0, f64::max)
            * BOUNDS_INFLATION
    }
}

/// `g = (-f')^{-1}` on the extended curve and `f*(y) = y g(y) + f(g(y))`.
#[derive(Debug, Clone)]
pub struct DualCurve {
    pub base: PlanarCurve,
    /// `K = [-2M, 2M]`.
    pub k: Interval,
    /// `I' = g(K)`.
    pub i_prime: Interval,
    /// Cached [`PlanarCurve::c_const`].
    pub c: f64,
}

impl DualCurve {
    pub fn new(planar: &PlanarCurve) -> Result<Self> {
        let base = planar.extend();
        let k = Interval { lo: -2.0 * base.m, hi: 2.0 * base.m };
        let c = base.c_const();
        let mut dual = Self { base, k, i_prime: Interval::UNIT, c };
        let (a, b) = (dual.g(k.lo)?, dual.g(k.hi)?);
        dual.i_prime = Interval { lo: a.min(b), hi: a.max(b) };
        Ok(dual)
    }

    /// The unique `x` with `f'(x) = -y`.
    pub fn g(&self, y: f64) -> Result<f64> {
        let b = &self.base;
        let reach = (y.abs() + b.m) / b.c1 + 1.0;
        let (lo, hi) = (b.interval.lo - reach, b.interval.hi + reach);
        bisect(|x| b.eval(x, 1) + y, lo, hi, G_TOL)
    }

    pub fn fstar(&self, y: f64) -> Result<f64> {
        let x = self.g(y)?;
        Ok(y * x + self.base.value(x))
    }
}
