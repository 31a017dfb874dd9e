//! Space curves in Monge form `(x, f1(x), f2(x))`, planar curves with
//! second derivative bounded away from zero, and the dual-curve transform.

mod planar;
mod poly;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::kv::{self, KeyValues};
use crate::numeric::Interval;

pub use planar::{DualCurve, PlanarCurve};
pub use poly::{frac_dist_lt_exact, frac_dist_lt_i128, RatPoly};
pub(crate) use poly::{is_integer_ratio};

/// Grid size used whenever bounds are measured rather than known analytically.
pub const BOUNDS_GRID: usize = 10_000;
/// Inflation applied to grid-measured bounds.
pub const BOUNDS_INFLATION: f64 = 1.01;

/// A real function with derivatives up to order 3.
pub trait Profile: Send + Sync + fmt::Debug {
    /// `order`-th derivative at `x`, `order <= 3`.
    fn deriv(&self, x: f64, order: u8) -> f64;

    /// `q f(a/q)` as an unevaluated sum `hi + lo`.
    fn scaled(&self, a: f64, q: f64) -> (f64, f64) {
        (q * self.deriv(a / q, 0), 0.0)
    }

    fn as_poly(&self) -> Option<&RatPoly> {
        None
    }
}

type DerivFn = dyn Fn(f64, u8) -> f64 + Send + Sync;

/// A profile backed by a closure `(x, order) -> f^(order)(x)`.
#[derive(Clone)]
pub struct FnProfile {
    name: String,
    f: Arc<DerivFn>,
}

impl FnProfile {
    pub fn new(name: impl Into<String>, f: impl Fn(f64, u8) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }
}

impl fmt::Debug for FnProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnProfile({})", self.name)
    }
}

impl Profile for FnProfile {
    fn deriv(&self, x: f64, order: u8) -> f64 {
        (self.f)(x, order)
    }
}

/// Which of the two coordinate functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    F1,
    F2,
}

impl Component {
    pub fn index(self) -> usize {
        match self {
            Component::F1 => 0,
            Component::F2 => 1,
        }
    }
}

impl TryFrom<u8> for Component {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Component::F1),
            2 => Ok(Component::F2),
            _ => Err(Error::Argument(format!("component must be 1 or 2, got {v}"))),
        }
    }
}

/// Explicit derivative bounds supplied with a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveBounds {
    /// Lower bound for `|f1''|` on the domain.
    pub c3: f64,
    /// Upper bound for every `|f_i^(k)|`, `k <= 3`, and at least 1.
    pub c4: f64,
}

/// The space curve `x -> (x, f1(x), f2(x))` over a subinterval of `[0, 1]`.
#[derive(Debug, Clone)]
pub struct MongeCurve3 {
    pub id: String,
    f: [Arc<dyn Profile>; 2],
    coeffs: Option<[RatPoly; 2]>,
    pub bounds: CurveBounds,
    pub domain: Interval,
    /// Set when the torsion determinant is nonzero on every grid point.
    pub torsion: bool,
}

impl MongeCurve3 {
    /// Curve from two rational polynomials. Missing bounds are measured on a
    /// grid and inflated.
    pub fn from_polys(
        id: impl Into<String>,
        f1: RatPoly,
        f2: RatPoly,
        domain: Interval,
        bounds: Option<CurveBounds>,
    ) -> Result<Self> {
        check_domain(domain)?;
        let p1: Arc<dyn Profile> = Arc::new(f1.clone());
        let p2: Arc<dyn Profile> = Arc::new(f2.clone());
        Self::assemble(id.into(), [p1, p2], Some([f1, f2]), domain, bounds)
    }

    /// Curve from arbitrary evaluators (no exact path).
    pub fn from_profiles(
        id: impl Into<String>,
        f1: Arc<dyn Profile>,
        f2: Arc<dyn Profile>,
        domain: Interval,
        bounds: Option<CurveBounds>,
    ) -> Result<Self> {
        check_domain(domain)?;
        Self::assemble(id.into(), [f1, f2], None, domain, bounds)
    }

    fn assemble(
        id: String,
        f: [Arc<dyn Profile>; 2],
        coeffs: Option<[RatPoly; 2]>,
        domain: Interval,
        bounds: Option<CurveBounds>,
    ) -> Result<Self> {
        let mut curve = Self {
            id,
            f,
            coeffs,
            bounds: CurveBounds { c3: 0.0, c4: 1.0 },
            domain,
            torsion: false,
        };
        curve.bounds = match bounds {
            Some(b) => b,
            None => curve.measure_bounds(),
        };
        curve.torsion = domain
            .grid(BOUNDS_GRID)
            .all(|x| curve.torsion_at(x).abs() > 1e-12);
        Ok(curve)
    }

    fn measure_bounds(&self) -> CurveBounds {
        let mut max_abs: f64 = 0.0;
        let mut min_f1pp = f64::INFINITY;
        for x in self.domain.grid(BOUNDS_GRID) {
            for f in &self.f {
                for k in 0..=3 {
                    max_abs = max_abs.max(f.deriv(x, k).abs());
                }
            }
            min_f1pp = min_f1pp.min(self.f[0].deriv(x, 2).abs());
        }
        CurveBounds {
            c3: min_f1pp / BOUNDS_INFLATION,
            c4: (max_abs * BOUNDS_INFLATION).max(1.0),
        }
    }

    /// `(x, x^2, x^3)`.
    pub fn veronese() -> Self {
        Self::from_polys(
            "veronese",
            RatPoly::from_ints(&[0, 0, 1]),
            RatPoly::from_ints(&[0, 0, 0, 1]),
            Interval::UNIT,
            Some(CurveBounds { c3: 2.0, c4: 6.0 }),
        )
        .expect("built-in curve")
    }

    /// `(x, x^2, 0)`: a planar parabola, torsion identically zero.
    pub fn embedded_parabola() -> Self {
        Self::from_polys(
            "parabola",
            RatPoly::from_ints(&[0, 0, 1]),
            RatPoly::from_ints(&[0]),
            Interval::UNIT,
            Some(CurveBounds { c3: 2.0, c4: 2.0 }),
        )
        .expect("built-in curve")
    }

    /// `(x, x^2/2 + x^3/6, x^3/6 + x^4/24)`; torsion `1 + x + x^2/2`.
    pub fn generic_cubic() -> Self {
        Self::from_polys(
            "cubic",
            RatPoly::parse("0, 0, 1/2, 1/6").expect("literal"),
            RatPoly::parse("0, 0, 0, 1/6, 1/24").expect("literal"),
            Interval::UNIT,
            Some(CurveBounds { c3: 1.0, c4: 2.0 }),
        )
        .expect("built-in curve")
    }

    pub const BUILTIN_IDS: [&'static str; 3] = ["veronese", "parabola", "cubic"];

    pub fn builtin(id: &str) -> Option<Self> {
        match id {
            "veronese" => Some(Self::veronese()),
            "parabola" => Some(Self::embedded_parabola()),
            "cubic" => Some(Self::generic_cubic()),
            _ => None,
        }
    }

    /// A built-in id, or else a path to a curve definition file.
    pub fn resolve(id_or_path: &str) -> Result<Self> {
        match Self::builtin(id_or_path) {
            Some(c) => Ok(c),
            None if Path::new(id_or_path).exists() => Self::from_file(Path::new(id_or_path)),
            None => Err(Error::Argument(format!(
                "unknown curve `{id_or_path}` (built-ins: {})",
                Self::BUILTIN_IDS.join(", ")
            ))),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_kv(&KeyValues::read(path)?)
    }

    /// Reads `id`, `f1_coeffs`, `f2_coeffs` and optional `domain`, `c3`, `c4`.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let id = kv.require("id")?;
        let f1 = RatPoly::parse(kv.require("f1_coeffs")?)?;
        let f2 = RatPoly::parse(kv.require("f2_coeffs")?)?;
        let domain = match kv.get("domain") {
            Some(v) => parse_interval(v)?,
            None => Interval::UNIT,
        };
        let bounds = match (kv.get_f64("c3")?, kv.get_f64("c4")?) {
            (None, None) => None,
            (c3, c4) => {
                let mut curve = Self::from_polys(id, f1.clone(), f2.clone(), domain, None)?;
                if let Some(c3) = c3 {
                    curve.bounds.c3 = c3;
                }
                if let Some(c4) = c4 {
                    curve.bounds.c4 = c4;
                }
                Some(curve.bounds)
            }
        };
        Self::from_polys(id, f1, f2, domain, bounds)
    }

    pub fn component(&self, c: Component) -> &dyn Profile {
        self.f[c.index()].as_ref()
    }

    pub fn coeff_form(&self) -> Option<&[RatPoly; 2]> {
        self.coeffs.as_ref()
    }

    /// `f_component^(order)(x)`; `x` must lie in the domain.
    pub fn eval_derivatives(&self, x: f64, component: Component, order: u8) -> Result<f64> {
        self.check_point(x)?;
        if order > 3 {
            return Err(Error::Argument(format!("order {order} > 3")));
        }
        Ok(self.f[component.index()].deriv(x, order))
    }

    /// Exact value at a rational point; requires the coefficient form.
    pub fn eval_derivatives_exact(
        &self,
        x: &BigRational,
        component: Component,
        order: u8,
    ) -> Result<BigRational> {
        let coeffs = self
            .coeffs
            .as_ref()
            .ok_or_else(|| Error::Unsupported(format!("curve `{}` has no coefficient form", self.id)))?;
        let xf = num_traits::ToPrimitive::to_f64(x).unwrap_or(f64::NAN);
        self.check_point(xf)?;
        if order > 3 {
            return Err(Error::Argument(format!("order {order} > 3")));
        }
        Ok(coeffs[component.index()].eval_exact(x, order))
    }

    /// `f1'' f2''' - f2'' f1'''` at `x`.
    pub fn torsion(&self, x: f64) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.torsion_at(x))
    }

    fn torsion_at(&self, x: f64) -> f64 {
        let [f1, f2] = &self.f;
        f1.deriv(x, 2) * f2.deriv(x, 3) - f2.deriv(x, 2) * f1.deriv(x, 3)
    }

    fn check_point(&self, x: f64) -> Result<()> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain { x, lo: self.domain.lo, hi: self.domain.hi })
        }
    }

    /// Same curve with the roles of `f1` and `f2` exchanged.
    pub fn swapped(&self) -> Self {
        let mut out = self.clone();
        out.f.swap(0, 1);
        if let Some(c) = out.coeffs.as_mut() {
            c.swap(0, 1);
        }
        out.bounds.c3 = out
            .domain
            .grid(BOUNDS_GRID)
            .map(|x| out.f[0].deriv(x, 2).abs())
            .fold(f64::INFINITY, f64::min)
            / BOUNDS_INFLATION;
        out
    }

    /// Same curve restricted to a subinterval of its domain; bounds are kept.
    pub fn restricted(&self, domain: Interval) -> Result<Self> {
        if domain.lo < self.domain.lo || domain.hi > self.domain.hi {
            return Err(Error::Argument(format!(
                "[{}, {}] is not inside the curve domain",
                domain.lo, domain.hi
            )));
        }
        let mut out = self.clone();
        out.domain = domain;
        Ok(out)
    }

    /// Grid check of the type invariants; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let c4 = self.bounds.c4;
        if c4 < 1.0 {
            return Err(Error::Argument(format!("c4 = {c4} < 1")));
        }
        for x in self.domain.grid(BOUNDS_GRID) {
            for (i, f) in self.f.iter().enumerate() {
                for k in 0..=3 {
                    let v = f.deriv(x, k).abs();
                    if v > c4 * (1.0 + 1e-12) {
                        return Err(Error::Argument(format!(
                            "|f{}^({k})({x})| = {v} exceeds c4 = {c4}",
                            i + 1
                        )));
                    }
                }
            }
            if self.torsion && self.torsion_at(x) == 0.0 {
                return Err(Error::Argument(format!("torsion vanishes at {x}")));
            }
            if let Some(coeffs) = &self.coeffs {
                for (p, f) in coeffs.iter().zip(&self.f) {
                    for k in 0..=3 {
                        let d = (p.deriv(x, k) - f.deriv(x, k)).abs();
                        if d > 1e-12 {
                            return Err(Error::Argument(format!(
                                "coefficient form disagrees with evaluator at {x} by {d}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Splits the domain into maximal runs on which `|f1''| >= c3` (kept
    /// as is) or `|f2''| >= c3` (roles swapped), certified on a grid.
    pub fn wlog_split(&self, c3: f64) -> Result<Vec<WlogPiece>> {
        let pts: Vec<f64> = self.domain.grid(BOUNDS_GRID).collect();
        let mut pieces: Vec<WlogPiece> = Vec::new();
        for w in pts.windows(2) {
            let ok = |f: &Arc<dyn Profile>| w.iter().all(|&x| f.deriv(x, 2).abs() >= c3);
            let swapped = if ok(&self.f[0]) {
                false
            } else if ok(&self.f[1]) {
                true
            } else {
                return Err(Error::Argument(format!(
                    "neither |f1''| nor |f2''| reaches {c3} near x = {}",
                    w[0]
                )));
            };
            match pieces.last_mut() {
                Some(p) if p.swapped == swapped => p.domain.hi = w[1],
                _ => pieces.push(WlogPiece {
                    domain: Interval { lo: w[0], hi: w[1] },
                    swapped,
                }),
            }
        }
        Ok(pieces)
    }
}

/// One piece of [`MongeCurve3::wlog_split`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlogPiece {
    pub domain: Interval,
    pub swapped: bool,
}

fn check_domain(d: Interval) -> Result<()> {
    if d.lo < 0.0 || d.hi > 1.0 || d.lo >= d.hi {
        return Err(Error::Argument(format!(
            "domain [{}, {}] must be a nondegenerate subinterval of [0, 1]",
            d.lo, d.hi
        )));
    }
    Ok(())
}

pub(crate) fn parse_interval(v: &str) -> Result<Interval> {
    let parts: Vec<&str> = kv::split_list(v).collect();
    if parts.len() != 2 {
        return Err(Error::Parse(format!("interval `{v}`: expected `lo, hi`")));
    }
    Interval::new(kv::parse_f64("interval", parts[0])?, kv::parse_f64("interval", parts[1])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eval_derivative_examples() {
        let v = MongeCurve3::veronese();
        assert_eq!(v.eval_derivatives(0.5, Component::F2, 2).unwrap(), 3.0);
        assert_eq!(v.eval_derivatives(0.5, Component::F1, 3).unwrap(), 0.0);
        let p = MongeCurve3::embedded_parabola();
        assert_eq!(p.eval_derivatives(0.7, Component::F2, 0).unwrap(), 0.0);
        assert!(matches!(
            v.eval_derivatives(1.5, Component::F1, 0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn torsion_examples() {
        let v = MongeCurve3::veronese();
        let p = MongeCurve3::embedded_parabola();
        for x in Interval::UNIT.grid(101) {
            assert_eq!(v.torsion(x).unwrap(), 12.0);
            assert_eq!(p.torsion(x).unwrap(), 0.0);
        }
        assert!(v.torsion && !p.torsion);
        // (x, x^2/2, x^4/24) at x = 1: 1*1 - 0.5*0
        let c = MongeCurve3::from_polys(
            "t",
            RatPoly::parse("0,0,1/2").unwrap(),
            RatPoly::parse("0,0,0,0,1/24").unwrap(),
            Interval::UNIT,
            None,
        )
        .unwrap();
        assert_eq!(c.torsion(1.0).unwrap(), 1.0);
        let g = MongeCurve3::generic_cubic();
        assert!((g.torsion(1.0).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn builtins_satisfy_invariants() {
        for id in MongeCurve3::BUILTIN_IDS {
            MongeCurve3::builtin(id).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn measured_bounds_are_inflated() {
        let v = MongeCurve3::veronese();
        let [f1, f2] = v.coeff_form().unwrap().clone();
        let m = MongeCurve3::from_polys("m", f1, f2, Interval::UNIT, None).unwrap();
        assert!((m.bounds.c4 - 6.06).abs() < 1e-12);
        assert!((m.bounds.c3 - 2.0 / 1.01).abs() < 1e-12);
        m.validate().unwrap();
    }

    #[test]
    fn coeff_form_matches_evaluator_on_random_rationals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let curve = MongeCurve3::generic_cubic();
        for _ in 0..1000 {
            let den: i64 = rng.gen_range(1..10_000);
            let num: i64 = rng.gen_range(0..=den);
            let xr = BigRational::new(BigInt::from(num), BigInt::from(den));
            let x = num as f64 / den as f64;
            for c in [Component::F1, Component::F2] {
                for k in 0..=3 {
                    let exact = curve.eval_derivatives_exact(&xr, c, k).unwrap();
                    let exact = num_traits::ToPrimitive::to_f64(&exact).unwrap();
                    let float = curve.eval_derivatives(x, c, k).unwrap();
                    assert!((exact - float).abs() < 1e-12, "{num}/{den} {c:?} {k}");
                }
            }
        }
    }

    #[test]
    fn exact_path_requires_coefficients() {
        let f: Arc<dyn Profile> = Arc::new(FnProfile::new("sq", |x, k| match k {
            0 => x * x,
            1 => 2.0 * x,
            2 => 2.0,
            _ => 0.0,
        }));
        let c = MongeCurve3::from_profiles("fn", f.clone(), f, Interval::UNIT, None).unwrap();
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        assert!(matches!(
            c.eval_derivatives_exact(&half, Component::F1, 0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn curve_file_round_trip() {
        let kv = KeyValues::parse(
            "id = twisted\nf1_coeffs = 0, 0, 1/2, 1/6\nf2_coeffs = 0/1, 0, 0, 1/6, 1/24\ndomain = 0, 1\n",
        )
        .unwrap();
        let c = MongeCurve3::from_kv(&kv).unwrap();
        assert_eq!(c.id, "twisted");
        assert!(c.torsion);
        assert!((c.bounds.c4 - 2.0 * 1.01).abs() < 1e-9);
        let kv = KeyValues::parse("id = x\nf1_coeffs = 0,0,1\nf2_coeffs = 0,0,0,1\nc4 = 6\n").unwrap();
        let c = MongeCurve3::from_kv(&kv).unwrap();
        assert_eq!(c.bounds.c4, 6.0);
        assert!(MongeCurve3::from_kv(&KeyValues::parse("id = x\nf1_coeffs = 0,1").unwrap()).is_err());
    }

    #[test]
    fn wlog_split_swaps_where_f1_flattens() {
        // f1'' = 6x vanishes at 0, f2'' = 2 everywhere
        let c = MongeCurve3::from_polys(
            "s",
            RatPoly::from_ints(&[0, 0, 0, 1]),
            RatPoly::from_ints(&[0, 0, 1]),
            Interval::UNIT,
            None,
        )
        .unwrap();
        let pieces = c.wlog_split(1.0).unwrap();
        assert_eq!(pieces.len(), 2);
        assert!(pieces[0].swapped && !pieces[1].swapped);
        assert_eq!(pieces[0].domain.lo, 0.0);
        assert_eq!(pieces[1].domain.hi, 1.0);
        assert_eq!(pieces[0].domain.hi, pieces[1].domain.lo);
        assert!((pieces[1].domain.lo - 1.0 / 6.0).abs() < 2e-4);
        let whole = MongeCurve3::veronese().wlog_split(2.0).unwrap();
        assert_eq!(whole, vec![WlogPiece { domain: Interval::UNIT, swapped: false }]);
        assert!(MongeCurve3::embedded_parabola().swapped().wlog_split(3.0).is_err());
    }
}
