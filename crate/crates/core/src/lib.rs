//! Rational points near dilations of space curves.
//!
//! For a curve `(x, f1(x), f2(x))` and a dilation factor `q`, the crate counts
//! the integers `a` in `[0, q]` with both `‖q f_i(a/q)‖ < δ`, and implements the
//! machinery used to bound that count: tangent-line linearization on short
//! blocks, Selberg majorants and minorants, level-set measures for
//! `j1 x + j2 f(x)`, rational-point sums near planar curves, and a scan harness
//! that fits the observed exponents.

pub mod counting;
pub mod curves;
pub mod error;
pub mod harness;
pub mod kv;
pub mod linearize;
pub mod numeric;
pub mod planar_sums;
pub mod selberg;
pub mod sublevel;

pub use counting::{count_near, count_on_curve, CountResult};
pub use curves::{Component, DualCurve, MongeCurve3, PlanarCurve, Profile, RatPoly};
pub use error::{Error, Result};
pub use numeric::Interval;
