//! Trigonometric polynomials of degree `J` that bound the indicator of an
//! arc `(α, β)` of the circle from above and below.
//!
//! With `ψ(t) = t - ⌊t⌋ - 1/2` the indicator is `β - α + ψ(α - x) + ψ(x - β)`.
//! Vaaler's polynomial `V_J` approximates `ψ` with error at most
//! `Δ_{J+1}(t) / (2J + 2)`, `Δ_N` the Fejér kernel; replacing each `ψ` by
//! `V_J ± Δ_{J+1} / (2J + 2)` gives the majorant and minorant.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{arg, Result};

/// Which side of the indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelbergSystem {
    pub alpha: f64,
    pub beta: f64,
    pub degree: usize,
    /// Coefficients `b_j^+` for `j = -J..=J`, stored at index `j + J`.
    pub b_plus: Vec<Complex64>,
    pub b_minus: Vec<Complex64>,
}

/// `φ(t) = π t (1 - t) cot(π t) + t` on `(0, 1)`.
fn vaaler_weight(t: f64) -> f64 {
    PI * t * (1.0 - t) / (PI * t).tan() + t
}

/// `e(x) = exp(2πix)` with the argument reduced mod 1 first.
pub fn e(x: f64) -> Complex64 {
    let r = x - x.round();
    Complex64::from_polar(1.0, 2.0 * PI * r)
}

impl SelbergSystem {
    pub fn new(alpha: f64, beta: f64, degree: usize) -> Result<Self> {
        if !(alpha < beta && beta < alpha + 1.0) {
            return arg(format!("need alpha < beta < alpha + 1, got ({alpha}, {beta})"));
        }
        if degree == 0 {
            return arg("degree J must be positive");
        }
        let n = degree as f64 + 1.0;
        let len = beta - alpha;
        let mut b_plus = vec![Complex64::new(0.0, 0.0); 2 * degree + 1];
        let mut b_minus = b_plus.clone();
        b_plus[degree] = Complex64::new(len + 1.0 / n, 0.0);
        b_minus[degree] = Complex64::new(len - 1.0 / n, 0.0);
        for j in 1..=degree as i64 {
            let jf = j as f64;
            // Vaaler coefficient c_j of e(jt); c_{-j} = -c_j
            let c = Complex64::new(0.0, vaaler_weight(jf / n) / (2.0 * PI * jf));
            let fejer = (1.0 - jf / n) / (2.0 * n);
            for (sign_j, idx) in [(1i64, degree as i64 + j), (-1, degree as i64 - j)] {
                let jj = (sign_j * j) as f64;
                let (ea, eb) = (e(-jj * alpha), e(-jj * beta));
                // c_{-j} e(-jα) + c_j e(-jβ) for signed j
                let cj = c * sign_j as f64;
                let vaaler = -cj * ea + cj * eb;
                let kernel = (ea + eb) * fejer;
                b_plus[idx as usize] = vaaler + kernel;
                b_minus[idx as usize] = vaaler - kernel;
            }
        }
        Ok(Self { alpha, beta, degree, b_plus, b_minus })
    }

    /// The arc `(-δ, δ)` with `J = ⌊1/δ⌋`.
    pub fn for_delta(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return arg(format!("delta = {delta} must lie in (0, 1/2)"));
        }
        Self::new(-delta, delta, (1.0 / delta).floor() as usize)
    }

    pub fn coeffs(&self, side: Side) -> &[Complex64] {
        match side {
            Side::Plus => &self.b_plus,
            Side::Minus => &self.b_minus,
        }
    }

    /// `b_j` for `|j| <= J`.
    pub fn coeff(&self, side: Side, j: i64) -> Complex64 {
        self.coeffs(side)[(j + self.degree as i64) as usize]
    }

    /// The analytic coefficient bound `1/(J+1) + min(β - α, 1/(π|j|))`.
    pub fn coeff_bound(&self, j: i64) -> f64 {
        let len = self.beta - self.alpha;
        let tail = if j == 0 { len } else { len.min(1.0 / (PI * j.abs() as f64)) };
        1.0 / (self.degree as f64 + 1.0) + tail
    }

    /// Indicator of `(α, β)` on the circle.
    pub fn indicator(&self, x: f64) -> f64 {
        let t = x - self.alpha;
        let t = t - t.floor();
        if t > 0.0 && t < self.beta - self.alpha {
            1.0
        } else {
            0.0
        }
    }

    /// `S^±(x)` together with the discarded imaginary part.
    pub fn eval_complex(&self, side: Side, x: f64) -> Complex64 {
        let step = e(x);
        let j = self.degree as i64;
        let mut z = e(-(j as f64) * x);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, b) in self.coeffs(side).iter().enumerate() {
            if k % 32 == 0 {
                // refresh the running power to stop drift
                z = e((k as i64 - j) as f64 * x);
            }
            acc += b * z;
            z *= step;
        }
        acc
    }

    pub fn eval(&self, side: Side, x: f64) -> f64 {
        self.eval_complex(side, x).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeroth_coefficients() {
        let s = SelbergSystem::new(-0.1, 0.1, 10).unwrap();
        assert!((s.coeff(Side::Plus, 0).re - (0.2 + 1.0 / 11.0)).abs() < 1e-15);
        assert!((s.coeff(Side::Minus, 0).re - (0.2 - 1.0 / 11.0)).abs() < 1e-15);
    }

    #[test]
    fn argument_checks() {
        assert!(SelbergSystem::new(0.2, 0.1, 4).is_err());
        assert!(SelbergSystem::new(0.0, 1.0, 4).is_err());
        assert!(SelbergSystem::new(0.0, 0.5, 0).is_err());
        assert!(SelbergSystem::for_delta(0.5).is_err());
    }

    #[test]
    fn conjugate_symmetric_and_real_valued() {
        let s = SelbergSystem::new(0.13, 0.71, 17).unwrap();
        for side in [Side::Plus, Side::Minus] {
            for j in 1..=17 {
                let d = s.coeff(side, j) - s.coeff(side, -j).conj();
                assert!(d.norm() < 1e-15);
            }
            for k in 0..100 {
                assert!(s.eval_complex(side, k as f64 / 97.0).im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_arc_gives_real_even_coefficients() {
        let s = SelbergSystem::new(-0.25, 0.25, 12).unwrap();
        for side in [Side::Plus, Side::Minus] {
            for j in 1..=12 {
                let (a, b) = (s.coeff(side, j), s.coeff(side, -j));
                assert!((a - b).norm() < 1e-15 && a.im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn periodic() {
        let s = SelbergSystem::new(-0.1, 0.1, 10).unwrap();
        for &x in &[0.0, 0.3, -0.77, 0.5] {
            for side in [Side::Plus, Side::Minus] {
                assert!((s.eval(side, x) - s.eval(side, x + 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sandwich_at_sample_points() {
        let s = SelbergSystem::new(-0.1, 0.1, 10).unwrap();
        assert!(s.eval(Side::Minus, 0.5) <= 0.0 && 0.0 <= s.eval(Side::Plus, 0.5));
        assert!(s.eval(Side::Minus, 0.0) <= 1.0 && 1.0 <= s.eval(Side::Plus, 0.0));
    }

    #[test]
    fn mean_equals_b0_by_quadrature() {
        let s = SelbergSystem::new(-0.25, 0.25, 64).unwrap();
        let n = 1 << 16;
        // trapezoid rule on a periodic function: plain average
        let mean: f64 = (0..n).map(|k| s.eval(Side::Plus, k as f64 / n as f64)).sum::<f64>() / n as f64;
        assert!((mean - (0.5 + 1.0 / 65.0)).abs() < 1e-10, "{mean}");
    }

    #[test]
    fn counting_consistency() {
        let s = SelbergSystem::for_delta(0.07).unwrap();
        let pts: Vec<f64> = (0..500).map(|k| (k as f64 * 0.618_033_988_749_895).sin() * 3.0).collect();
        let count = pts.iter().map(|&x| s.indicator(x)).sum::<f64>();
        let lo: f64 = pts.iter().map(|&x| s.eval(Side::Minus, x)).sum();
        let hi: f64 = pts.iter().map(|&x| s.eval(Side::Plus, x)).sum();
        assert!(lo <= count + 1e-9 && count <= hi + 1e-9);
    }
}
