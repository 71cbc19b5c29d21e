//! Double-double arithmetic (about 32 significant digits), real and complex.
//!
//! Used to sum the alternating Bessel power series without losing the
//! digits that cancel for large arguments.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

pub(crate) const DD_FRAC_1_PI: Dd = Dd { hi: std::f64::consts::FRAC_1_PI, lo: -1.9678676675182486e-17 };
pub(crate) const DD_EULER: Dd = Dd { hi: 0.5772156649015329, lo: -4.942915152430645e-18 };
const DD_LN2: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.3190468138462996e-17 };

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let r = self - Dd::from_f64(b).mul_f64(q1);
        let q2 = r.hi / b;
        let r = r - Dd::from_f64(b).mul_f64(q2);
        let q3 = r.hi / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }

    pub fn sqr(self) -> Self {
        self * self
    }

    /// Multiplication by a power of two (exact).
    fn ldexp(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        Dd { hi: self.hi * s, lo: self.lo * s }
    }

    pub fn exp(self) -> Self {
        if self.hi == 0.0 {
            return Dd::ONE;
        }
        let k = (self.hi / DD_LN2.hi).round();
        let r = self - DD_LN2.mul_f64(k);
        // exp(r) = (exp(r / 32))^32 keeps the Taylor series short
        let s = r.ldexp(-5);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for j in 1..40 {
            term = (term * s).div_f64(j as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-34 * sum.hi.abs() {
                break;
            }
        }
        for _ in 0..5 {
            sum = sum.sqr();
        }
        sum.ldexp(k as i32)
    }

    /// `(sin x, cos x)` for moderate `|x|` (used with `|x| <= pi`).
    pub fn sin_cos(self) -> (Self, Self) {
        let x2 = self.sqr();
        let mut term = self;
        let mut sin = self;
        for j in 1..60 {
            term = -(term * x2).div_f64(((2 * j) * (2 * j + 1)) as f64);
            sin = sin + term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        let mut term = Dd::ONE;
        let mut cos = Dd::ONE;
        for j in 1..60 {
            term = -(term * x2).div_f64(((2 * j - 1) * (2 * j)) as f64);
            cos = cos + term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        (sin, cos)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let e = e + t;
        let (s, e) = quick_two_sum(s, e);
        let e = e + f;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::from_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

/// Complex double-double.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct CDd {
    pub re: Dd,
    pub im: Dd,
}

impl CDd {
    pub const ZERO: CDd = CDd { re: Dd::ZERO, im: Dd::ZERO };
    pub const ONE: CDd = CDd { re: Dd::ONE, im: Dd::ZERO };

    pub fn from_c64(z: Complex64) -> Self {
        CDd { re: Dd::from_f64(z.re), im: Dd::from_f64(z.im) }
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn scale(self, s: Dd) -> Self {
        CDd { re: self.re * s, im: self.im * s }
    }

    pub fn div_f64(self, s: f64) -> Self {
        CDd { re: self.re.div_f64(s), im: self.im.div_f64(s) }
    }

    pub fn mul_i(self) -> Self {
        CDd { re: -self.im, im: self.re }
    }

    pub fn norm_sqr(self) -> Dd {
        self.re.sqr() + self.im.sqr()
    }

    pub fn magnitude(self) -> f64 {
        self.to_c64().norm()
    }

    pub fn inv(self) -> Self {
        let n = self.norm_sqr();
        CDd { re: self.re / n, im: -(self.im / n) }
    }

    pub fn exp(self) -> Self {
        let m = self.re.exp();
        let (s, c) = self.im.sin_cos();
        CDd { re: m * c, im: m * s }
    }

    /// Principal logarithm, refined from the f64 value by one Newton step on `exp`.
    pub fn ln(self) -> Self {
        let w0 = self.to_c64().ln();
        let w0 = CDd::from_c64(w0);
        let correction = self * (-w0).exp() - CDd::ONE;
        w0 + correction
    }
}

impl Add for CDd {
    type Output = CDd;
    fn add(self, b: CDd) -> CDd {
        CDd { re: self.re + b.re, im: self.im + b.im }
    }
}

impl Sub for CDd {
    type Output = CDd;
    fn sub(self, b: CDd) -> CDd {
        CDd { re: self.re - b.re, im: self.im - b.im }
    }
}

impl Neg for CDd {
    type Output = CDd;
    fn neg(self) -> CDd {
        CDd { re: -self.re, im: -self.im }
    }
}

impl Mul for CDd {
    type Output = CDd;
    fn mul(self, b: CDd) -> CDd {
        CDd {
            re: self.re * b.re - self.im * b.im,
            im: self.re * b.im + self.im * b.re,
        }
    }
}

impl Div for CDd {
    type Output = CDd;
    fn div(self, b: CDd) -> CDd {
        self * b.inv()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_recovers_thirds_beyond_f64() {
        let third = Dd::ONE.div_f64(3.0);
        let back = third.mul_f64(3.0) - Dd::ONE;
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn exp_and_log_are_inverse() {
        for z in [
            Complex64::new(0.3, 0.2),
            Complex64::new(7.5, -1.5),
            Complex64::new(0.05, 14.0),
            Complex64::new(-3.0, -0.5),
        ] {
            let w = CDd::from_c64(z);
            let back = w.ln().exp() - w;
            assert!(back.magnitude() < 1e-28 * z.norm(), "{z}: {}", back.magnitude());
        }
        let e = Dd::ONE.exp();
        // e = 2.718281828459045 + 1.4456468917292502e-16
        assert!((e - Dd { hi: std::f64::consts::E, lo: 1.4456468917292502e-16 }).to_f64().abs() < 1e-29);
    }
}
