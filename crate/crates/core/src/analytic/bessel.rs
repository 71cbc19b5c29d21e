//! Integer-order Bessel and Hankel functions of complex argument by power
//! series summed in double-double arithmetic.
//!
//! There is deliberately no asymptotic branch: arguments outside the
//! supported disc are rejected.

use super::dd::{CDd, Dd, DD_EULER, DD_FRAC_1_PI};
use crate::{Error, Result};
use num_complex::Complex64;

/// Largest supported `|z|`.
pub const MAX_ARG: f64 = 30.0;
/// Largest supported `Im z`. Above it `H^(1)` is exponentially smaller than
/// `J` and `Y` and the cancellation exceeds double-double headroom.
pub const MAX_IMAG: f64 = 20.0;
/// Largest supported order.
pub const MAX_ORDER: usize = 20;

const MAX_TERMS: usize = 400;

fn check_range(n: usize, z: Complex64) -> Result<()> {
    if n > MAX_ORDER {
        return Err(Error::Domain(format!("order {n} exceeds {MAX_ORDER}")));
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!("argument {z} is not finite")));
    }
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::Domain("argument z = 0".into()));
    }
    if z.norm() > MAX_ARG {
        return Err(Error::Domain(format!("|z| = {} exceeds {MAX_ARG}", z.norm())));
    }
    if z.im > MAX_IMAG {
        return Err(Error::Domain(format!("Im z = {} exceeds {MAX_IMAG}", z.im)));
    }
    if z.im == 0.0 && z.re < 0.0 {
        return Err(Error::Domain(format!("argument {z} lies on the branch cut")));
    }
    Ok(())
}

/// `J_n(z)` and `Y_n(z)` in double-double precision.
fn jy_dd(n: usize, z: Complex64) -> (CDd, CDd) {
    let zh = CDd::from_c64(z).div_f64(2.0);
    let w = zh * zh;
    let mw = -w;

    // t_0 = (z/2)^n / n!
    let mut t = CDd::ONE;
    for j in 1..=n {
        t = (t * zh).div_f64(j as f64);
    }

    let mut harmonic_k = Dd::ZERO;
    let mut harmonic_nk = (1..=n).fold(Dd::ZERO, |h, j| h + Dd::ONE.div_f64(j as f64));
    let mut sum_j = CDd::ZERO;
    let mut sum_psi = CDd::ZERO;
    let zh_abs = zh.magnitude();
    for k in 0..MAX_TERMS {
        // psi(k+1) + psi(n+k+1) = -2 euler + H_k + H_{n+k}
        let psi = harmonic_k + harmonic_nk - DD_EULER.mul_f64(2.0);
        sum_j = sum_j + t;
        sum_psi = sum_psi + t.scale(psi);
        let tm = t.magnitude();
        if k as f64 > zh_abs && tm <= 1e-34 * sum_j.magnitude().max(sum_psi.magnitude()) {
            break;
        }
        let k1 = (k + 1) as f64;
        t = (t * mw).div_f64(k1 * (k1 + n as f64));
        harmonic_k = harmonic_k + Dd::ONE.div_f64(k1);
        harmonic_nk = harmonic_nk + Dd::ONE.div_f64(k1 + n as f64);
    }
    let j = sum_j;

    // finite part: sum_{k<n} (n-k-1)!/k! (z/2)^{2k}, scaled by (z/2)^{-n}
    let mut finite = CDd::ZERO;
    if n > 0 {
        let mut coeff = (1..n).fold(Dd::ONE, |c, j| c.mul_f64(j as f64));
        let mut wk = CDd::ONE;
        for k in 0..n {
            finite = finite + wk.scale(coeff);
            if k + 1 < n {
                coeff = coeff.div_f64(((n - k - 1) * (k + 1)) as f64);
                wk = wk * w;
            }
        }
        let mut zh_n = CDd::ONE;
        for _ in 0..n {
            zh_n = zh_n * zh;
        }
        finite = finite / zh_n;
    }

    let log_term = zh.ln() * j;
    let y = (log_term.scale(Dd::from_f64(2.0)) - finite - sum_psi).scale(DD_FRAC_1_PI);
    (j, y)
}

fn hankel_dd(n: usize, z: Complex64) -> CDd {
    let (j, y) = jy_dd(n, z);
    j + y.mul_i()
}

/// `(H_n, H_n')` in double-double precision.
fn hankel_with_deriv_dd(n: usize, z: Complex64) -> (CDd, CDd) {
    let h = hankel_dd(n, z);
    let dh = if n == 0 {
        -hankel_dd(1, z)
    } else {
        let zd = CDd::from_c64(z);
        hankel_dd(n - 1, z) - (h / zd).scale(Dd::from_f64(n as f64))
    };
    (h, dh)
}

pub fn bessel_j(n: usize, z: Complex64) -> Result<Complex64> {
    check_range(n, z)?;
    Ok(jy_dd(n, z).0.to_c64())
}

pub fn bessel_y(n: usize, z: Complex64) -> Result<Complex64> {
    check_range(n, z)?;
    Ok(jy_dd(n, z).1.to_c64())
}

/// `H_n^(1)(z) = J_n(z) + i Y_n(z)`.
pub fn hankel1(n: usize, z: Complex64) -> Result<Complex64> {
    check_range(n, z)?;
    Ok(hankel_dd(n, z).to_c64())
}

/// `(H_n^(1))'(z) = H_{n-1}^(1)(z) - (n/z) H_n^(1)(z)`, and `-H_1^(1)` for `n = 0`.
pub fn hankel1_deriv(n: usize, z: Complex64) -> Result<Complex64> {
    check_range(n, z)?;
    if n == 0 {
        check_range(1, z)?;
    }
    Ok(hankel_with_deriv_dd(n, z).1.to_c64())
}

/// `(H_n, H_n', H_n'')`, the second derivative from Bessel's equation.
pub(crate) fn hankel1_jet(n: usize, z: Complex64) -> Result<[Complex64; 3]> {
    check_range(n, z)?;
    let (h, dh) = hankel_with_deriv_dd(n, z);
    let (h, dh) = (h.to_c64(), dh.to_c64());
    let nn = (n * n) as f64;
    let ddh = -dh / z - (1.0 - nn / (z * z)) * h;
    Ok([h, dh, ddh])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn published_table_values() {
        // J_0(1) = 0.7651976865579666, Y_0(1) = 0.08825696421567696
        let h = hankel1(0, c(1.0, 0.0)).unwrap();
        assert!(rel(h, c(0.765_197_686_557_966_6, 0.088_256_964_215_676_96)) < 1e-15);
        // J_1(1) = 0.4400505857449335, Y_1(1) = -0.7812128213002887
        let h = hankel1(1, c(1.0, 0.0)).unwrap();
        assert!(rel(h, c(0.440_050_585_744_933_5, -0.781_212_821_300_288_7)) < 1e-15);
    }

    #[test]
    fn derivative_of_order_zero() {
        for z in [c(0.7, -0.3), c(4.0, 1.0), c(12.0, -6.0)] {
            let d = hankel1_deriv(0, z).unwrap();
            assert_eq!(d, -hankel1(1, z).unwrap());
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(hankel1(21, c(1.0, 0.0)).is_err());
        assert!(hankel1(0, c(0.0, 0.0)).is_err());
        assert!(hankel1(0, c(31.0, 0.0)).is_err());
        assert!(hankel1(0, c(-2.0, 0.0)).is_err());
        assert!(hankel1(3, c(1.0, 25.0)).is_err());
    }

    #[test]
    fn large_real_argument_keeps_precision() {
        // mpmath: J_0(30) = -0.08636798358104021, Y_0(30) = -0.11729573168666403
        let j = bessel_j(0, c(30.0, 0.0)).unwrap();
        let y = bessel_y(0, c(30.0, 0.0)).unwrap();
        assert!((j.re + 0.086_367_983_581_040_21).abs() < 1e-14, "{j}");
        assert!((y.re + 0.117_295_731_686_664_03).abs() < 1e-14, "{y}");
    }
}
