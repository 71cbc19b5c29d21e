//! Special functions, scaled fundamental solutions and semi-analytic
//! reference resonances.

mod bessel;
mod dd;
mod roots;

pub use bessel::{bessel_j, bessel_y, hankel1, hankel1_deriv, MAX_ARG, MAX_IMAG, MAX_ORDER};
pub use roots::{
    count_zeros, find_disk_neumann_references, newton_refine, read_references_csv,
    write_references_csv, ResonanceReference, SearchBox,
};

use crate::media::Medium;
use crate::quadrature::gauss_legendre;
use crate::scaling::{limits, ScalingProfile};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// `h_0^(1)(z) = e^{iz} / (iz)`.
pub fn spherical_h0(z: Complex64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::Singularity("spherical_h0 at z = 0".into()));
    }
    let iz = Complex64::i() * z;
    Ok(iz.exp() / iz)
}

fn spherical_h0_deriv(z: Complex64) -> Complex64 {
    (Complex64::i() * z).exp() * (z + Complex64::i()) / (z * z)
}

/// Complex distance with `Im >= 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexDistance {
    pub value: Complex64,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_points(x: &[f64], y: &[f64], medium: &Medium) -> Result<()> {
    let n = medium.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::Validation(format!(
            "points must have dimension {n} (got {} and {})",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Square root on the branch with non-negative imaginary part.
fn upper_sqrt(q: Complex64) -> Complex64 {
    let s = q.sqrt();
    if s.im < 0.0 {
        -s
    } else {
        s
    }
}

fn complex_distance_from(v: &[Complex64], medium: &Medium) -> Complex64 {
    upper_sqrt(medium.sigma_inv().bilinear(v, v))
}

/// `d_sigma(x, y) = sqrt((r~_x x^ - r_y y^)^T sigma^{-1} (r~_x x^ - r_y y^))`.
///
/// `y` lies on the sphere of radius `r0 = |y|`, which must satisfy
/// `r1 > (sigma_max / sigma_min) r0`.
pub fn d_sigma(
    x: &[f64],
    y: &[f64],
    profile: &ScalingProfile,
    medium: &Medium,
) -> Result<ComplexDistance> {
    check_points(x, y, medium)?;
    let r0 = norm(y);
    let required = medium.sigma_max() / medium.sigma_min() * r0;
    if !(profile.r1() > required) {
        return Err(Error::Precondition(format!(
            "r1 = {} must exceed (sigma_max/sigma_min) r0 = {required}",
            profile.r1()
        )));
    }
    if x == y {
        return Ok(ComplexDistance { value: Complex64::new(0.0, 0.0) });
    }
    let d_tilde = profile.eval(norm(x)).d_tilde;
    let v: Vec<Complex64> = x.iter().zip(y).map(|(xi, yi)| d_tilde * xi - yi).collect();
    Ok(ComplexDistance { value: complex_distance_from(&v, medium) })
}

/// Unscaled kernel `det(sigma)^{-1/2} h_0(omega |sigma^{-1/2}(x - y)|)`.
pub fn green(x: &[f64], y: &[f64], omega: Complex64, medium: &Medium) -> Result<Complex64> {
    check_points(x, y, medium)?;
    if x == y {
        return Err(Error::Singularity("coincident points".into()));
    }
    let v: Vec<Complex64> = x.iter().zip(y).map(|(xi, yi)| Complex64::new(xi - yi, 0.0)).collect();
    let dist = complex_distance_from(&v, medium);
    Ok(medium.det_inv_sqrt() * spherical_h0(omega * dist)?)
}

/// Scaled kernel `det(sigma)^{-1/2} h_0(omega d_sigma(x, y))`.
pub fn scaled_green(
    x: &[f64],
    y: &[f64],
    omega: Complex64,
    profile: &ScalingProfile,
    medium: &Medium,
) -> Result<Complex64> {
    let d = d_sigma(x, y, profile, medium)?;
    if d.value == Complex64::new(0.0, 0.0) {
        return Err(Error::Singularity("coincident points".into()));
    }
    Ok(medium.det_inv_sqrt() * spherical_h0(omega * d.value)?)
}

/// Measured exponential decay of `|e^{i omega d_sigma}|` along a ray and the
/// guaranteed rate `-Re(i omega d0) |d_inf| / sigma_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampingRate {
    pub measured: f64,
    pub bound: f64,
}

/// Number of radii in the least-squares fit of [`damping_rate`].
const DAMPING_SAMPLES: usize = 64;

/// Decay rate along `direction` over `r in [10 r1, 20 r1]`, with the source
/// point fixed at `r0 e_1`.
pub fn damping_rate(
    omega: Complex64,
    profile: &ScalingProfile,
    medium: &Medium,
    direction: &[f64],
    r0: f64,
) -> Result<DampingRate> {
    let lim = limits(profile, medium)?;
    let re = (Complex64::i() * omega * lim.d0).re;
    if !(re < 0.0) {
        return Err(Error::Precondition(format!(
            "Re(i omega d0) = {re} must be negative"
        )));
    }
    let dim = medium.dim();
    let len = norm(direction);
    if direction.len() != dim || len == 0.0 {
        return Err(Error::Validation("direction must be a nonzero vector of the medium dimension".into()));
    }
    let mut y = vec![0.0; dim];
    y[0] = r0;
    let r1 = profile.r1();
    let (mut sr, mut sv, mut srr, mut srv) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..DAMPING_SAMPLES {
        let r = r1 * (10.0 + 10.0 * k as f64 / (DAMPING_SAMPLES - 1) as f64);
        let x: Vec<f64> = direction.iter().map(|c| c / len * r).collect();
        let d = d_sigma(&x, &y, profile, medium)?.value;
        // -log|e^{i omega d}| = Im(omega d)
        let v = (omega * d).im;
        sr += r;
        sv += v;
        srr += r * r;
        srv += r * v;
    }
    let n = DAMPING_SAMPLES as f64;
    let measured = (n * srv - sr * sv) / (n * srr - sr * sr);
    let bound = -re * lim.d_inf.norm() / medium.sigma_max();
    Ok(DampingRate { measured, bound })
}

/// Result of evaluating the layer-potential extension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtensionValue {
    pub value: Complex64,
    /// Relative change between the requested and the doubled quadrature order.
    pub change: f64,
    pub converged: bool,
}

/// Tensor-product sphere quadrature order: Gauss–Legendre in `cos(theta)`,
/// uniform in `phi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SphereQuadrature {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        Self { n_theta: 32, n_phi: 64 }
    }
}

const EXTENSION_TOL: f64 = 1e-6;

/// Outgoing extension of Cauchy data on the sphere `|y| = r0` to a point `x`
/// with `|x| > r1` (3D only):
///
/// `(i omega / 4 pi) int u(y) grad_y G~(x,y).nu(y) - G~(x,y) du/dnu(y) dS(y)`.
#[allow(clippy::too_many_arguments)]
pub fn outgoing_extension(
    trace: &dyn Fn([f64; 3]) -> Complex64,
    normal_derivative: &dyn Fn([f64; 3]) -> Complex64,
    r0: f64,
    x: [f64; 3],
    omega: Complex64,
    profile: &ScalingProfile,
    medium: &Medium,
    order: SphereQuadrature,
) -> Result<ExtensionValue> {
    if medium.dim() != 3 {
        return Err(Error::Validation("outgoing extension is 3D only".into()));
    }
    if !(norm(&x) > profile.r1()) {
        return Err(Error::Precondition(format!(
            "|x| = {} must exceed r1 = {}",
            norm(&x),
            profile.r1()
        )));
    }
    let coarse = extension_sum(trace, normal_derivative, r0, x, omega, profile, medium, order)?;
    let fine_order = SphereQuadrature { n_theta: 2 * order.n_theta, n_phi: 2 * order.n_phi };
    let fine = extension_sum(trace, normal_derivative, r0, x, omega, profile, medium, fine_order)?;
    let diff = (fine - coarse).norm();
    let change = if diff == 0.0 { 0.0 } else { diff / fine.norm() };
    let converged = change <= EXTENSION_TOL;
    if !converged {
        log::warn!("outgoing extension at {x:?}: quadrature change {change:e} exceeds {EXTENSION_TOL:e}");
    }
    Ok(ExtensionValue { value: fine, change, converged })
}

#[allow(clippy::too_many_arguments)]
fn extension_sum(
    trace: &dyn Fn([f64; 3]) -> Complex64,
    normal_derivative: &dyn Fn([f64; 3]) -> Complex64,
    r0: f64,
    x: [f64; 3],
    omega: Complex64,
    profile: &ScalingProfile,
    medium: &Medium,
    order: SphereQuadrature,
) -> Result<Complex64> {
    let (ct, wt) = gauss_legendre(order.n_theta);
    let d_tilde = profile.eval(norm(&x)).d_tilde;
    let scaled_x: Vec<Complex64> = x.iter().map(|c| d_tilde * c).collect();
    let dphi = 2.0 * PI / order.n_phi as f64;
    let det = medium.det_inv_sqrt();
    let mut acc = Complex64::new(0.0, 0.0);
    for (cos_t, w) in ct.iter().zip(&wt) {
        let sin_t = (1.0 - cos_t * cos_t).sqrt();
        for j in 0..order.n_phi {
            let phi = dphi * j as f64;
            let nu = [sin_t * phi.cos(), sin_t * phi.sin(), *cos_t];
            let y = [r0 * nu[0], r0 * nu[1], r0 * nu[2]];
            let v: Vec<Complex64> = scaled_x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let dist = complex_distance_from(&v, medium);
            let kernel = det * spherical_h0(omega * dist)?;
            // grad_y d = -sigma^{-1} v / d
            let sv: Vec<Complex64> = (0..3)
                .map(|i| (0..3).map(|k| medium.sigma_inv().get(i, k) * v[k]).sum())
                .collect();
            let dnu: Complex64 = -(0..3).map(|i| sv[i] * nu[i]).sum::<Complex64>() / dist;
            let dkernel = det * spherical_h0_deriv(omega * dist) * omega * dnu;
            acc += w * dphi * r0 * r0 * (trace(y) * dkernel - kernel * normal_derivative(y));
        }
    }
    Ok(Complex64::i() * omega / (4.0 * PI) * acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spherical_h0_values() {
        let v = spherical_h0(c(PI / 2.0, 0.0)).unwrap();
        assert!((v - c(2.0 / PI, 0.0)).norm() < 1e-15);
        let v = spherical_h0(c(0.0, 1.0)).unwrap();
        assert!((v - c(-(-1.0f64).exp(), 0.0)).norm() < 1e-15);
        assert!(spherical_h0(c(0.0, 0.0)).is_err());
        for z in [c(1.0, 2.0), c(-3.0, 5.0), c(10.0, 0.5)] {
            let m = spherical_h0(z).unwrap().norm();
            assert!((m - (-z.im).exp() / z.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn distance_identity_and_inner_region() {
        let p = ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap();
        let m = Medium::isotropic(2);
        let y = [0.6, 0.8];
        assert_eq!(d_sigma(&y, &y, &p, &m).unwrap().value, c(0.0, 0.0));
        let x = [0.2, -1.1];
        let d = d_sigma(&x, &y, &p, &m).unwrap().value;
        let exact = ((0.2f64 - 0.6).powi(2) + (-1.1f64 - 0.8).powi(2)).sqrt();
        assert_eq!(d.im, 0.0);
        assert!((d.re - exact).abs() < 1e-15);
    }

    #[test]
    fn onset_radius_is_enforced() {
        let p = ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap();
        let m = Medium::diag(&[0.25, 1.0]).unwrap();
        assert!(matches!(
            d_sigma(&[3.0, 0.0], &[1.0, 0.0], &p, &m),
            Err(Error::Precondition(_))
        ));
        assert!(d_sigma(&[3.0, 0.0], &[0.3, 0.0], &p, &m).is_ok());
    }

    #[test]
    fn scaled_kernel_matches_unscaled_inside() {
        let p = ScalingProfile::affine(2.0, c(0.5, 4.0)).unwrap();
        let m = Medium::new(
            crate::media::SymMatrix::from_rows(&[&[1.0, 0.1, 0.0], &[0.1, 1.2, 0.05], &[0.0, 0.05, 0.9]])
                .unwrap(),
        )
        .unwrap();
        let y = [0.5, 0.3, -0.2];
        for x in [[1.0, 0.5, 0.3], [0.0, 0.0, 1.9], [-1.2, 1.0, 0.4]] {
            let w = c(1.3, -0.2);
            let a = scaled_green(&x, &y, w, &p, &m).unwrap();
            let b = green(&x, &y, w, &m).unwrap();
            assert!((a - b).norm() <= 1e-15 * b.norm(), "{a} vs {b}");
        }
    }

    #[test]
    fn isotropic_unscaled_kernel_reduces_to_h0() {
        let m = Medium::isotropic(3);
        let x = [1.0, 2.0, 0.5];
        let y = [0.2, 0.1, 0.0];
        let r = norm(&[0.8, 1.9, 0.5]);
        let g = green(&x, &y, c(2.0, 0.0), &m).unwrap();
        assert!((g - spherical_h0(c(2.0 * r, 0.0)).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn damping_bound_for_strong_scaling() {
        let p = ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap();
        let m = Medium::isotropic(2);
        let rate = damping_rate(c(1.0, 0.0), &p, &m, &[1.0, 0.0], 1.0).unwrap();
        assert!((rate.bound - 8.0).abs() < 1e-12);
        assert!(rate.measured >= 0.95 * rate.bound);
        // omega with Re(i omega d0) >= 0
        assert!(matches!(
            damping_rate(c(-1.0, 0.0), &p, &m, &[1.0, 0.0], 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn zero_data_extends_to_zero() {
        let p = ScalingProfile::affine(1.5, c(0.0, 2.0)).unwrap();
        let m = Medium::isotropic(3);
        let zero = |_: [f64; 3]| c(0.0, 0.0);
        let v = outgoing_extension(&zero, &zero, 1.0, [3.0, 0.0, 0.0], c(1.0, 0.0), &p, &m, SphereQuadrature::default())
            .unwrap();
        assert_eq!(v.value, c(0.0, 0.0));
        assert!(v.converged);
    }
}
