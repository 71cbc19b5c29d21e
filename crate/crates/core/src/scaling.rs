//! Radial complex scaling profiles and the quantities derived from them.
//!
//! A profile `alpha_tilde(r)` vanishes for `r <= r1`; with a complex damping
//! strength `gamma` it defines
//!
//! ```text
//! d_tilde = 1 + gamma * alpha_tilde
//! r_tilde = d_tilde * r
//! alpha   = r * alpha_tilde' + alpha_tilde
//! d       = 1 + gamma * alpha
//! ```
//!
//! so that `d r_tilde / dr = d`.

use crate::media::Medium;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Number of geometric sample radii used for suprema.
const SUP_SAMPLES: usize = 2048;
/// Radii at which limits are evaluated for profiles without a closed form.
const LIMIT_RADIUS_FACTORS: (f64, f64) = (1e6, 1e7);
const LIMIT_AGREEMENT: f64 = 1e-8;

/// User supplied profile: returns `(alpha_tilde(r), alpha_tilde'(r))` for `r > r1`.
pub type ProfileFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

#[derive(Clone)]
pub enum ProfileKind {
    /// `alpha_tilde(r) = 1 - r1 / r`, which gives `alpha = 1` beyond `r1`.
    Affine,
    /// Quintic C² ramp of the given width rising to `amplitude`, constant after.
    Ramp { width: f64, amplitude: f64 },
    /// `amplitude * rho^2 / (1 + rho^2)` with `rho = (r - r1) / scale`.
    SmoothedPolynomial { scale: f64, amplitude: f64 },
    Custom(ProfileFn),
}

impl fmt::Debug for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Affine => write!(f, "Affine"),
            Self::Ramp { width, amplitude } => f
                .debug_struct("Ramp")
                .field("width", width)
                .field("amplitude", amplitude)
                .finish(),
            Self::SmoothedPolynomial { scale, amplitude } => f
                .debug_struct("SmoothedPolynomial")
                .field("scale", scale)
                .field("amplitude", amplitude)
                .finish(),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScalingProfile {
    kind: ProfileKind,
    r1: f64,
    gamma: Complex64,
}

/// Pointwise scaling quantities at a radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingState {
    pub r: f64,
    pub alpha_tilde: f64,
    pub alpha: f64,
    pub d_tilde: Complex64,
    pub d: Complex64,
    pub r_tilde: Complex64,
}

/// Limits and suprema of a profile in a given medium.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingLimits {
    pub d0: Complex64,
    pub d_inf: Complex64,
    pub tau_star: f64,
    pub psi_star: f64,
    /// Set when `cos(tau_star) <= 1 - sigma_min / sigma_max`: psi is then the
    /// argument of a number with non-positive real part.
    pub psi_flagged: bool,
}

/// Variants of the scaling quantities continued constantly below `r1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HatState {
    pub alpha_hat: f64,
    pub d_hat: Complex64,
    pub tau_hat: f64,
    pub psi_hat: f64,
}

/// Argument on `[-pi, pi)`.
pub fn arg(z: Complex64) -> f64 {
    let a = z.arg();
    if a >= PI {
        -PI
    } else {
        a
    }
}

fn quintic(t: f64) -> (f64, f64) {
    (
        t * t * t * (10.0 - 15.0 * t + 6.0 * t * t),
        30.0 * t * t * (1.0 - t) * (1.0 - t),
    )
}

impl ScalingProfile {
    pub fn new(kind: ProfileKind, r1: f64, gamma: Complex64) -> Result<Self> {
        if !(r1 > 0.0 && r1.is_finite()) {
            return Err(Error::Validation(format!("r1 = {r1} must be positive")));
        }
        if !(gamma.re >= 0.0 && gamma.im > 0.0) {
            return Err(Error::Validation(format!(
                "gamma = {gamma} needs Re >= 0 and Im > 0"
            )));
        }
        match &kind {
            ProfileKind::Ramp { width, amplitude }
            | ProfileKind::SmoothedPolynomial { scale: width, amplitude } => {
                if !(*width > 0.0 && *amplitude > 0.0) {
                    return Err(Error::Validation(
                        "profile width and amplitude must be positive".into(),
                    ));
                }
            }
            ProfileKind::Affine | ProfileKind::Custom(_) => {}
        }
        Ok(Self { kind, r1, gamma })
    }

    pub fn affine(r1: f64, gamma: Complex64) -> Result<Self> {
        Self::new(ProfileKind::Affine, r1, gamma)
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn gamma(&self) -> Complex64 {
        self.gamma
    }

    /// Same profile shape with a different damping strength.
    pub fn with_gamma(&self, gamma: Complex64) -> Result<Self> {
        Self::new(self.kind.clone(), self.r1, gamma)
    }

    /// `(alpha_tilde, d alpha_tilde / dr)`, taking the right-sided derivative at `r1`.
    pub fn alpha_tilde_with_derivative(&self, r: f64) -> (f64, f64) {
        if r <= self.r1 {
            return (0.0, 0.0);
        }
        let r1 = self.r1;
        match &self.kind {
            ProfileKind::Affine => (1.0 - r1 / r, r1 / (r * r)),
            ProfileKind::Ramp { width, amplitude } => {
                let t = (r - r1) / width;
                if t >= 1.0 {
                    (*amplitude, 0.0)
                } else {
                    let (s, ds) = quintic(t);
                    (amplitude * s, amplitude * ds / width)
                }
            }
            ProfileKind::SmoothedPolynomial { scale, amplitude } => {
                let rho = (r - r1) / scale;
                let q = 1.0 + rho * rho;
                (amplitude * rho * rho / q, amplitude * 2.0 * rho / (q * q * scale))
            }
            ProfileKind::Custom(f) => f(r),
        }
    }

    pub fn eval(&self, r: f64) -> ScalingState {
        let (at, dat) = self.alpha_tilde_with_derivative(r);
        let alpha = if r <= self.r1 { 0.0 } else { r * dat + at };
        let d_tilde = 1.0 + self.gamma * at;
        ScalingState {
            r,
            alpha_tilde: at,
            alpha,
            d_tilde,
            d: 1.0 + self.gamma * alpha,
            r_tilde: d_tilde * r,
        }
    }

    /// `tau(r) = arg(d_tilde / d)`.
    pub fn tau(&self, r: f64) -> f64 {
        let s = self.eval(r);
        arg(s.d_tilde / s.d)
    }

    /// `lim alpha(rho)` as `rho -> r1+`.
    pub fn alpha_at_onset(&self) -> f64 {
        match &self.kind {
            ProfileKind::Affine => 1.0,
            ProfileKind::Ramp { .. } | ProfileKind::SmoothedPolynomial { .. } => 0.0,
            ProfileKind::Custom(_) => self.eval(self.r1 * (1.0 + 1e-12)).alpha,
        }
    }

    /// `lim d_tilde(r)` as `r -> infinity`.
    pub fn d_inf(&self) -> Result<Complex64> {
        match &self.kind {
            ProfileKind::Affine => Ok(1.0 + self.gamma),
            ProfileKind::Ramp { amplitude, .. } => Ok(1.0 + self.gamma * amplitude),
            _ => {
                let a = self.eval(LIMIT_RADIUS_FACTORS.0 * self.r1).d_tilde;
                let b = self.eval(LIMIT_RADIUS_FACTORS.1 * self.r1).d_tilde;
                if (a - b).norm() > LIMIT_AGREEMENT * b.norm() {
                    return Err(Error::Validation(format!(
                        "d_tilde does not settle: {a} at 1e6 r1 vs {b} at 1e7 r1"
                    )));
                }
                Ok(b)
            }
        }
    }

    fn sample_radii(&self) -> Vec<f64> {
        let r1 = self.r1;
        let mut radii: Vec<f64> = (0..SUP_SAMPLES)
            .map(|k| r1 * 1e3_f64.powf(k as f64 / (SUP_SAMPLES - 1) as f64))
            .collect();
        radii[0] = r1 * (1.0 + 1e-12);
        if let ProfileKind::Ramp { width, .. } = self.kind {
            radii.extend((1..SUP_SAMPLES).map(|k| r1 + width * k as f64 / SUP_SAMPLES as f64));
            radii.sort_by(f64::total_cmp);
        }
        radii
    }

    /// Supremum of `f` over `(r1, 1e3 r1]` by dense sampling plus
    /// golden-section refinement around the best sample.
    pub fn sampled_sup(&self, f: impl Fn(f64) -> f64) -> f64 {
        let radii = self.sample_radii();
        let values: Vec<f64> = radii.iter().map(|&r| f(r)).collect();
        let (best, &vbest) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty sample set");
        let lo = radii[best.saturating_sub(1)];
        let hi = radii[(best + 1).min(radii.len() - 1)];
        vbest.max(golden_max(&f, lo, hi))
    }
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-15 * b.abs() {
            break;
        }
    }
    fc.max(fd)
}

fn psi_shift(tau_star: f64, medium: &Medium) -> f64 {
    medium.sigma_min() - (1.0 - tau_star.cos()) * medium.sigma_max()
}

fn psi_of_tau(shift: f64, tau: f64, medium: &Medium) -> f64 {
    arg(Complex64::new(shift, -medium.sigma_max() * tau.sin()))
}

/// `d0`, `d_inf`, `tau_*` and `psi_*` of a profile.
pub fn limits(profile: &ScalingProfile, medium: &Medium) -> Result<ScalingLimits> {
    let d_inf = profile.d_inf()?;
    let d0 = d_inf / d_inf.norm();
    let tau_star = match profile.kind {
        ProfileKind::Affine => arg(1.0 + profile.gamma),
        _ => profile.sampled_sup(|r| profile.tau(r).abs()),
    };
    let shift = psi_shift(tau_star, medium);
    let psi_flagged = shift <= 0.0;
    let psi_star = match profile.kind {
        ProfileKind::Affine => {
            // tau sweeps (-tau_*, 0) monotonically, so psi is monotone in sin(tau).
            let y = medium.sigma_max() * tau_star.sin();
            if shift > 0.0 {
                y.atan2(shift)
            } else if shift == 0.0 {
                PI / 2.0
            } else {
                PI
            }
        }
        _ => profile.sampled_sup(|r| psi_of_tau(shift, profile.tau(r), medium)),
    };
    if psi_flagged {
        log::warn!(
            "cos(tau_*) = {:.6} <= 1 - sigma_min/sigma_max = {:.6}; psi_* = {psi_star:.6} is flagged",
            tau_star.cos(),
            medium.anisotropy_degree()
        );
    }
    Ok(ScalingLimits {
        d0,
        d_inf,
        tau_star,
        psi_star,
        psi_flagged,
    })
}

/// Hat quantities at radius `r`.
pub fn hat_state(
    profile: &ScalingProfile,
    limits: &ScalingLimits,
    medium: &Medium,
    r: f64,
) -> HatState {
    let s = profile.eval(r);
    let alpha_hat = if r <= profile.r1 {
        profile.alpha_at_onset()
    } else {
        s.alpha
    };
    let d_hat = 1.0 + profile.gamma * alpha_hat;
    let tau_hat = arg(s.d_tilde / d_hat);
    let psi_hat = psi_of_tau(psi_shift(limits.tau_star, medium), tau_hat, medium);
    HatState {
        alpha_hat,
        d_hat,
        tau_hat,
        psi_hat,
    }
}

/// Whether `omega` lies in `{z : Re(i z d0) != 0}` with the given margin.
pub fn in_lambda_d0(omega: Complex64, d0: Complex64, margin: f64) -> bool {
    (Complex64::i() * omega * d0).re.abs() > margin
}

/// Unit-modulus multiplier `|d_tilde| / conj(d_tilde) * e^{+-i psi_hat}`.
pub fn t_symbol(
    profile: &ScalingProfile,
    limits: &ScalingLimits,
    medium: &Medium,
    omega: Complex64,
    r: f64,
) -> Result<Complex64> {
    if !in_lambda_d0(omega, limits.d0, 1e-12 * omega.norm().max(1.0)) {
        return Err(Error::Domain(format!(
            "omega = {omega} lies on the boundary Re(i omega d0) = 0"
        )));
    }
    let dt = profile.eval(r).d_tilde;
    let hat = hat_state(profile, limits, medium, r);
    let sign = if arg(-omega * omega * limits.d0 * limits.d0) <= 0.0 {
        1.0
    } else {
        -1.0
    };
    Ok(dt.norm() / dt.conj() * Complex64::from_polar(1.0, sign * hat.psi_hat))
}

/// `gamma(omega) = 1 / (c - i omega)`.
pub fn gamma_of_omega(c: f64, omega: f64) -> Result<Complex64> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("c = {c} must be positive")));
    }
    Ok(1.0 / Complex64::new(c, -omega))
}

/// Smallest `c >= 0` with `1/sqrt(1 + 1/(4(c^2+c))) >= 1 - sigma_min/sigma_max`,
/// i.e. the frequency dependent damping that keeps `cos(tau_*)` above the
/// anisotropy degree for every real frequency.
pub fn min_stabilizing_c(medium: &Medium) -> Result<f64> {
    let delta = medium.anisotropy_degree();
    if delta >= 1.0 {
        return Err(Error::Domain("anisotropy degree must be below 1".into()));
    }
    if delta <= 0.0 {
        return Ok(0.0);
    }
    let q = delta * delta / (4.0 * (1.0 - delta * delta));
    Ok(0.5 * ((1.0 + 4.0 * q).sqrt() - 1.0))
}

/// Upper bound of `arg(1 + gamma(omega))` over real `omega` for a given `c`.
pub fn gamma_of_omega_tau_bound(c: f64) -> f64 {
    (1.0 / (2.0 * (c * c + c).sqrt())).atan()
}

/// Outcome of the admissibility checks. Violations are reported, not raised.
#[derive(Clone, Debug, serde::Serialize)]
pub struct AdmissibilityReport {
    /// Profile conditions (vanishing below r1, continuity, positivity,
    /// monotonicity, boundedness) and `r1 > r0`.
    pub profile_ok: bool,
    pub profile_notes: Vec<String>,
    /// `r1 > (sigma_max / sigma_min) r0`.
    pub onset_radius_ok: bool,
    pub onset_radius_required: f64,
    /// `cos(tau_*) > 1 - sigma_min / sigma_max`.
    pub anisotropy_condition_ok: bool,
    pub cos_tau_star: f64,
    pub anisotropy_degree: f64,
    /// Phase limits at infinity (`tau -> 0`, phase derivatives decay).
    pub tail_ok: bool,
    pub tau_star: f64,
    pub psi_star: f64,
    pub psi_flagged: bool,
}

impl AdmissibilityReport {
    pub fn sufficient_conditions_hold(&self) -> bool {
        self.profile_ok && self.onset_radius_ok && self.anisotropy_condition_ok && self.tail_ok
    }
}

pub fn admissible(
    profile: &ScalingProfile,
    medium: &Medium,
    r0: f64,
) -> Result<AdmissibilityReport> {
    let r1 = profile.r1;
    let mut notes = Vec::new();

    if !(r1 > r0) {
        notes.push(format!("r1 = {r1} must exceed r0 = {r0}"));
    }
    for k in 0..=16 {
        let r = r1 * k as f64 / 16.0;
        if profile.eval(r).alpha_tilde != 0.0 {
            notes.push(format!("alpha_tilde({r}) != 0 below r1"));
            break;
        }
    }
    let onset = profile.eval(r1 * (1.0 + 1e-10)).alpha_tilde;
    if onset.abs() > 1e-6 {
        notes.push(format!("alpha_tilde jumps at r1 (value {onset:e} just above)"));
    }
    let radii = profile.sample_radii();
    let values: Vec<ScalingState> = radii.iter().map(|&r| profile.eval(r)).collect();
    if let Some(s) = values.iter().find(|s| !(s.alpha_tilde > 0.0)) {
        notes.push(format!("alpha_tilde({}) = {} is not positive", s.r, s.alpha_tilde));
    }
    if let Some(w) = values
        .windows(2)
        .find(|w| w[1].alpha_tilde < w[0].alpha_tilde - 1e-14 * w[0].alpha_tilde.abs())
    {
        notes.push(format!(
            "alpha_tilde decreases between r = {} and r = {}",
            w[0].r, w[1].r
        ));
    }
    let far: Vec<ScalingState> = [LIMIT_RADIUS_FACTORS.0, LIMIT_RADIUS_FACTORS.1]
        .iter()
        .map(|f| profile.eval(f * r1))
        .collect();
    let bound = values
        .iter()
        .chain(&far)
        .fold(0.0_f64, |m, s| m.max(s.alpha_tilde.abs()).max(s.alpha.abs()));
    let sampled_bound = values
        .iter()
        .fold(0.0_f64, |m, s| m.max(s.alpha_tilde.abs()).max(s.alpha.abs()));
    if !bound.is_finite() || bound > 1.5 * sampled_bound.max(1e-300) {
        notes.push("alpha_tilde or alpha appears unbounded".into());
    }

    let d_inf = profile.d_inf();
    if let Err(e) = &d_inf {
        notes.push(e.to_string());
    }
    let profile_ok = notes.is_empty();

    let ratio = medium.sigma_max() / medium.sigma_min();
    let onset_radius_required = ratio * r0;
    let onset_radius_ok = r1 > onset_radius_required;

    let (tau_star, psi_star, psi_flagged) = match limits(profile, medium) {
        Ok(l) => (l.tau_star, l.psi_star, l.psi_flagged),
        Err(_) => (f64::NAN, f64::NAN, true),
    };
    let anisotropy_degree = medium.anisotropy_degree();
    let anisotropy_condition_ok = tau_star.cos() > anisotropy_degree;

    // tau -> 0 and the phase derivatives of d_tilde, d decay at infinity.
    let far_r = LIMIT_RADIUS_FACTORS.0 * r1;
    let h = 1e-3 * far_r;
    let phase = |z: Complex64| z / z.norm();
    let a = profile.eval(far_r - h);
    let b = profile.eval(far_r + h);
    let dphase_tilde = (phase(b.d_tilde) - phase(a.d_tilde)).norm() / (2.0 * h);
    let dphase = (phase(b.d) - phase(a.d)).norm() / (2.0 * h);
    let tail_ok = profile.tau(far_r).abs() < 1e-5
        && dphase_tilde * far_r < 1e-5
        && dphase * far_r < 1e-5
        && profile.tau(1e3 * r1).abs() <= profile.tau(1e2 * r1).abs() + 1e-15;

    Ok(AdmissibilityReport {
        profile_ok,
        profile_notes: notes,
        onset_radius_ok,
        onset_radius_required,
        anisotropy_condition_ok,
        cos_tau_star: tau_star.cos(),
        anisotropy_degree,
        tail_ok,
        tau_star,
        psi_star,
        psi_flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_below_onset() {
        let p = ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap();
        let s = p.eval(0.75);
        assert_eq!(s.alpha_tilde, 0.0);
        assert_eq!(s.alpha, 0.0);
        assert_eq!(s.d_tilde, c(1.0, 0.0));
        assert_eq!(s.d, c(1.0, 0.0));
        assert_eq!(s.r_tilde, c(0.75, 0.0));
    }

    #[test]
    fn affine_substitution() {
        let p = ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap();
        let s = p.eval(3.0);
        assert_eq!(s.alpha_tilde, 0.5);
        assert!((s.alpha - 1.0).abs() < 1e-15);
        assert_eq!(s.d_tilde, c(1.0, 4.0));
        assert!((s.d - c(1.0, 8.0)).norm() < 1e-14);
        assert_eq!(s.r_tilde, c(3.0, 12.0));
        for r in [1.6, 2.0, 10.0, 1e4] {
            let s = p.eval(r);
            assert!((s.d - (1.0 + p.gamma())).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_gamma() {
        assert!(ScalingProfile::affine(1.5, c(0.0, 0.0)).is_err());
        assert!(ScalingProfile::affine(1.5, c(-0.1, 1.0)).is_err());
        assert!(ScalingProfile::affine(0.0, c(0.0, 1.0)).is_err());
    }

    #[test]
    fn affine_limits() {
        let p = ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap();
        let l = limits(&p, &Medium::isotropic(2)).unwrap();
        assert!((l.tau_star - 8f64.atan()).abs() < 1e-15);
        assert!((l.tau_star - 1.446_441_332_248_135_1).abs() < 1e-12);
        assert!((l.d_inf - c(1.0, 8.0)).norm() < 1e-15);
        assert!((l.d_inf.norm() - 65f64.sqrt()).abs() < 1e-14);
        assert!((l.d0 - c(1.0, 8.0) / 65f64.sqrt()).norm() < 1e-15);
        assert!(!l.psi_flagged);
    }

    #[test]
    fn isotropic_psi_below_half_pi() {
        let p = ScalingProfile::affine(1.5, c(0.0, 1.0)).unwrap();
        let m = Medium::isotropic(2);
        let l = limits(&p, &m).unwrap();
        assert!(l.tau_star < PI / 2.0);
        assert!(l.psi_star < PI / 2.0);
        let sampled = p.sampled_sup(|r| psi_of_tau(psi_shift(l.tau_star, &m), p.tau(r), &m));
        assert!((sampled - l.psi_star).abs() < 1e-6);
    }

    #[test]
    fn affine_sampled_tau_matches_closed_form() {
        let p = ScalingProfile::affine(1.5, c(0.3, 2.0)).unwrap();
        let sampled = p.sampled_sup(|r| p.tau(r).abs());
        assert!((sampled - arg(1.0 + p.gamma())).abs() < 1e-9);
    }

    #[test]
    fn admissibility_of_strong_scaling_in_anisotropic_medium() {
        let p = ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap();
        let m = Medium::diag(&[0.25, 1.0]).unwrap();
        let rep = admissible(&p, &m, 1.2).unwrap();
        assert!(!rep.anisotropy_condition_ok);
        assert!((rep.cos_tau_star - 0.124_034_734_589_208_4).abs() < 1e-12);
        assert!(!rep.onset_radius_ok);
        assert!((rep.onset_radius_required - 4.8).abs() < 1e-14);
        assert!(rep.profile_ok);
        assert!(rep.tail_ok);
        assert!(rep.psi_flagged);
    }

    #[test]
    fn admissibility_isotropic_mild_damping() {
        let p = ScalingProfile::affine(1.5, c(0.2, 0.2)).unwrap();
        let rep = admissible(&p, &Medium::isotropic(2), 1.0).unwrap();
        assert!(rep.anisotropy_condition_ok);
        assert!(rep.onset_radius_ok);
        assert!(rep.sufficient_conditions_hold());
    }

    #[test]
    fn decreasing_profile_fails_profile_check() {
        let f: ProfileFn = Arc::new(|r: f64| {
            let x = r - 1.0;
            // rises, dips around x = 2, then saturates
            let v = 0.5 * (1.0 - (-x).exp()) - 0.2 * (-(x - 2.0).powi(2)).exp() + 0.2 * (-4.0f64).exp();
            let dv = 0.5 * (-x).exp() + 0.4 * (x - 2.0) * (-(x - 2.0).powi(2)).exp();
            (v, dv)
        });
        let p = ScalingProfile::new(ProfileKind::Custom(f), 1.0, c(0.0, 1.0)).unwrap();
        let rep = admissible(&p, &Medium::isotropic(2), 0.5).unwrap();
        assert!(!rep.profile_ok, "{:?}", rep.profile_notes);
        assert!(rep.profile_notes.iter().any(|n| n.contains("decreases")));
    }

    #[test]
    fn ramp_and_smoothed_profiles_are_admissible() {
        let m = Medium::isotropic(2);
        let ramp = ScalingProfile::new(
            ProfileKind::Ramp { width: 1.0, amplitude: 2.0 },
            1.5,
            c(0.0, 1.0),
        )
        .unwrap();
        let rep = admissible(&ramp, &m, 1.0).unwrap();
        assert!(rep.profile_ok && rep.tail_ok, "{:?}", rep.profile_notes);
        let l = limits(&ramp, &m).unwrap();
        assert!((l.d_inf - c(1.0, 2.0)).norm() < 1e-15);
        assert!(l.tau_star > 0.0 && l.tau_star < PI / 2.0);

        let smooth = ScalingProfile::new(
            ProfileKind::SmoothedPolynomial { scale: 0.5, amplitude: 1.0 },
            1.5,
            c(0.0, 3.0),
        )
        .unwrap();
        let rep = admissible(&smooth, &m, 1.0).unwrap();
        assert!(rep.profile_ok && rep.tail_ok, "{:?}", rep.profile_notes);
        let l = limits(&smooth, &m).unwrap();
        assert!((l.d_inf - c(1.0, 3.0)).norm() < 1e-8);
    }

    #[test]
    fn t_symbol_has_unit_modulus_and_domain() {
        let p = ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap();
        let m = Medium::diag(&[0.5, 1.0]).unwrap();
        let l = limits(&p, &m).unwrap();
        for r in [0.3, 1.5, 2.0, 7.0, 100.0] {
            for w in [c(1.0, 0.0), c(2.0, -1.0), c(-0.5, 0.2)] {
                let t = t_symbol(&p, &l, &m, w, r).unwrap();
                assert!((t.norm() - 1.0).abs() < 1e-14);
            }
        }
        // omega = conj(d0) makes i omega d0 purely imaginary
        let bad = l.d0.conj();
        assert!(matches!(t_symbol(&p, &l, &m, bad, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn t_symbol_radial_derivative_decays() {
        let p = ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap();
        let m = Medium::isotropic(2);
        let l = limits(&p, &m).unwrap();
        let w = c(1.0, 0.0);
        let deriv = |r: f64| {
            let h = 1e-4 * r;
            let a = t_symbol(&p, &l, &m, w, r - h).unwrap();
            let b = t_symbol(&p, &l, &m, w, r + h).unwrap();
            (b - a).norm() / (2.0 * h)
        };
        let d1 = deriv(10.0);
        let d2 = deriv(100.0);
        let d3 = deriv(1000.0);
        assert!(d2 < d1 && d3 < d2);
        assert!(d3 < 1e-5);
    }

    #[test]
    fn gamma_of_omega_examples() {
        assert_eq!(gamma_of_omega(1.0, 0.0).unwrap(), c(1.0, 0.0));
        assert!((gamma_of_omega(1.0, 1.0).unwrap() - c(0.5, 0.5)).norm() < 1e-16);
        assert!((gamma_of_omega(2.0, 3.0).unwrap() - c(2.0 / 13.0, 3.0 / 13.0)).norm() < 1e-16);
        assert!(gamma_of_omega(0.0, 1.0).is_err());
        // zero damping limit: Re(i omega gamma) -> 0
        let g = gamma_of_omega(1.0, 1e-8).unwrap();
        assert!((Complex64::i() * 1e-8 * g).re.abs() < 1e-15);
    }

    #[test]
    fn min_c_examples() {
        assert_eq!(min_stabilizing_c(&Medium::isotropic(2)).unwrap(), 0.0);
        let cval = min_stabilizing_c(&Medium::diag(&[0.25, 1.0]).unwrap()).unwrap();
        let oracle = 0.5 * ((16.0f64 / 7.0).sqrt() - 1.0);
        assert!((cval - oracle).abs() < 1e-15);
        assert!((cval - 0.2559).abs() < 1e-4);
        assert!((cval * cval + cval - 9.0 / 28.0).abs() < 1e-14);
        // at the root the inequality is an equality
        let lhs = 1.0 / (1.0 + 1.0 / (4.0 * (cval * cval + cval))).sqrt();
        assert!((lhs - 0.75).abs() < 1e-14);
        let lhs_above = 1.0 / (1.0 + 1.0 / (4.0 * ((cval + 1e-6).powi(2) + cval + 1e-6))).sqrt();
        assert!(lhs_above > 0.75);
    }

    #[test]
    fn min_c_monotone_in_ratio() {
        let mut prev = f64::INFINITY;
        for k in 1..50 {
            let ratio = k as f64 / 50.0;
            let cval = min_stabilizing_c(&Medium::diag(&[ratio, 1.0]).unwrap()).unwrap();
            assert!(cval < prev);
            prev = cval;
        }
        assert!(prev < 1e-3);
    }
}
