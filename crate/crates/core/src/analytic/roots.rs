//! Zeros of `(H_n^(1))'` inside a rectangle: argument-principle count, Newton
//! location, and completeness check.

use super::bessel::{hankel1_deriv, hankel1_jet, MAX_ARG, MAX_IMAG, MAX_ORDER};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

/// Accepted residual `|H_n'(z)|` of a located root.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Roots closer than this are the same root.
const DEDUP_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 60;
const SEED_SPACING: f64 = 0.25;
const SEED_REFINEMENTS: usize = 3;

/// Closed rectangle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

impl SearchBox {
    pub fn new(re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64) -> Result<Self> {
        let b = SearchBox { re_lo, re_hi, im_lo, im_hi };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.re_lo, self.re_hi, self.im_lo, self.im_hi].iter().all(|v| v.is_finite());
        if !finite || !(self.re_lo < self.re_hi) || !(self.im_lo < self.im_hi) {
            return Err(Error::Validation(format!("degenerate search box {self:?}")));
        }
        if self.re_lo <= 0.0 && self.im_lo <= 0.0 && self.im_hi >= 0.0 {
            return Err(Error::Validation(
                "search box must stay away from z = 0 and the negative real axis".into(),
            ));
        }
        let corners = self.corners();
        if corners.iter().any(|z| z.norm() > MAX_ARG) || self.im_hi > MAX_IMAG {
            return Err(Error::Domain(format!(
                "search box leaves the supported range |z| <= {MAX_ARG}, Im z <= {MAX_IMAG}"
            )));
        }
        Ok(())
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_lo, self.im_lo),
            Complex64::new(self.re_hi, self.im_lo),
            Complex64::new(self.re_hi, self.im_hi),
            Complex64::new(self.re_lo, self.im_hi),
        ]
    }

    pub fn contains(&self, z: Complex64, tol: f64) -> bool {
        z.re >= self.re_lo - tol
            && z.re <= self.re_hi + tol
            && z.im >= self.im_lo - tol
            && z.im <= self.im_hi + tol
    }

    /// Box grown by `margin` on every side.
    pub fn inflate(&self, margin: f64) -> SearchBox {
        SearchBox {
            re_lo: self.re_lo - margin,
            re_hi: self.re_hi + margin,
            im_lo: self.im_lo - margin,
            im_hi: self.im_hi + margin,
        }
    }
}

/// One zero of `(H_n^(1))'`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReference {
    pub order: usize,
    pub index: usize,
    pub root: Complex64,
    pub residual: f64,
}

/// Continuous change of `arg f` along a segment, subdividing until each
/// piece turns by less than `MAX_TURN`.
fn phase_change(
    f: &dyn Fn(Complex64) -> Result<Complex64>,
    a: Complex64,
    fa: Complex64,
    b: Complex64,
    fb: Complex64,
    depth: usize,
) -> Result<f64> {
    const MAX_TURN: f64 = 0.3;
    let whole = (fb / fa).arg();
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let left = (fm / fa).arg();
    let right = (fb / fm).arg();
    if depth >= 48 {
        return Err(Error::Domain(format!(
            "argument principle: contour passes through or too near a zero at {m}"
        )));
    }
    if left.abs() < MAX_TURN && right.abs() < MAX_TURN && (left + right - whole).abs() < 1e-9 {
        return Ok(whole);
    }
    Ok(phase_change(f, a, fa, m, fm, depth + 1)? + phase_change(f, m, fm, b, fb, depth + 1)?)
}

/// Number of zeros of `(H_n^(1))'` inside the box (argument principle).
pub fn count_zeros(n: usize, bx: &SearchBox) -> Result<usize> {
    bx.validate()?;
    let f = |z: Complex64| hankel1_deriv(n, z);
    let c = bx.corners();
    let mut total = 0.0;
    for i in 0..4 {
        let (a, b) = (c[i], c[(i + 1) % 4]);
        let pieces = ((b - a).norm() / 0.1).ceil() as usize;
        let mut za = a;
        let mut fa = f(za)?;
        for j in 1..=pieces {
            let zb = a + (b - a) * (j as f64 / pieces as f64);
            let fb = f(zb)?;
            total += phase_change(&f, za, fa, zb, fb, 0)?;
            za = zb;
            fa = fb;
        }
    }
    let winding = total / (2.0 * PI);
    let count = winding.round();
    if (winding - count).abs() > 1e-3 || count < 0.0 {
        return Err(Error::Domain(format!(
            "argument principle for order {n} gave non-integer winding {winding}"
        )));
    }
    Ok(count as usize)
}

/// Newton iteration on `H_n'` from `seed`; `None` if it fails to converge
/// to a root with residual below the acceptance tolerance.
pub fn newton_refine(n: usize, seed: Complex64) -> Result<Option<ResonanceReference>> {
    if n > MAX_ORDER {
        return Err(Error::Domain(format!("order {n} exceeds {MAX_ORDER}")));
    }
    let mut z = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let Ok([_, dh, ddh]) = hankel1_jet(n, z) else {
            return Ok(None);
        };
        let step = dh / ddh;
        if !step.re.is_finite() || !step.im.is_finite() {
            return Ok(None);
        }
        z -= step;
        if step.norm() <= 1e-15 * z.norm().max(1.0) {
            break;
        }
    }
    let Ok(residual) = hankel1_deriv(n, z).map(|v| v.norm()) else {
        return Ok(None);
    };
    if residual < RESIDUAL_TOL {
        Ok(Some(ResonanceReference { order: n, index: 0, root: z, residual }))
    } else {
        Ok(None)
    }
}

fn seeds(bx: &SearchBox, spacing: f64) -> Vec<Complex64> {
    let nr = ((bx.re_hi - bx.re_lo) / spacing).ceil().max(1.0) as usize;
    let ni = ((bx.im_hi - bx.im_lo) / spacing).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(nr * ni);
    for i in 0..nr {
        for j in 0..ni {
            out.push(Complex64::new(
                bx.re_lo + (i as f64 + 0.5) * (bx.re_hi - bx.re_lo) / nr as f64,
                bx.im_lo + (j as f64 + 0.5) * (bx.im_hi - bx.im_lo) / ni as f64,
            ));
        }
    }
    out
}

fn search_order(n: usize, bx: &SearchBox) -> Result<Vec<ResonanceReference>> {
    let expected = count_zeros(n, bx)?;
    let mut found: Vec<ResonanceReference> = Vec::new();
    if expected == 0 {
        return Ok(found);
    }
    let mut spacing = SEED_SPACING;
    for _ in 0..=SEED_REFINEMENTS {
        for seed in seeds(bx, spacing) {
            if let Some(r) = newton_refine(n, seed)? {
                if bx.contains(r.root, 0.0) && found.iter().all(|f| (f.root - r.root).norm() > DEDUP_TOL) {
                    found.push(r);
                }
            }
        }
        if found.len() >= expected {
            break;
        }
        spacing /= 2.0;
    }
    if found.len() != expected {
        return Err(Error::IncompleteSearch { order: n, expected, found: found.len() });
    }
    found.sort_by(|a, b| a.root.re.total_cmp(&b.root.re));
    for (k, r) in found.iter_mut().enumerate() {
        r.index = k + 1;
    }
    Ok(found)
}

/// All zeros of `(H_n^(1))'` for `n = 0..=n_max` inside the box, ordered by
/// `(n, Re root)`. These are the Neumann resonances of the unit disk.
pub fn find_disk_neumann_references(n_max: usize, bx: &SearchBox) -> Result<Vec<ResonanceReference>> {
    if n_max > MAX_ORDER {
        return Err(Error::Domain(format!("order {n_max} exceeds {MAX_ORDER}")));
    }
    bx.validate()?;
    let per_order: Vec<Result<Vec<ResonanceReference>>> =
        (0..=n_max).into_par_iter().map(|n| search_order(n, bx)).collect();
    let mut out = Vec::new();
    for r in per_order {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Row {
    n: usize,
    k: usize,
    re: String,
    im: String,
    residual: String,
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with columns `n,k,re,im,residual`.
pub fn write_references_csv<W: Write>(refs: &[ResonanceReference], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in refs {
        w.serialize(Row {
            n: r.order,
            k: r.index,
            re: fmt17(r.root.re),
            im: fmt17(r.root.im),
            residual: fmt17(r.residual),
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse { line, msg: e.to_string() }
}

pub fn read_references_csv<R: Read>(input: R) -> Result<Vec<ResonanceReference>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, row) in rd.deserialize::<Row>().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = i + 2;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse { line, msg: format!("{s:?}: {e}") })
        };
        out.push(ResonanceReference {
            order: row.n,
            index: row.k,
            root: Complex64::new(num(&row.re)?, num(&row.im)?),
            residual: num(&row.residual)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn search_box() -> SearchBox {
        SearchBox::new(0.1, 8.0, -3.0, 0.0).unwrap()
    }

    #[test]
    fn first_order_root() {
        let r = newton_refine(1, Complex64::new(0.5, -0.6)).unwrap().unwrap();
        assert!((r.root - Complex64::new(0.501_183_51, -0.643_545_02)).norm() < 1e-8);
    }

    #[test]
    fn upper_half_plane_is_empty() {
        let bx = SearchBox::new(0.5, 6.0, 0.2, 3.0).unwrap();
        for n in 0..4 {
            assert_eq!(count_zeros(n, &bx).unwrap(), 0);
        }
        assert!(find_disk_neumann_references(3, &bx).unwrap().is_empty());
    }

    #[test]
    fn nested_contours_agree() {
        let inner = SearchBox::new(0.3, 3.0, -1.5, -0.2).unwrap();
        let outer = SearchBox::new(0.2, 3.2, -1.7, -0.1).unwrap();
        for n in 0..=4 {
            assert_eq!(count_zeros(n, &inner).unwrap(), count_zeros(n, &outer).unwrap());
        }
    }

    #[test]
    fn rejects_box_through_origin() {
        assert!(SearchBox::new(-1.0, 1.0, -1.0, 1.0).is_err());
        assert!(SearchBox::new(1.0, 40.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let refs = find_disk_neumann_references(2, &search_box()).unwrap();
        let mut buf = Vec::new();
        write_references_csv(&refs, &mut buf).unwrap();
        let back = read_references_csv(buf.as_slice()).unwrap();
        assert_eq!(refs, back);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,k,re,im,residual\n"));
    }

    #[test]
    fn csv_errors_carry_line() {
        let bad = "n,k,re,im,residual\n1,1,0.5,-0.6,1e-12\n2,1,abc,-0.8,1e-12\n";
        match read_references_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
