//! Constant anisotropic media and the numerical range of phase-rotated
//! coefficient matrices.

use crate::{Error, Result};
use num_complex::Complex64;

const SYMMETRY_TOL: f64 = 1e-14;

/// Real symmetric matrix of dimension 2 or 3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: [[f64; 3]; 3],
}

impl SymMatrix {
    /// Builds a matrix from its rows, rejecting asymmetric input.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        if !(2..=3).contains(&dim) {
            return Err(Error::Validation(format!("dimension {dim} not in {{2, 3}}")));
        }
        let mut data = [[0.0; 3]; 3];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Validation(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Validation(format!("entry ({i},{j}) is not finite")));
                }
                data[i][j] = v;
            }
        }
        let scale = data
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in 0..i {
                if (data[i][j] - data[j][i]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Validation(format!(
                        "matrix not symmetric at ({i},{j}): {} vs {}",
                        data[i][j], data[j][i]
                    )));
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..values.len())
            .map(|i| {
                (0..values.len())
                    .map(|j| if i == j { values[i] } else { 0.0 })
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        Self::from_rows(&refs)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::diag(&vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i][j]
    }

    /// Quadratic form `a^T S b` for complex vectors (no conjugation).
    pub fn bilinear(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += a[i] * self.data[i][j] * b[j];
            }
        }
        acc
    }

    pub fn apply(&self, v: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self.data[i][j] * v[j]).sum();
        }
        out
    }

    /// Eigen-decomposition by cyclic Jacobi rotations. Returns eigenvalues in
    /// ascending order and the matching orthonormal eigenvectors as columns.
    pub fn jacobi_eigen(&self) -> ([f64; 3], [[f64; 3]; 3]) {
        let n = self.dim;
        let mut a = self.data;
        let mut v = [[0.0; 3]; 3];
        for (i, row) in v.iter_mut().enumerate().take(n) {
            row[i] = 1.0;
        }
        for _sweep in 0..64 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
            if off <= 1e-32 * diag || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q] == 0.0 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in v.iter_mut().take(n) {
                        let vkp = row[p];
                        let vkq = row[q];
                        row[p] = c * vkp - s * vkq;
                        row[q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
        let mut vals = [0.0; 3];
        let mut vecs = [[0.0; 3]; 3];
        for (k, &i) in order.iter().enumerate() {
            vals[k] = a[i][i];
            for r in 0..n {
                vecs[r][k] = v[r][i];
            }
        }
        (vals, vecs)
    }
}

/// Smallest and largest eigenvalue of a real SPD matrix.
pub fn spd_extremes(sigma: &SymMatrix) -> Result<(f64, f64)> {
    let (vals, _) = sigma.jacobi_eigen();
    let n = sigma.dim();
    let (lo, hi) = (vals[0], vals[n - 1]);
    if lo <= 0.0 {
        return Err(Error::Definiteness(lo));
    }
    Ok((lo, hi))
}

/// Constant SPD material coefficient with cached spectral data.
#[derive(Clone, Debug)]
pub struct Medium {
    sigma: SymMatrix,
    sigma_min: f64,
    sigma_max: f64,
    sigma_inv: SymMatrix,
    sigma_inv_sqrt: SymMatrix,
    det_inv_sqrt: f64,
}

impl Medium {
    pub fn new(sigma: SymMatrix) -> Result<Self> {
        let (sigma_min, sigma_max) = spd_extremes(&sigma)?;
        let n = sigma.dim();
        let (vals, vecs) = sigma.jacobi_eigen();
        let build = |f: &dyn Fn(f64) -> f64| {
            let mut data = [[0.0; 3]; 3];
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 = (0..n).map(|k| vecs[i][k] * f(vals[k]) * vecs[j][k]).sum();
                    data[i][j] = v;
                    data[j][i] = v;
                }
            }
            SymMatrix { dim: n, data }
        };
        let sigma_inv = build(&|l| 1.0 / l);
        let sigma_inv_sqrt = build(&|l| 1.0 / l.sqrt());
        let det_inv_sqrt = vals[..n].iter().map(|l| 1.0 / l.sqrt()).product();
        Ok(Self {
            sigma,
            sigma_min,
            sigma_max,
            sigma_inv,
            sigma_inv_sqrt,
            det_inv_sqrt,
        })
    }

    pub fn isotropic(dim: usize) -> Self {
        Self::new(SymMatrix::identity(dim).expect("dim 2 or 3")).expect("identity is SPD")
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::diag(values)?)
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn sigma_inv(&self) -> &SymMatrix {
        &self.sigma_inv
    }

    pub fn sigma_inv_sqrt(&self) -> &SymMatrix {
        &self.sigma_inv_sqrt
    }

    /// `det(sigma)^{-1/2}`.
    pub fn det_inv_sqrt(&self) -> f64 {
        self.det_inv_sqrt
    }

    /// `1 - sigma_min / sigma_max`, zero for isotropic media.
    pub fn anisotropy_degree(&self) -> f64 {
        1.0 - self.sigma_min / self.sigma_max
    }
}

/// Small dense complex matrix (dimension 2 or 3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexMatrix {
    pub dim: usize,
    pub data: [[Complex64; 3]; 3],
}

impl ComplexMatrix {
    /// `x^* A x`.
    pub fn quadratic_form(&self, x: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += x[i].conj() * self.data[i][j] * x[j];
            }
        }
        acc
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!("|tau| = {} must be below pi/2", tau.abs())));
    }
    Ok(())
}

/// Phase-rotated matrix: entry (1,1) times `e^{i tau}`, the trailing diagonal
/// block times `e^{-i tau}`, the coupling row/column unchanged.
pub fn b_tau(b: &SymMatrix, tau: f64) -> Result<ComplexMatrix> {
    check_tau(tau)?;
    let n = b.dim();
    let plus = Complex64::from_polar(1.0, tau);
    let minus = Complex64::from_polar(1.0, -tau);
    let mut data = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..n {
        for j in 0..n {
            let v = Complex64::new(b.get(i, j), 0.0);
            data[i][j] = match (i, j) {
                (0, 0) => v * plus,
                (0, _) | (_, 0) => v,
                _ => v * minus,
            };
        }
    }
    Ok(ComplexMatrix { dim: n, data })
}

/// Rectangle containing the numerical range of a phase-rotated matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeBox {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

impl RangeBox {
    pub fn contains(&self, z: Complex64, tol: f64) -> bool {
        z.re >= self.re_lo - tol
            && z.re <= self.re_hi + tol
            && z.im >= self.im_lo - tol
            && z.im <= self.im_hi + tol
    }
}

pub fn numerical_range_bounds(b: &SymMatrix, tau: f64) -> Result<RangeBox> {
    check_tau(tau)?;
    let (lmin, lmax) = spd_extremes(b)?;
    let one_minus_cos = 1.0 - tau.cos();
    let im = lmax * tau.sin().abs();
    Ok(RangeBox {
        re_lo: lmin - one_minus_cos * lmax,
        re_hi: lmax - one_minus_cos * lmin,
        im_lo: -im,
        im_hi: im,
    })
}
