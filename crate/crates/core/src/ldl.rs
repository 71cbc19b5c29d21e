//! Up-looking `L D L^T` factorization of complex symmetric sparse matrices
//! (no pivoting), ordered by approximate minimum degree.

use crate::sparse::CsrMatrix;
use crate::{Error, Result};
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::amd;
use faer::sparse::SymbolicSparseColMatRef;
use num_complex::Complex64;

type C = Complex64;

/// Pivots smaller than this times the largest diagonal entry are rejected.
const PIVOT_TOL: f64 = 1e-13;
const NONE: usize = usize::MAX;

pub(crate) struct SymmetricLdl {
    n: usize,
    /// New index to old index.
    perm: Vec<usize>,
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<C>,
    d: Vec<C>,
}

fn amd_order(a: &CsrMatrix) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = a.dim();
    let mut perm = vec![0usize; n];
    let mut pinv = vec![0usize; n];
    // the pattern is symmetric, so the row structure doubles as column structure
    let pattern = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
    let req = amd::order_scratch::<usize>(n, a.nnz());
    amd::order(&mut perm, &mut pinv, pattern, Default::default(), MemStack::new(&mut MemBuffer::new(req)))
        .map_err(|e| Error::Validation(format!("minimum degree ordering failed: {e:?}")))?;
    Ok((perm, pinv))
}

impl SymmetricLdl {
    /// `a` must be symmetric (values and pattern); only entries with permuted
    /// column index at most the permuted row index are read.
    pub(crate) fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let (perm, pinv) = amd_order(a)?;
        let (rp, ci, av) = (a.row_ptr(), a.col_idx(), a.values());

        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            let kk = perm[k];
            for p in rp[kk]..rp[kk + 1] {
                let mut i = pinv[ci[p]];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let total = lp[n];
        let mut li = vec![0usize; total];
        let mut lx = vec![C::new(0.0, 0.0); total];
        let mut d = vec![C::new(0.0, 0.0); n];
        let mut y = vec![C::new(0.0, 0.0); n];
        let mut pattern = vec![0usize; n];
        let scale = (0..n).map(|i| a.get(i, i).norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

        lnz.iter_mut().for_each(|v| *v = 0);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let kk = perm[k];
            for p in rp[kk]..rp[kk + 1] {
                let mut i = pinv[ci[p]];
                if i <= k {
                    y[i] += av[p];
                    let mut len = 0;
                    while flag[i] != k {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                    while len > 0 {
                        top -= 1;
                        len -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            d[k] = y[k];
            y[k] = C::new(0.0, 0.0);
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = C::new(0.0, 0.0);
                let end = lp[i] + lnz[i];
                for p in lp[i]..end {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[end] = k;
                lx[end] = l_ki;
                lnz[i] += 1;
            }
            if !(d[k].norm() > PIVOT_TOL * scale) {
                return Err(Error::SingularMatrix { index: kk });
            }
        }
        Ok(SymmetricLdl { n, perm, pinv, lp, li, lx, d })
    }

    pub(crate) fn nnz(&self) -> usize {
        self.lx.len() + self.n
    }

    pub(crate) fn solve(&self, b: &[C]) -> Vec<C> {
        let n = self.n;
        let mut x: Vec<C> = (0..n).map(|k| b[self.perm[k]]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        (0..n).map(|i| x[self.pinv[i]]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_symmetric_solve() {
        let n = 60;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C::new(4.0, 0.5)));
            for j in [i + 1, i + 7] {
                if j < n {
                    let v = C::new(-1.0, 0.1 * (i % 3) as f64);
                    t.push((i, j, v));
                    t.push((j, i, v));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, &t).unwrap();
        let ldl = SymmetricLdl::new(&a).unwrap();
        let b: Vec<C> = (0..n).map(|i| C::new((i as f64).sin(), (i as f64).cos())).collect();
        let r = a.mul_vec(&ldl.solve(&b));
        let err: f64 = r.iter().zip(&b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
        assert!(ldl.nnz() >= n);
    }

    #[test]
    fn zero_pivot_rejected() {
        let a = CsrMatrix::from_triplets(
            2,
            &[(0, 0, C::new(0.0, 0.0)), (0, 1, C::new(1.0, 0.0)), (1, 0, C::new(1.0, 0.0)), (1, 1, C::new(0.0, 0.0))],
        )
        .unwrap();
        assert!(SymmetricLdl::new(&a).is_err());
    }
}
