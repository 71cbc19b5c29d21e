//! Shift-invert Arnoldi for the pencil `K - omega^2 M`.

use crate::fem::{rayleigh_residual, AssembledPencil, InteriorBlocks};
use crate::ldl::SymmetricLdl;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor as dense_factor, solve as dense_solve};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, NumericLu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Below this size the factorization is dense.
pub const DENSE_LIMIT: usize = 3000;
/// Pairs with a larger residual are discarded.
pub const DROP_RESIDUAL: f64 = 1e-6;
pub const LAMBDA_D0_MARGIN: f64 = 1e-10;
const MAX_RESTARTS: u64 = 3;
/// Iterative refinement sweeps after an unpivoted symmetric solve.
const REFINE_STEPS: usize = 2;

type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LuStrategy {
    Auto,
    Dense,
    Sparse,
}

struct DenseLu {
    lu: Mat<C>,
    perm: Vec<usize>,
    perm_inv: Vec<usize>,
}

impl DenseLu {
    fn new(mut lu: Mat<C>) -> Result<Self> {
        let n = lu.nrows();
        let mut perm = vec![0usize; n];
        let mut perm_inv = vec![0usize; n];
        let req = dense_factor::lu_in_place_scratch::<usize, C>(n, n, Par::Seq, Default::default());
        dense_factor::lu_in_place(
            lu.as_mut(),
            &mut perm,
            &mut perm_inv,
            Par::Seq,
            MemStack::new(&mut MemBuffer::new(req)),
            Default::default(),
        );
        if let Some(index) = (0..n).find(|&i| lu[(i, i)] == C::new(0.0, 0.0)) {
            return Err(Error::SingularMatrix { index });
        }
        Ok(DenseLu { lu, perm, perm_inv })
    }

    fn solve_in_place(&self, rhs: &mut Mat<C>) {
        let n = self.lu.nrows();
        let p = unsafe { faer::perm::PermRef::new_unchecked(&self.perm, &self.perm_inv, n) };
        let req = dense_solve::solve_in_place_scratch::<usize, C>(n, rhs.ncols(), Par::Seq);
        dense_solve::solve_in_place_with_conj(
            self.lu.as_ref(),
            self.lu.as_ref(),
            p,
            Conj::No,
            rhs.as_mut(),
            Par::Seq,
            MemStack::new(&mut MemBuffer::new(req)),
        );
    }
}

/// One eliminated interior block: its LU and couplings to the skeleton.
struct Block {
    neighbors: Vec<usize>,
    /// `A_gg^{-1}`, row-major.
    inv: Vec<C>,
    /// `A_Bg A_gg^{-1}`, neighbors by block, row-major.
    left: Vec<C>,
    /// `A_gg^{-1} A_gB`, block by neighbors, row-major.
    right: Vec<C>,
}

enum Factors {
    Dense(DenseLu),
    Sparse { symbolic: SymbolicLu<usize>, numeric: NumericLu<usize, C> },
    Condensed { start: usize, size: usize, blocks: Vec<Block>, schur: Box<LuFactorization> },
    /// Symmetric factors with the matrix kept for iterative refinement.
    Ldl { ldl: SymmetricLdl, a: CsrMatrix },
}

/// LU factors of a square complex matrix; all work is sequential.
pub struct LuFactorization {
    n: usize,
    factors: Factors,
}

pub fn sparse_lu(a: &CsrMatrix) -> Result<LuFactorization> {
    factorize(a, LuStrategy::Auto)
}

pub fn factorize(a: &CsrMatrix, strategy: LuStrategy) -> Result<LuFactorization> {
    let n = a.dim();
    let dense = match strategy {
        LuStrategy::Auto => n < DENSE_LIMIT,
        LuStrategy::Dense => true,
        LuStrategy::Sparse => false,
    };
    let factors = if dense { Factors::Dense(DenseLu::new(to_dense_mat(a))?) } else { sparse_factors(a)? };
    Ok(LuFactorization { n, factors })
}

/// For complex symmetric `a`: `L D L^T` with minimum degree ordering above
/// the dense limit, falling back to pivoted LU when a pivot is too small.
pub fn factorize_symmetric(a: &CsrMatrix) -> Result<LuFactorization> {
    let n = a.dim();
    if n < DENSE_LIMIT {
        return factorize(a, LuStrategy::Dense);
    }
    match SymmetricLdl::new(a) {
        Ok(ldl) => {
            log::debug!("symmetric factor of order {n} with {} entries", ldl.nnz());
            Ok(LuFactorization { n, factors: Factors::Ldl { ldl, a: a.clone() } })
        }
        Err(Error::SingularMatrix { index }) => {
            log::info!("small symmetric pivot at {index}; using pivoted LU");
            factorize(a, LuStrategy::Sparse)
        }
        Err(e) => Err(e),
    }
}

/// Factorization of a complex symmetric matrix that first eliminates the
/// interior blocks element by element and factors the remaining Schur
/// complement with [`factorize_symmetric`]; exact up to rounding.
pub fn factorize_condensed(a: &CsrMatrix, interior: Option<InteriorBlocks>) -> Result<LuFactorization> {
    let n = a.dim();
    let Some(InteriorBlocks { start, size }) = interior.filter(|b| b.size > 0 && b.start < n) else {
        return factorize_symmetric(a);
    };
    if (n - start) % size != 0 {
        return Err(Error::Validation(format!("interior range {start}..{n} not a multiple of {size}")));
    }
    let nb = (n - start) / size;
    let blocks: Vec<Block> = (0..nb)
        .into_par_iter()
        .map(|g| {
            let first = start + g * size;
            let mut neighbors = Vec::new();
            let mut agg = Mat::<C>::zeros(size, size);
            for r in 0..size {
                let row = first + r;
                for k in a.row_ptr()[row]..a.row_ptr()[row + 1] {
                    let col = a.col_idx()[k];
                    if col < start {
                        neighbors.push(col);
                    } else if (first..first + size).contains(&col) {
                        agg[(r, col - first)] = a.values()[k];
                    } else {
                        return Err(Error::Validation(format!("dof {row} couples outside its interior block")));
                    }
                }
            }
            neighbors.sort_unstable();
            neighbors.dedup();
            let nn = neighbors.len();
            let lu = DenseLu::new(agg).map_err(|_| Error::SingularMatrix { index: first })?;
            let mut inv = Mat::<C>::identity(size, size);
            lu.solve_in_place(&mut inv);
            let mut right = Mat::from_fn(size, nn, |r, j| a.get(first + r, neighbors[j]));
            lu.solve_in_place(&mut right);
            let from = Mat::from_fn(nn, size, |i, c| a.get(neighbors[i], first + c));
            let left = &from * &inv;
            Ok(Block {
                inv: (0..size * size).map(|q| inv[(q / size, q % size)]).collect(),
                left: (0..nn * size).map(|q| left[(q / size, q % size)]).collect(),
                right: (0..size * nn).map(|q| right[(q / nn, q % nn)]).collect(),
                neighbors,
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(start);
    let mut triplets = Vec::new();
    for i in 0..start {
        let mut cols = Vec::new();
        for k in a.row_ptr()[i]..a.row_ptr()[i + 1] {
            let j = a.col_idx()[k];
            if j < start {
                cols.push(j);
                triplets.push((i, j, a.values()[k]));
            }
        }
        rows.push(cols);
    }
    for b in &blocks {
        for &i in &b.neighbors {
            rows[i].extend_from_slice(&b.neighbors);
        }
    }
    let mut schur = CsrMatrix::from_pattern(start, rows)?;
    for (i, j, v) in triplets {
        schur.add(i, j, v);
    }
    // S = A_BB - A_Bg A_gg^{-1} A_gB
    for (g, b) in blocks.iter().enumerate() {
        let first = start + g * size;
        let nn = b.neighbors.len();
        for &i in &b.neighbors {
            let from: Vec<C> = (0..size).map(|c| a.get(i, first + c)).collect();
            for (c, &j) in b.neighbors.iter().enumerate() {
                let u: C = (0..size).map(|q| from[q] * b.right[q * nn + c]).sum();
                schur.add(i, j, -u);
            }
        }
    }
    let schur = factorize_symmetric(&schur)?;
    Ok(LuFactorization { n, factors: Factors::Condensed { start, size, blocks, schur: Box::new(schur) } })
}

fn to_dense_mat(a: &CsrMatrix) -> Mat<C> {
    let n = a.dim();
    let mut m = Mat::<C>::zeros(n, n);
    for i in 0..n {
        for k in a.row_ptr()[i]..a.row_ptr()[i + 1] {
            m[(i, a.col_idx()[k])] = a.values()[k];
        }
    }
    m
}

fn sparse_factors(a: &CsrMatrix) -> Result<Factors> {
    let n = a.dim();
    let mut triplets = Vec::with_capacity(a.nnz());
    for i in 0..n {
        for k in a.row_ptr()[i]..a.row_ptr()[i + 1] {
            triplets.push(Triplet::new(i, a.col_idx()[k], a.values()[k]));
        }
    }
    let mat = SparseColMat::<usize, C>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Validation(format!("sparse matrix construction failed: {e:?}")))?;
    let symbolic = factorize_symbolic_lu(mat.symbolic(), Default::default())
        .map_err(|e| Error::Validation(format!("symbolic factorization failed: {e:?}")))?;
    let mut numeric = NumericLu::new();
    let req = symbolic.factorize_numeric_lu_scratch::<C>(Par::Seq, Default::default());
    symbolic
        .factorize_numeric_lu(
            &mut numeric,
            mat.as_ref(),
            Par::Seq,
            MemStack::new(&mut MemBuffer::new(req)),
            Default::default(),
        )
        .map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::SingularMatrix { index },
            LuError::Generic(g) => Error::Validation(format!("numeric factorization failed: {g:?}")),
        })?;
    Ok(Factors::Sparse { symbolic, numeric })
}

impl LuFactorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.factors, Factors::Dense(_))
    }

    /// Solves `A x = b`; a non-finite result means a zero pivot went unnoticed.
    pub fn solve(&self, b: &[C]) -> Result<Vec<C>> {
        if b.len() != self.n {
            return Err(Error::Validation(format!("rhs length {} != {}", b.len(), self.n)));
        }
        let x = match &self.factors {
            Factors::Dense(lu) => {
                let mut rhs = Mat::<C>::from_fn(self.n, 1, |i, _| b[i]);
                lu.solve_in_place(&mut rhs);
                (0..self.n).map(|i| rhs[(i, 0)]).collect()
            }
            Factors::Sparse { symbolic, numeric } => {
                let mut rhs = Mat::<C>::from_fn(self.n, 1, |i, _| b[i]);
                let req = symbolic.solve_in_place_scratch::<C>(1, Par::Seq);
                LuRef::new_unchecked(symbolic, numeric).solve_in_place_with_conj(
                    Conj::No,
                    rhs.as_mut(),
                    Par::Seq,
                    MemStack::new(&mut MemBuffer::new(req)),
                );
                (0..self.n).map(|i| rhs[(i, 0)]).collect()
            }
            Factors::Ldl { ldl, a } => {
                let mut x = ldl.solve(b);
                let bn = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                for _ in 0..REFINE_STEPS {
                    let r: Vec<C> = a.mul_vec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
                    if r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() <= 1e-12 * bn {
                        break;
                    }
                    x.iter_mut().zip(ldl.solve(&r)).for_each(|(xi, di)| *xi += di);
                }
                x
            }
            Factors::Condensed { start, size, blocks, schur } => {
                let (start, size) = (*start, *size);
                let mut y = b[..start].to_vec();
                for (g, blk) in blocks.iter().enumerate() {
                    let bg = &b[start + g * size..start + (g + 1) * size];
                    for (r, &i) in blk.neighbors.iter().enumerate() {
                        let row = &blk.left[r * size..(r + 1) * size];
                        y[i] -= row.iter().zip(bg).map(|(l, v)| l * v).sum::<C>();
                    }
                }
                let xb = schur.solve(&y)?;
                let mut x = Vec::with_capacity(self.n);
                x.extend_from_slice(&xb);
                for (g, blk) in blocks.iter().enumerate() {
                    let bg = &b[start + g * size..start + (g + 1) * size];
                    let nn = blk.neighbors.len();
                    for r in 0..size {
                        let direct: C = blk.inv[r * size..(r + 1) * size].iter().zip(bg).map(|(l, v)| l * v).sum();
                        let coupled: C = blk.right[r * nn..(r + 1) * nn]
                            .iter()
                            .zip(&blk.neighbors)
                            .map(|(l, &i)| l * xb[i])
                            .sum();
                        x.push(direct - coupled);
                    }
                }
                x
            }
        };
        if let Some(index) = x.iter().position(|v: &C| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SingularMatrix { index });
        }
        Ok(x)
    }
}

/// Square root on the `Im <= 0` branch; values within rounding of the
/// positive real axis stay there.
pub fn lower_sqrt(w2: C) -> C {
    let w = w2.sqrt();
    if w.im <= 0.0 {
        w
    } else if w2.re > 0.0 && w2.im.abs() <= 1e-13 * w2.norm() {
        C::new(w.re, 0.0)
    } else {
        -w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub omega: C,
    #[serde(skip)]
    pub vector: Vec<C>,
    pub residual: f64,
    pub in_lambda_d0: bool,
    pub spurious: bool,
    pub ambiguous: bool,
    /// Distance to the matched eigenvalue of the stretched run.
    pub movement: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub shift: C,
    pub shift_sq: C,
    pub k: usize,
    pub krylov_dim: usize,
    pub seed: u64,
    pub restarts: u64,
    pub dropped: usize,
    pub dofs: usize,
    pub layer_width: Option<f64>,
    pub stretch: Option<f64>,
    pub move_threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub pairs: Vec<Eigenpair>,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArnoldiOptions {
    pub k: usize,
    pub krylov_dim: usize,
    pub seed: u64,
}

impl ArnoldiOptions {
    pub fn new(k: usize, krylov_dim: usize) -> Self {
        ArnoldiOptions { k, krylov_dim, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

pub fn shift_invert_arnoldi(pencil: &AssembledPencil, shift_sq: C, k: usize, krylov_dim: usize) -> Result<Spectrum> {
    shift_invert_arnoldi_with(pencil, shift_sq, &ArnoldiOptions::new(k, krylov_dim))
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal Krylov basis and Hessenberg matrix; stops early on breakdown.
fn arnoldi(
    lu: &LuFactorization,
    m_mat: &CsrMatrix,
    start: Vec<C>,
    m: usize,
) -> Result<(Vec<Vec<C>>, Vec<Vec<C>>)> {
    let mut basis = vec![start];
    let mut h = vec![vec![C::new(0.0, 0.0); m]; m + 1];
    for j in 0..m {
        let mut w = lu.solve(&m_mat.mul_vec(&basis[j]))?;
        let scale = norm(&w);
        // classical Gram-Schmidt against the full basis, repeated when the
        // norm drops by more than 1/sqrt(2)
        let mut before = scale;
        let mut beta = scale;
        for _ in 0..2 {
            let c: Vec<C> = basis.par_iter().map(|v| dot(v, &w)).collect();
            let proj = combination(&basis, &c, w.len());
            w.par_iter_mut().zip(proj.par_iter()).for_each(|(x, p)| *x -= p);
            for (i, ci) in c.into_iter().enumerate() {
                h[i][j] += ci;
            }
            beta = norm(&w);
            if beta > std::f64::consts::FRAC_1_SQRT_2 * before {
                break;
            }
            before = beta;
        }
        h[j + 1][j] = C::new(beta, 0.0);
        if j + 1 == m || beta <= 1e-12 * scale {
            h.truncate(j + 1);
            h.iter_mut().for_each(|row| row.truncate(j + 1));
            break;
        }
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }
    Ok((basis, h))
}

/// `sum_i c_i v_i`, evaluated row-wise so the result is independent of threading.
fn combination(basis: &[Vec<C>], c: &[C], n: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); n];
    out.par_chunks_mut(4096).enumerate().for_each(|(b, chunk)| {
        let off = b * 4096;
        for (v, ci) in basis.iter().zip(c) {
            for (o, x) in chunk.iter_mut().zip(&v[off..]) {
                *o += ci * x;
            }
        }
    });
    out
}

fn random_unit(n: usize, seed: u64) -> Vec<C> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<C> = (0..n)
        .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let s = norm(&v);
    v.into_iter().map(|x| x / s).collect()
}

pub fn shift_invert_arnoldi_with(pencil: &AssembledPencil, shift_sq: C, opts: &ArnoldiOptions) -> Result<Spectrum> {
    let n = pencil.dim();
    let k = opts.k;
    if k == 0 || k > n {
        return Err(Error::Validation(format!("requested {k} eigenpairs of a {n}-dof pencil")));
    }
    if opts.krylov_dim < 2 * k + 10 && opts.krylov_dim < n {
        return Err(Error::Validation(format!(
            "Krylov dimension {} below 2k+10 = {}",
            opts.krylov_dim,
            2 * k + 10
        )));
    }
    let m = opts.krylov_dim.min(n);
    let a = pencil
        .k
        .combine(C::new(1.0, 0.0), &pencil.m, -shift_sq)
        .map_err(|e| Error::ShiftRejected(e.to_string()))?;
    let lu = factorize_condensed(&a, pencil.interior).map_err(|e| Error::ShiftRejected(format!("{shift_sq}: {e}")))?;

    let mut restarts = 0;
    let (basis, h) = loop {
        let start = random_unit(n, opts.seed.wrapping_add(restarts));
        let (basis, h) = arnoldi(&lu, &pencil.m, start, m)
            .map_err(|e| Error::ShiftRejected(format!("{shift_sq}: {e}")))?;
        if h.len() >= k.min(n) || h.len() == n || restarts == MAX_RESTARTS {
            break (basis, h);
        }
        log::warn!("Arnoldi breakdown at step {}; restarting", h.len());
        restarts += 1;
    };

    let s = h.len();
    let hm = Mat::<C>::from_fn(s, s, |i, j| h[i][j]);
    let evd = hm
        .eigen()
        .map_err(|e| Error::Validation(format!("Hessenberg eigenvalue solve failed: {e:?}")))?;
    let theta = evd.S().column_vector();
    let y = evd.U();
    let shift = lower_sqrt(shift_sq);

    let mut candidates: Vec<(usize, C)> = (0..s)
        .filter(|&i| theta[i].norm() > 0.0)
        .map(|i| (i, lower_sqrt(shift_sq + C::new(1.0, 0.0) / theta[i])))
        .collect();
    candidates.sort_by(|a, b| (a.1 - shift).norm().total_cmp(&(b.1 - shift).norm()).then(a.0.cmp(&b.0)));

    let mut pairs = Vec::new();
    let mut dropped = 0;
    for (i, omega) in candidates {
        if pairs.len() == k {
            break;
        }
        let coeffs: Vec<C> = (0..s).map(|j| y[(j, i)]).collect();
        let mut x = combination(&basis[..s], &coeffs, n);
        let nx = norm(&x);
        x.iter_mut().for_each(|a| *a /= nx);
        let residual = rayleigh_residual(pencil, omega, &x);
        if !(residual <= DROP_RESIDUAL) {
            log::warn!("dropping Ritz pair {omega} with residual {residual:.2e}");
            dropped += 1;
            continue;
        }
        pairs.push(Eigenpair {
            omega,
            vector: x,
            residual,
            in_lambda_d0: true,
            spurious: false,
            ambiguous: false,
            movement: None,
        });
    }

    Ok(Spectrum {
        pairs,
        provenance: Provenance {
            shift,
            shift_sq,
            k,
            krylov_dim: opts.krylov_dim,
            seed: opts.seed,
            restarts,
            dropped,
            dofs: n,
            layer_width: None,
            stretch: None,
            move_threshold: None,
        },
    })
}

impl Spectrum {
    pub fn omegas(&self) -> Vec<C> {
        self.pairs.iter().map(|p| p.omega).collect()
    }

    pub fn with_layer_width(mut self, layer_width: f64) -> Self {
        self.provenance.layer_width = Some(layer_width);
        self
    }

    /// Sets `in_lambda_d0` from the limiting phase `d0`.
    pub fn classify(mut self, d0: C) -> Self {
        for p in &mut self.pairs {
            p.in_lambda_d0 = crate::scaling::in_lambda_d0(p.omega, d0, LAMBDA_D0_MARGIN);
        }
        self
    }

    pub fn physical(&self) -> impl Iterator<Item = &Eigenpair> {
        self.pairs.iter().filter(|p| !p.spurious)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["re_omega", "im_omega", "residual", "in_lambda_d0", "spurious"])
            .map_err(io)?;
        for p in &self.pairs {
            w.write_record([
                format!("{:.16e}", p.omega.re),
                format!("{:.16e}", p.omega.im),
                format!("{:.6e}", p.residual),
                p.in_lambda_d0.to_string(),
                p.spurious.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("spectrum serializes")
    }
}

/// Computed eigenvalue read back from a spectrum CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumRow {
    pub omega: C,
    pub residual: f64,
    pub in_lambda_d0: bool,
    pub spurious: bool,
}

pub fn read_spectrum_csv<R: std::io::Read>(input: R) -> Result<Vec<SpectrumRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        if rec.len() != 5 {
            return Err(Error::Parse { line, msg: format!("expected 5 fields, got {}", rec.len()) });
        }
        let num = |j: usize| {
            rec[j].trim().parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("field {}: {e}", j + 1) })
        };
        let flag = |j: usize| {
            rec[j].trim().parse::<bool>().map_err(|e| Error::Parse { line, msg: format!("field {}: {e}", j + 1) })
        };
        rows.push(SpectrumRow {
            omega: C::new(num(0)?, num(1)?),
            residual: num(2)?,
            in_lambda_d0: flag(3)?,
            spurious: flag(4)?,
        });
    }
    Ok(rows)
}

/// Matching radius of the layer-stretch test.
pub const MATCH_RADIUS: f64 = 0.5;
/// Eigenvalues closer than this (relative) count as one degenerate value.
const DEGENERATE_TOL: f64 = 1e-6;
/// A second candidate is a competing match only if it is at most this many
/// times farther away than the nearest one.
const AMBIGUITY_RATIO: f64 = 10.0;
/// Relative movement floor of the spurious test.
pub const MIN_MOVE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpuriousOptions {
    pub stretch: f64,
    pub radius: f64,
    /// Threshold as a multiple of the median matched movement.
    pub move_factor: f64,
    /// Movements below `min_move * |omega|` never count as spurious.
    pub min_move: f64,
}

impl Default for SpuriousOptions {
    fn default() -> Self {
        SpuriousOptions { stretch: 1.5, radius: MATCH_RADIUS, move_factor: 10.0, min_move: MIN_MOVE }
    }
}

/// Flags eigenvalues that move far (or vanish) when the layer is widened.
/// `solve` maps a layer width to a spectrum computed with the same mesh size,
/// order and shift.
pub fn spurious_filter<F>(solve: F, base: &Spectrum, layer_width: f64, opts: &SpuriousOptions) -> Result<Spectrum>
where
    F: Fn(f64) -> Result<Spectrum>,
{
    if !(opts.stretch >= 1.0) || !(opts.radius > 0.0) || !(opts.move_factor > 0.0) || !(opts.min_move >= 0.0) {
        return Err(Error::Validation("stretch must be >= 1, radius and factor positive, floor non-negative".into()));
    }
    let stretched = if opts.stretch == 1.0 { base.clone() } else { solve(opts.stretch * layer_width)? };
    Ok(flag_spurious(base, &stretched.omegas(), layer_width, opts))
}

/// Matching step of [`spurious_filter`] against an already computed spectrum.
pub fn flag_spurious(base: &Spectrum, stretched: &[C], layer_width: f64, opts: &SpuriousOptions) -> Spectrum {
    let mut out = base.clone();
    let mut unique_moves = Vec::new();
    for p in &mut out.pairs {
        let mut near: Vec<(f64, C)> = stretched
            .iter()
            .map(|&z| ((z - p.omega).norm(), z))
            .filter(|(d, _)| *d <= opts.radius)
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        p.spurious = false;
        p.ambiguous = false;
        p.movement = None;
        let Some(&(d, z)) = near.first() else {
            p.spurious = true;
            continue;
        };
        p.movement = Some(d);
        let tol = DEGENERATE_TOL * z.norm().max(1.0);
        if near[1..].iter().any(|(e, w)| (w - z).norm() > tol && *e <= AMBIGUITY_RATIO * d) {
            p.ambiguous = true;
        } else {
            unique_moves.push(d);
        }
    }
    let threshold = if unique_moves.is_empty() {
        0.0
    } else {
        unique_moves.sort_by(f64::total_cmp);
        let mid = unique_moves.len() / 2;
        let median = if unique_moves.len() % 2 == 1 {
            unique_moves[mid]
        } else {
            0.5 * (unique_moves[mid - 1] + unique_moves[mid])
        };
        opts.move_factor * median
    };
    for p in &mut out.pairs {
        if let (Some(d), false) = (p.movement, p.ambiguous) {
            p.spurious = d > threshold.max(opts.min_move * p.omega.norm());
        }
    }
    out.provenance.layer_width = Some(layer_width);
    out.provenance.stretch = Some(opts.stretch);
    out.provenance.move_threshold = Some(threshold);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch() {
        assert_eq!(lower_sqrt(C::new(4.0, 0.0)), C::new(2.0, 0.0));
        assert_eq!(lower_sqrt(C::new(4.0, 1e-16)), C::new(2.0, 0.0));
        assert!((lower_sqrt(C::new(-4.0, 0.0)) - C::new(0.0, -2.0)).norm() < 1e-15);
        let w = lower_sqrt(C::new(1.0, 1.0));
        assert!(w.im < 0.0 && w.re < 0.0);
    }

    #[test]
    fn identity_solve() {
        let lu = sparse_lu(&CsrMatrix::identity(4)).unwrap();
        let b = vec![C::new(1.0, 2.0), C::new(-3.0, 0.5), C::new(0.0, 0.0), C::new(7.0, -1.0)];
        assert_eq!(lu.solve(&b).unwrap(), b);
        let lu = factorize(&CsrMatrix::identity(4), LuStrategy::Sparse).unwrap();
        assert_eq!(lu.solve(&b).unwrap(), b);
    }

    #[test]
    fn singular_reported() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, C::new(1.0, 0.0)), (1, 0, C::new(1.0, 0.0))]).unwrap();
        assert!(matches!(sparse_lu(&a), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn stretch_one_flags_nothing() {
        let mk = |w: f64| Eigenpair {
            omega: C::new(w, -0.5),
            vector: vec![],
            residual: 0.0,
            in_lambda_d0: true,
            spurious: false,
            ambiguous: false,
            movement: None,
        };
        let base = Spectrum {
            pairs: vec![mk(1.0), mk(2.0), mk(3.5)],
            provenance: Provenance {
                shift: C::new(2.0, 0.0),
                shift_sq: C::new(4.0, 0.0),
                k: 3,
                krylov_dim: 16,
                seed: 0,
                restarts: 0,
                dropped: 0,
                dofs: 3,
                layer_width: None,
                stretch: None,
                move_threshold: None,
            },
        };
        let opts = SpuriousOptions { stretch: 1.0, ..Default::default() };
        let out = spurious_filter(|_| unreachable!(), &base, 2.0, &opts).unwrap();
        assert!(out.pairs.iter().all(|p| !p.spurious && p.movement == Some(0.0)));
        let moved = flag_spurious(&base, &[C::new(1.001, -0.5), C::new(2.002, -0.5)], 2.0, &Default::default());
        assert_eq!(moved.pairs.iter().map(|p| p.spurious).collect::<Vec<_>>(), vec![false, false, true]);
    }
}
