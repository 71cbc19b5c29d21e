use anisopml::eig::{
    factorize, factorize_condensed, factorize_symmetric, flag_spurious, lower_sqrt, read_spectrum_csv, shift_invert_arnoldi, shift_invert_arnoldi_with,
    sparse_lu, spurious_filter, ArnoldiOptions, LuStrategy, SpuriousOptions,
};
use anisopml::fem::{assemble, rayleigh_residual, AssembledPencil, BoundaryConditions, FunctionSpace};
use anisopml::media::Medium;
use anisopml::mesh::{generate, Geometry, Obstacle};
use anisopml::scaling::ScalingProfile;
use anisopml::sparse::CsrMatrix;
use anisopml::{Complex64, Error};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn small_pencil(damped: bool) -> AssembledPencil {
    let geo = Geometry::new(Obstacle::Disk { radius: 1.0 }, 1.5, 1.0).unwrap();
    let mesh = generate(&geo, 1.0, 2).unwrap();
    let space = FunctionSpace::new(&mesh, 2, BoundaryConditions::default()).unwrap();
    let profile = ScalingProfile::affine(1.5, c(0.0, 2.0)).unwrap();
    assemble(&space, damped.then_some(&profile), &Medium::isotropic(2)).unwrap()
}

fn dense_omegas(p: &AssembledPencil) -> Vec<Complex64> {
    let n = p.dim();
    let k = DMatrix::from_fn(n, n, |i, j| p.k.get(i, j));
    let m = DMatrix::from_fn(n, n, |i, j| p.m.get(i, j));
    let a = m.lu().solve(&k).unwrap();
    a.schur().eigenvalues().unwrap().iter().map(|&l| lower_sqrt(l)).collect()
}

#[test]
fn diagonal_pencil() {
    let k = CsrMatrix::from_triplets(2, &[(0, 0, c(2.0, 0.0)), (1, 1, c(5.0, 0.0))]).unwrap();
    let p = AssembledPencil::new(k, CsrMatrix::identity(2));
    let s = shift_invert_arnoldi(&p, c(1.9, 0.0), 1, 12).unwrap();
    assert_eq!(s.pairs.len(), 1);
    assert!((s.pairs[0].omega - c(2f64.sqrt(), 0.0)).norm() < 1e-14);
    assert!(s.pairs[0].residual < 1e-14);
}

#[test]
fn shift_on_eigenvalue_is_rejected() {
    let k = CsrMatrix::from_triplets(2, &[(0, 0, c(2.0, 0.0)), (1, 1, c(5.0, 0.0))]).unwrap();
    let p = AssembledPencil::new(k, CsrMatrix::identity(2));
    assert!(matches!(shift_invert_arnoldi(&p, c(2.0, 0.0), 1, 12), Err(Error::ShiftRejected(_))));
    assert!(matches!(shift_invert_arnoldi(&p, c(1.0, 0.0), 3, 12), Err(Error::Validation(_))));
}

#[test]
fn matches_dense_oracle() {
    for damped in [false, true] {
        let p = small_pencil(damped);
        let n = p.dim();
        assert!(n <= 200, "{n}");
        let shift = c(2.0, -0.4);
        let k = 6;
        let s = shift_invert_arnoldi(&p, shift * shift, k, 60).unwrap();
        assert_eq!(s.pairs.len(), k);
        let mut dense = dense_omegas(&p);
        dense.sort_by(|a, b| (a - shift).norm().total_cmp(&(b - shift).norm()));
        for (pair, exact) in s.pairs.iter().zip(&dense) {
            assert!((pair.omega - exact).norm() < 1e-9 * exact.norm(), "{} vs {exact}", pair.omega);
            assert!(pair.omega.im <= 0.0);
            assert!(pair.residual < 1e-10);
            assert!((rayleigh_residual(&p, pair.omega, &pair.vector) - pair.residual).abs() < 1e-18);
        }
    }
}

#[test]
fn deterministic() {
    let p = small_pencil(true);
    let opts = ArnoldiOptions::new(5, 40).with_seed(7);
    let a = shift_invert_arnoldi_with(&p, c(3.0, -1.0), &opts).unwrap();
    let b = shift_invert_arnoldi_with(&p, c(3.0, -1.0), &opts).unwrap();
    assert_eq!(a, b);
    let mut x = Vec::new();
    let mut y = Vec::new();
    a.write_csv(&mut x).unwrap();
    b.write_csv(&mut y).unwrap();
    assert_eq!(x, y);
    let rows = read_spectrum_csv(x.as_slice()).unwrap();
    assert_eq!(rows.len(), a.pairs.len());
    assert_eq!(rows[0].omega, a.pairs[0].omega);
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = sup[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * cp[i - 1];
        cp[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

#[test]
fn laplacian_against_thomas() {
    let n = 300;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, c(2.0, 0.0)));
        if i + 1 < n {
            t.push((i, i + 1, c(-1.0, 0.0)));
            t.push((i + 1, i, c(-1.0, 0.0)));
        }
    }
    let a = CsrMatrix::from_triplets(n, &t).unwrap();
    let rhs: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin()).collect();
    let exact = thomas(&vec![-1.0; n], &vec![2.0; n], &vec![-1.0; n], &rhs);
    let b: Vec<Complex64> = rhs.iter().map(|&v| c(v, 0.0)).collect();
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for strategy in [LuStrategy::Dense, LuStrategy::Sparse] {
        let x = factorize(&a, strategy).unwrap().solve(&b).unwrap();
        for (u, v) in x.iter().zip(&exact) {
            assert!((u.re - v).abs() <= 1e-12 * scale && u.im == 0.0);
        }
    }
}

#[test]
fn random_sparse_residual() {
    let n = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut t: Vec<(usize, usize, Complex64)> =
        (0..n).map(|i| (i, i, c(rng.random_range(1.0..2.0), rng.random_range(-1.0..1.0)))).collect();
    for _ in 0..500 {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        t.push((i, j, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
    }
    let a = CsrMatrix::from_triplets(n, &t).unwrap();
    let b: Vec<Complex64> = (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let bn = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    for strategy in [LuStrategy::Auto, LuStrategy::Sparse] {
        let lu = factorize(&a, strategy).unwrap();
        assert_eq!(lu.is_dense(), strategy == LuStrategy::Auto);
        let r = a.mul_vec(&lu.solve(&b).unwrap());
        let err = r.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(err / bn < 1e-10, "{strategy:?}: {}", err / bn);
    }
    assert!(sparse_lu(&CsrMatrix::from_triplets(3, &[(0, 0, c(1.0, 0.0))]).unwrap()).is_err());
}

#[test]
fn filter_flags_vanishing_eigenvalues() {
    let p = small_pencil(true);
    let base = shift_invert_arnoldi(&p, c(4.0, -1.0), 4, 40).unwrap();
    let same = spurious_filter(|_| Ok(base.clone()), &base, 1.0, &SpuriousOptions::default()).unwrap();
    assert!(same.pairs.iter().all(|q| !q.spurious));
    // drop the last value together with a degenerate twin
    let last = base.pairs.last().unwrap().omega;
    let partners: Vec<Complex64> = base.omegas().into_iter().filter(|z| (z - last).norm() > 1e-6).collect();
    let opts = SpuriousOptions { radius: 1e-3, ..Default::default() };
    let out = flag_spurious(&base, &partners, 1.0, &opts);
    for q in &out.pairs {
        assert_eq!(q.spurious, (q.omega - last).norm() <= 1e-6, "{}", q.omega);
    }
}

fn relative_residual(a: &CsrMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
    let r: f64 = a.mul_vec(x).iter().zip(b).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
    r / b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn condensed_and_symmetric_solves() {
    let geo = Geometry::new(Obstacle::Ellipse { a1: 0.5, a2: 1.0 }, 1.5, 1.0).unwrap();
    let mesh = generate(&geo, 0.3, 4).unwrap();
    let space = FunctionSpace::new(&mesh, 4, BoundaryConditions::default()).unwrap();
    let profile = ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap();
    let p = assemble(&space, Some(&profile), &Medium::diag(&[0.25, 1.0]).unwrap()).unwrap();
    let blocks = p.interior.unwrap();
    assert_eq!(blocks.size, 3);
    assert!(blocks.start > 3000);
    let a = p.k.combine(c(1.0, 0.0), &p.m, -c(2.0, -1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b: Vec<Complex64> = (0..a.dim()).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let plain = factorize(&a, LuStrategy::Sparse).unwrap().solve(&b).unwrap();
    let sym = factorize_symmetric(&a).unwrap().solve(&b).unwrap();
    let cond = factorize_condensed(&a, p.interior).unwrap().solve(&b).unwrap();
    for x in [&plain, &sym, &cond] {
        assert!(relative_residual(&a, x, &b) < 1e-10);
    }
    let diff: f64 = plain.iter().zip(&cond).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
    let scale: f64 = plain.iter().map(|u| u.norm()).fold(0.0, f64::max);
    assert!(diff < 1e-9 * scale, "{}", diff / scale);
}
