//! End-to-end acceptance suite. Runs every criterion in sequence and prints
//! one PASS/FAIL line each; the heavy solves run one at a time to bound
//! peak memory.

use anisopml::analytic::{count_zeros, damping_rate, find_disk_neumann_references, newton_refine, SearchBox};
use anisopml::eig::{lower_sqrt, shift_invert_arnoldi, Spectrum, SpuriousOptions};
use anisopml::fem::{assemble, AssembledPencil, BoundaryConditions, FunctionSpace};
use anisopml::media::{b_tau, numerical_range_bounds, Medium, SymMatrix};
use anisopml::mesh::{generate, Geometry, Obstacle};
use anisopml::pipeline::{Problem, SolverSettings};
use anisopml::scaling::{limits, ProfileKind, ScalingProfile};
use anisopml::Complex64;
use anisopml_cli::compare::{all_matched, match_references, MatchRow, Point};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

type Res = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn within(t: &Instant, limit: f64) -> Result<f64, String> {
    let s = t.elapsed().as_secs_f64();
    ensure(s < limit, || format!("took {s:.1} s, limit {limit} s"))?;
    Ok(s)
}

fn random_spd(rng: &mut ChaCha8Rng, dim: usize) -> SymMatrix {
    let g: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let shift = rng.random_range(0.05..1.0);
    let rows: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| (0..dim).map(|k| g[i * dim + k] * g[j * dim + k]).sum::<f64>() + if i == j { shift } else { 0.0 })
                .collect()
        })
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    SymMatrix::from_rows(&refs).unwrap()
}

fn numerical_range() -> Res {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::NEG_INFINITY;
    for s in 0..10_000 {
        let dim = 2 + s % 2;
        let b = random_spd(&mut rng, dim);
        let tau = rng.random_range(-FRAC_PI_2..FRAC_PI_2) * (1.0 - 1e-9);
        let mut x: Vec<Complex64> = (0..dim).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let n = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= n);
        let z = b_tau(&b, tau).unwrap().quadratic_form(&x);
        let bx = numerical_range_bounds(&b, tau).unwrap();
        let excess = (bx.re_lo - z.re).max(z.re - bx.re_hi).max(bx.im_lo - z.im).max(z.im - bx.im_hi);
        worst = worst.max(excess);
        ensure(bx.contains(z, 1e-10), || format!("sample {s}: {z} outside {bx:?}"))?;
    }
    let secs = within(&t, 5.0)?;
    Ok(format!("10^4 samples inside, largest excess {worst:.1e}, {secs:.2} s"))
}

fn scaling_algebra() -> Res {
    let t = Instant::now();
    let gamma = c(1.0, 8.0);
    let affine = ScalingProfile::affine(1.5, gamma).unwrap();
    let ramp = ScalingProfile::new(ProfileKind::Ramp { width: 1.0, amplitude: 1.0 }, 1.5, gamma).unwrap();
    let mut orders = Vec::new();
    for (name, p, radii) in [("affine", &affine, [2.0, 3.0, 6.0]), ("ramp", &ramp, [1.8, 2.0, 2.3])] {
        let rt = |r: f64| p.eval(r).r_tilde;
        for r in radii {
            let err = |h: f64| ((rt(r + h) - rt(r - h)) / (2.0 * h) - p.eval(r).d).norm();
            let (e1, e2) = (err(1e-2), err(5e-3));
            // r_tilde is linear in r for the affine profile: central differences are exact
            if e1 < 1e-11 {
                orders.push(format!("{name}@{r}: exact"));
                continue;
            }
            let order = (e1 / e2).log2();
            ensure(order >= 1.9, || format!("{name} at r = {r}: order {order:.3}"))?;
            orders.push(format!("{name}@{r}: {order:.2}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for s in 0..100_000 {
        let g = c(rng.random_range(0.0..5.0), rng.random_range(0.0..10.0));
        let kind = match s % 3 {
            0 => ProfileKind::Affine,
            1 => ProfileKind::Ramp { width: rng.random_range(0.1..3.0), amplitude: rng.random_range(0.1..3.0) },
            _ => ProfileKind::SmoothedPolynomial { scale: rng.random_range(0.1..3.0), amplitude: rng.random_range(0.1..3.0) },
        };
        let p = ScalingProfile::new(kind, 1.5, g).unwrap();
        let st = p.eval(rng.random_range(0.0..60.0));
        ensure(st.d_tilde.norm() >= 1.0 - 1e-15 && st.d.norm() >= 1.0 - 1e-15, || format!("sample {s}: {st:?}"))?;
    }
    let mut tau_err: f64 = 0.0;
    for g in [c(0.0, 8.0), c(1.0, 1.0), c(0.3, 2.0), c(4.0, 0.5)] {
        let tau = limits(&ScalingProfile::affine(1.5, g).unwrap(), &Medium::isotropic(2)).unwrap().tau_star;
        tau_err = tau_err.max((tau - (1.0 + g).arg()).abs());
    }
    ensure(tau_err <= 1e-12, || format!("affine tau* off by {tau_err:e}"))?;
    let secs = within(&t, 5.0)?;
    Ok(format!("FD orders [{}], 10^5 |d|,|d~| >= 1, tau* error {tau_err:.1e}, {secs:.2} s", orders.join(", ")))
}

fn damping() -> Res {
    let t = Instant::now();
    let omega = c(1.0, 0.0);
    let profile = ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap();
    let mut lines = Vec::new();
    for (name, medium, r0, expected) in [
        ("isotropic", Medium::isotropic(2), 1.0, Some(8.0)),
        ("anisotropic", Medium::diag(&[0.25, 1.0]).unwrap(), 0.3, None),
    ] {
        let lim = limits(&profile, &medium).unwrap();
        let bound = -(Complex64::i() * omega * lim.d0).re * lim.d_inf.norm() / medium.sigma_max();
        if let Some(e) = expected {
            ensure((bound - e).abs() < 1e-12, || format!("{name} bound {bound}"))?;
        }
        let mut min_ratio = f64::INFINITY;
        for k in 0..8 {
            let th = k as f64 * PI / 4.0;
            let rate = damping_rate(omega, &profile, &medium, &[th.cos(), th.sin()], r0).map_err(|e| e.to_string())?;
            ensure((rate.bound - bound).abs() < 1e-12, || format!("{name}: bound {}", rate.bound))?;
            min_ratio = min_ratio.min(rate.measured / bound);
        }
        ensure(min_ratio >= 0.95, || format!("{name}: measured/bound {min_ratio:.4}"))?;
        lines.push(format!("{name} bound {bound:.4}, min measured/bound {min_ratio:.4}"));
    }
    let secs = within(&t, 10.0)?;
    Ok(format!("{}, {secs:.2} s", lines.join("; ")))
}

fn reference_box() -> SearchBox {
    SearchBox::new(0.1, 8.0, -3.0, 0.0).unwrap()
}

fn reference_roots() -> Res {
    let t = Instant::now();
    let bx = reference_box();
    let refs = find_disk_neumann_references(6, &bx).map_err(|e| e.to_string())?;
    let mut counts = Vec::new();
    for n in 0..=6 {
        let expected = count_zeros(n, &bx).map_err(|e| e.to_string())?;
        let found: Vec<Complex64> = refs.iter().filter(|r| r.order == n).map(|r| r.root).collect();
        let distinct = found.iter().enumerate().filter(|(i, z)| found[..*i].iter().all(|w| (*w - **z).norm() > 1e-8)).count();
        ensure(distinct == expected, || format!("order {n}: argument principle {expected}, Newton {distinct}"))?;
        counts.push(expected.to_string());
    }
    let max_res = refs.iter().map(|r| r.residual).fold(0.0, f64::max);
    ensure(max_res < 1e-10, || format!("residual {max_res:e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut drift: f64 = 0.0;
    for r in &refs {
        for _ in 0..4 {
            let d = Complex64::from_polar(rng.random_range(1e-4..1e-2), rng.random_range(0.0..2.0 * PI));
            let again = newton_refine(r.order, r.root + d).map_err(|e| e.to_string())?;
            let again = again.ok_or_else(|| format!("order {} seed {} did not converge", r.order, r.root + d))?;
            drift = drift.max((again.root - r.root).norm());
        }
    }
    ensure(drift < 1e-9, || format!("reconvergence drift {drift:e}"))?;
    let secs = within(&t, 30.0)?;
    Ok(format!("counts n=0..6 [{}], max residual {max_res:.1e}, reseed drift {drift:.1e}, {secs:.2} s", counts.join(" ")))
}

fn full_problem(anisotropic: bool) -> Problem {
    let (obstacle, medium) = if anisotropic {
        (Obstacle::Ellipse { a1: 0.5, a2: 1.0 }, Medium::diag(&[0.25, 1.0]).unwrap())
    } else {
        (Obstacle::Disk { radius: 1.0 }, Medium::isotropic(2))
    };
    Problem {
        geometry: Geometry::new(obstacle, 1.5, 2.0).unwrap(),
        medium,
        profile: ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap(),
        hmax: 0.1,
        order: 6,
        refinements: 0,
        boundary: BoundaryConditions::default(),
    }
}

const FULL_SETTINGS: SolverSettings = SolverSettings { shift: Complex64::new(2.84, 0.35), k: 24, krylov_dim: 88, seed: 0 };

struct FullRun {
    spectrum: Spectrum,
    rows: Vec<MatchRow>,
    secs: f64,
}

fn reference_points() -> Vec<Point> {
    find_disk_neumann_references(6, &reference_box())
        .unwrap()
        .into_iter()
        .map(|r| Point { omega: r.root, residual: Some(r.residual), spurious: false, order: Some(r.order) })
        .collect()
}

fn full_run(anisotropic: bool) -> Result<FullRun, String> {
    let t = Instant::now();
    let spectrum = full_problem(anisotropic)
        .solve_filtered(&FULL_SETTINGS, &SpuriousOptions::default())
        .map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let computed: Vec<Point> = spectrum
        .pairs
        .iter()
        .map(|p| Point { omega: p.omega, residual: Some(p.residual), spurious: p.spurious, order: None })
        .collect();
    let rows = match_references(&computed, &reference_points(), 5, 1e-2);
    Ok(FullRun { spectrum, rows, secs })
}

fn judge_full(run: &FullRun) -> Res {
    let errs: Vec<String> = run.rows.iter().map(|r| r.rel_error.map_or("-".into(), |e| format!("{e:.1e}"))).collect();
    ensure(all_matched(&run.rows, 5), || format!("relative errors [{}]", errs.join(" ")))?;
    let max_res = run.rows.iter().filter_map(|r| r.computed.and_then(|c| c.residual)).fold(0.0, f64::max);
    ensure(max_res < 1e-8, || format!("residual {max_res:e}"))?;
    ensure(run.secs < 300.0, || format!("took {:.0} s", run.secs))?;
    Ok(format!("relative errors [{}], max residual {max_res:.1e}, {:.0} s", errs.join(" "), run.secs))
}

/// Flags in a run and the median layer-stretch movement of the values
/// matched to references.
fn flag_summary(run: &FullRun) -> Result<(usize, f64), String> {
    let mut moves: Vec<f64> = run
        .rows
        .iter()
        .filter_map(|r| r.computed)
        .filter_map(|c| run.spectrum.pairs.iter().find(|p| p.omega == c.omega).and_then(|p| p.movement))
        .collect();
    ensure(!moves.is_empty(), || "no matched physical resonances".into())?;
    moves.sort_by(f64::total_cmp);
    let median = if moves.len() % 2 == 1 { moves[moves.len() / 2] } else { 0.5 * (moves[moves.len() / 2 - 1] + moves[moves.len() / 2]) };
    let mut flagged = 0;
    for p in run.spectrum.pairs.iter().filter(|p| p.spurious) {
        flagged += 1;
        if let Some(m) = p.movement {
            ensure(m > 10.0 * median, || format!("flagged {} moved only {m:e} (median {median:e})", p.omega))?;
        }
    }
    Ok((flagged, median))
}

fn spurious(iso: &FullRun, aniso: &FullRun) -> Res {
    let (fi, mi) = flag_summary(iso)?;
    let (fa, ma) = flag_summary(aniso)?;
    ensure(fa >= fi, || format!("anisotropic flags {fa} < isotropic {fi}"))?;
    Ok(format!("flagged isotropic {fi} (median move {mi:.1e}), anisotropic {fa} (median move {ma:.1e})"))
}

fn first_resonance_error(p: usize, layer: f64) -> Result<f64, String> {
    let problem = Problem { hmax: 0.15, order: p, geometry: Geometry::new(Obstacle::Disk { radius: 1.0 }, 1.5, layer).unwrap(), ..full_problem(false) };
    let reference = c(0.501183508691585, -0.6435450244768959);
    let settings = SolverSettings { shift: c(0.5, -0.6), k: 4, krylov_dim: 40, seed: 0 };
    let s = problem.solve(&settings).map_err(|e| e.to_string())?;
    s.pairs
        .iter()
        .map(|q| (q.omega - reference).norm() / reference.norm())
        .min_by(f64::total_cmp)
        .ok_or_else(|| "no eigenvalue".into())
}

fn convergence() -> Res {
    let errs: Vec<f64> = [2, 3, 4].iter().map(|&p| first_resonance_error(p, 2.0)).collect::<Result<_, _>>()?;
    for w in errs.windows(2) {
        // a stall within a factor 2 is tolerated once the error is at its floor
        let ok = w[1] < w[0] || (w[1] <= 2.0 * w[0] && w[0] < 1e-8);
        ensure(ok, || format!("p = 2, 3, 4 errors {errs:?}"))?;
    }
    let short = first_resonance_error(4, 1.0)?;
    let long = first_resonance_error(4, 2.0)?;
    ensure(long < short, || format!("L = 1: {short:.2e}, L = 2: {long:.2e}"))?;
    let shown: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
    Ok(format!("p = 2, 3, 4 errors [{}]; p = 4 L = 1 {short:.2e}, L = 2 {long:.2e}", shown.join(" ")))
}

fn small_pencil(damped: bool, aniso: bool) -> AssembledPencil {
    let (obstacle, medium) = if aniso {
        (Obstacle::Ellipse { a1: 0.5, a2: 1.0 }, Medium::diag(&[0.25, 1.0]).unwrap())
    } else {
        (Obstacle::Disk { radius: 1.0 }, Medium::isotropic(2))
    };
    let mesh = generate(&Geometry::new(obstacle, 1.5, 1.0).unwrap(), 1.0, 2).unwrap();
    let space = FunctionSpace::new(&mesh, 2, BoundaryConditions::default()).unwrap();
    let profile = ScalingProfile::affine(1.5, c(0.0, 8.0)).unwrap();
    assemble(&space, damped.then_some(&profile), &medium).unwrap()
}

fn oracle() -> Res {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut sizes = Vec::new();
    for (damped, aniso) in [(false, false), (true, false), (true, true)] {
        let p = small_pencil(damped, aniso);
        let n = p.dim();
        ensure(n <= 200, || format!("{n} dofs"))?;
        sizes.push(n.to_string());
        let shift = c(2.0, -0.4);
        let s = shift_invert_arnoldi(&p, shift * shift, 6, 60).map_err(|e| e.to_string())?;
        let k = DMatrix::from_fn(n, n, |i, j| p.k.get(i, j));
        let m = DMatrix::from_fn(n, n, |i, j| p.m.get(i, j));
        let dense = m.lu().solve(&k).ok_or("singular mass matrix")?.schur().eigenvalues().ok_or("dense eigenvalues")?;
        ensure(s.pairs.len() == 6, || format!("{} pairs", s.pairs.len()))?;
        for q in &s.pairs {
            let err = dense.iter().map(|&l| (lower_sqrt(l) - q.omega).norm()).fold(f64::INFINITY, f64::min) / q.omega.norm();
            worst = worst.max(err);
        }
    }
    ensure(worst < 1e-9, || format!("deviation {worst:e}"))?;
    let secs = within(&t, 10.0)?;
    Ok(format!("pencils of {} dofs, max relative deviation {worst:.1e}, {secs:.2} s", sizes.join("/")))
}

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()))
}

fn report(n: usize, name: &str, r: &Res) -> bool {
    match r {
        Ok(d) => println!("criterion {n} ({name}): PASS: {d}"),
        Err(d) => println!("criterion {n} ({name}): FAIL: {d}"),
    }
    r.is_ok()
}

fn main() {
    let mut ok = true;
    ok &= report(1, "numerical range", &guarded(numerical_range));
    ok &= report(2, "scaling algebra", &guarded(scaling_algebra));
    ok &= report(3, "damping", &guarded(damping));
    ok &= report(4, "reference roots", &guarded(reference_roots));

    let iso = guarded(|| full_run(false));
    ok &= report(5, "isotropic disk", &iso.as_ref().map_err(Clone::clone).and_then(judge_full));
    let aniso = guarded(|| full_run(true));
    ok &= report(6, "anisotropic ellipse", &aniso.as_ref().map_err(Clone::clone).and_then(judge_full));
    let seven = match (&iso, &aniso) {
        (Ok(i), Ok(a)) => guarded(|| spurious(i, a)),
        _ => Err("needs both runs".into()),
    };
    ok &= report(7, "spurious behaviour", &seven);
    drop((iso, aniso));

    ok &= report(8, "convergence", &guarded(convergence));
    ok &= report(9, "solver oracle", &guarded(oracle));
    if !ok {
        std::process::exit(1);
    }
}
