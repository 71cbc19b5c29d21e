//! The five batch commands. Each returns the text printed on stdout and an
//! exit code, and writes its artifacts into the output directory.

use crate::compare::{all_matched, load_points, match_references, MatchRow, Point};
use crate::config::{sha256_hex, ConfigError, Format, LoadedConfig};
use crate::svg::{spectrum_svg, Marker};
use anisopml::analytic::{damping_rate, find_disk_neumann_references, write_references_csv, SearchBox};
use anisopml::eig::Spectrum;
use anisopml::scaling::{admissible, min_stabilizing_c};
use anisopml::{Complex64, Error};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_VIOLATION: u8 = 2;
pub const EXIT_INCOMPLETE: u8 = 3;
pub const EXIT_UNMATCHED: u8 = 4;
pub const EXIT_CONFIG: u8 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: u8,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn new(code: u8, msg: impl Into<String>) -> Self {
        CliError { code, msg: msg.into() }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(EXIT_CONFIG, format!("config error: {e}"))
    }
}

type CmdResult = Result<Outcome, CliError>;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::new(EXIT_FAILURE, format!("cannot write {}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(path)
}

fn provenance(command: &str, cfg: &LoadedConfig, result: Value) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.path.as_ref().map(|p| p.display().to_string()),
        "config_sha256": cfg.sha256,
        "result": result,
    })
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    write_file(dir, name, text.as_bytes())
}

fn wants(cfg: &LoadedConfig, f: Format) -> bool {
    cfg.config.output.formats.contains(&f)
}

/// Output directory: the `--out` flag, else the config's `output.directory`.
pub fn output_dir(cfg: &LoadedConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| cfg.resolve_path(&cfg.config.output.directory))
}

fn fmt_c(z: Complex64) -> String {
    format!("{:.10}{:+.10}i", z.re, z.im)
}

fn verdict(ok: bool) -> &'static str {
    if ok { "ok" } else { "VIOLATED" }
}

/// Admissibility of the scaling for the configured medium. A frequency
/// dependent `gamma` is checked at its worst real frequency `sqrt(c^2 + c)`.
pub fn check(cfg: &LoadedConfig, out: &Path) -> CmdResult {
    let c = &cfg.config;
    let medium = c.medium()?;
    let worst = c.scaling.c.filter(|_| c.scaling.omega_dependent).map(|c| (c * c + c).sqrt());
    let profile = c.profile_at(worst)?;
    let r0 = c.obstacle_extent()?;
    let report = admissible(&profile, &medium, r0).map_err(|e| CliError::new(EXIT_CONFIG, format!("config error: {e}")))?;
    let c_min = min_stabilizing_c(&medium).ok();

    let mut t = String::new();
    let _ = writeln!(t, "gamma                 {}", fmt_c(profile.gamma()));
    let _ = writeln!(t, "(a) profile           {}", verdict(report.profile_ok));
    for note in &report.profile_notes {
        let _ = writeln!(t, "      {note}");
    }
    let _ = writeln!(
        t,
        "(b) onset radius      {}  r1 = {}, required > {:.6}",
        verdict(report.onset_radius_ok),
        profile.r1(),
        report.onset_radius_required
    );
    let _ = writeln!(
        t,
        "(c) anisotropy        {}  cos(tau*) = {:.6}, threshold 1 - smin/smax = {:.6}",
        verdict(report.anisotropy_condition_ok),
        report.cos_tau_star,
        report.anisotropy_degree
    );
    let _ = writeln!(t, "(d) tail              {}", verdict(report.tail_ok));
    let _ = writeln!(t, "tau*                  {:.12}", report.tau_star);
    let _ = writeln!(t, "psi*                  {:.12}{}", report.psi_star, if report.psi_flagged { "  (flagged)" } else { "" });
    match c_min {
        Some(v) => {
            let _ = writeln!(t, "min stabilizing c     {v:.12}");
        }
        None => {
            let _ = writeln!(t, "min stabilizing c     none");
        }
    }
    let ok = report.sufficient_conditions_hold();
    let _ = writeln!(t, "sufficient conditions {}", if ok { "hold" } else { "violated" });

    let result = json!({
        "gamma": [profile.gamma().re, profile.gamma().im],
        "checked_at_omega": worst,
        "report": report,
        "min_stabilizing_c": c_min,
        "sufficient_conditions_hold": ok,
    });
    write_json(out, "check.json", &provenance("check", cfg, result))?;
    Ok(Outcome { code: if ok { EXIT_OK } else { EXIT_VIOLATION }, text: t })
}

/// Exit code for a failed root search.
pub fn search_exit_code(e: &Error) -> u8 {
    match e {
        Error::IncompleteSearch { .. } => EXIT_INCOMPLETE,
        Error::Domain(_) | Error::Validation(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Zeros of `(H_n^(1))'` in the configured box.
pub fn reference(cfg: &LoadedConfig, out: &Path) -> CmdResult {
    let r = &cfg.config.reference;
    let bx = SearchBox::new(r.re[0], r.re[1], r.im[0], r.im[1])
        .map_err(|e| CliError::from(ConfigError::key("reference", e.to_string())))?;
    let refs = find_disk_neumann_references(r.n_max, &bx).map_err(|e| match search_exit_code(&e) {
        EXIT_CONFIG => ConfigError::key("reference", e.to_string()).into(),
        code => CliError::new(code, e.to_string()),
    })?;
    let mut csv = Vec::new();
    write_references_csv(&refs, &mut csv).map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;
    write_file(out, "references.csv", &csv)?;
    let result = json!({ "n_max": r.n_max, "box": { "re": r.re, "im": r.im }, "roots": refs });
    write_json(out, "references.json", &provenance("reference", cfg, result))?;

    let mut t = String::new();
    let _ = writeln!(t, "{:>3} {:>3}  {:>26}  {:>9}", "n", "k", "root", "residual");
    for x in &refs {
        let _ = writeln!(t, "{:>3} {:>3}  {:>26}  {:9.2e}", x.order, x.index, fmt_c(x.root), x.residual);
    }
    let _ = writeln!(t, "{} roots", refs.len());
    Ok(Outcome { code: EXIT_OK, text: t })
}

fn plot_points(spectrum: &Spectrum, refs: &[Point]) -> Vec<(Complex64, Marker)> {
    let mut pts: Vec<(Complex64, Marker)> = refs.iter().map(|r| (r.omega, Marker::Reference)).collect();
    pts.extend(spectrum.pairs.iter().map(|p| {
        let m = if p.spurious {
            Marker::Spurious
        } else if p.ambiguous {
            Marker::Ambiguous
        } else {
            Marker::Physical
        };
        (p.omega, m)
    }));
    pts
}

/// Mesh, assembly, eigensolve and layer-stretch filter.
pub fn solve(cfg: &LoadedConfig, out: &Path, seed: Option<u64>) -> CmdResult {
    let (problem, mut settings, filter) = cfg.config.problem()?;
    if let Some(seed) = seed {
        settings.seed = seed;
    }
    let refs = match &cfg.config.output.reference {
        Some(p) => {
            let path = cfg.resolve_path(p);
            load_points(&path).map_err(|e| ConfigError::key("output.reference", format!("{}: {e}", path.display())))?
        }
        None => Vec::new(),
    };
    let spectrum = problem
        .solve_filtered(&settings, &filter)
        .map_err(|e| CliError::new(EXIT_FAILURE, format!("{} stage failed: {}", e.stage, e.error)))?;

    let mut files = Vec::new();
    if wants(cfg, Format::Csv) {
        let mut csv = Vec::new();
        spectrum.write_csv(&mut csv).map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;
        files.push(write_file(out, "spectrum.csv", &csv)?);
    }
    if wants(cfg, Format::Json) {
        let result = json!({
            "filter": {
                "stretch": filter.stretch,
                "match_radius": filter.radius,
                "move_factor": filter.move_factor,
                "min_move": filter.min_move,
            },
            "hmax": problem.hmax,
            "p": problem.order,
            "refinements": problem.refinements,
            "spectrum": spectrum.to_json(),
        });
        files.push(write_json(out, "spectrum.json", &provenance("solve", cfg, result))?);
    }
    if wants(cfg, Format::Svg) {
        let title = format!("Spectrum (hmax = {}, p = {}, L = {})", problem.hmax, problem.order, problem.geometry.layer_width);
        files.push(write_file(out, "spectrum.svg", spectrum_svg(&title, &plot_points(&spectrum, &refs)).as_bytes())?);
    }

    let mut t = String::new();
    let _ = writeln!(t, "{:>26}  {:>9}  {:>9}  flags", "omega", "residual", "movement");
    for p in &spectrum.pairs {
        let mv = p.movement.map(|m| format!("{m:9.2e}")).unwrap_or_else(|| format!("{:>9}", "-"));
        let mut flags = Vec::new();
        if p.spurious {
            flags.push("spurious");
        }
        if p.ambiguous {
            flags.push("ambiguous");
        }
        if !p.in_lambda_d0 {
            flags.push("outside-lambda");
        }
        let _ = writeln!(t, "{:>26}  {:9.2e}  {mv}  {}", fmt_c(p.omega), p.residual, flags.join(","));
    }
    let _ = writeln!(
        t,
        "{} eigenvalues, {} spurious, {} dofs",
        spectrum.pairs.len(),
        spectrum.pairs.iter().filter(|p| p.spurious).count(),
        spectrum.provenance.dofs
    );
    for f in files {
        let _ = writeln!(t, "wrote {}", f.display());
    }
    Ok(Outcome { code: EXIT_OK, text: t })
}

/// Relative errors of the first `count` references against the computed
/// non-spurious resonances.
pub fn compare(computed: &Path, reference: &Path, tolerance: f64, count: usize, out: Option<&Path>) -> CmdResult {
    if !(tolerance > 0.0) {
        return Err(CliError::new(EXIT_CONFIG, "tolerance must be positive"));
    }
    let read = |p: &Path| -> Result<(Vec<Point>, String), CliError> {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::new(EXIT_CONFIG, format!("cannot read {}: {e}", p.display())))?;
        let pts = crate::compare::read_points(&text).map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", p.display())))?;
        Ok((pts, sha256_hex(text.as_bytes())))
    };
    let (comp, comp_hash) = read(computed)?;
    let (refs, ref_hash) = read(reference)?;
    let rows = match_references(&comp, &refs, count, tolerance);
    let ok = all_matched(&rows, count);

    let mut t = String::new();
    let _ = writeln!(t, "{:>26}  {:>26}  {:>9}  status", "reference", "computed", "rel.error");
    for r in &rows {
        let _ = writeln!(
            t,
            "{:>26}  {:>26}  {:>9}  {}",
            fmt_c(r.reference.omega),
            r.computed.map(|c| fmt_c(c.omega)).unwrap_or_else(|| "-".into()),
            r.rel_error.map(|e| format!("{e:9.2e}")).unwrap_or_else(|| "-".into()),
            if r.matched { "matched" } else { "UNMATCHED" }
        );
    }
    for _ in rows.len()..count {
        let _ = writeln!(t, "{:>26}  {:>26}  {:>9}  UNMATCHED", "(missing reference)", "-", "-");
    }
    let _ = writeln!(t, "{} of {count} references matched within {tolerance:e}", rows.iter().filter(|r| r.matched).count());
    if let Some(dir) = out {
        let table: Vec<Value> = rows.iter().map(row_json).collect();
        let doc = json!({
            "command": "compare",
            "version": env!("CARGO_PKG_VERSION"),
            "computed": { "path": computed.display().to_string(), "sha256": comp_hash },
            "reference": { "path": reference.display().to_string(), "sha256": ref_hash },
            "tolerance": tolerance,
            "count": count,
            "all_matched": ok,
            "rows": table,
        });
        write_json(dir, "compare.json", &doc)?;
    }
    Ok(Outcome { code: if ok { EXIT_OK } else { EXIT_UNMATCHED }, text: t })
}

fn row_json(r: &MatchRow) -> Value {
    json!({
        "reference": [r.reference.omega.re, r.reference.omega.im],
        "computed": r.computed.map(|c| [c.omega.re, c.omega.im]),
        "residual": r.computed.and_then(|c| c.residual),
        "rel_error": r.rel_error,
        "matched": r.matched,
    })
}

/// Measured decay of the scaled fundamental solution along equally spaced
/// rays next to the guaranteed rate.
pub fn damping(cfg: &LoadedConfig, out: &Path, omega: Option<Complex64>, rays: Option<usize>) -> CmdResult {
    let c = &cfg.config;
    let omega = match omega {
        Some(w) => w,
        None => c.damping.omega.resolve("damping.omega")?,
    };
    let rays = rays.unwrap_or(c.damping.rays);
    let medium = c.medium()?;
    let profile = c.profile_at(Some(omega.re))?;
    let r0 = c.obstacle_extent()?;

    let mut rows = Vec::new();
    for j in 0..rays {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / rays as f64;
        let dir = [theta.cos(), theta.sin()];
        match damping_rate(omega, &profile, &medium, &dir, r0) {
            Ok(rate) => rows.push((theta, rate)),
            Err(e @ (Error::Precondition(_) | Error::Domain(_))) => {
                return Err(CliError::new(EXIT_VIOLATION, format!("hypothesis violated: {e}")));
            }
            Err(e) => return Err(CliError::new(EXIT_FAILURE, e.to_string())),
        }
    }

    let mut t = String::new();
    let mut csv = String::from("direction_deg,measured,bound\n");
    let _ = writeln!(t, "{:>13}  {:>14}  {:>14}", "direction_deg", "measured", "bound");
    for (theta, r) in &rows {
        let deg = theta.to_degrees();
        let _ = writeln!(t, "{deg:>13.3}  {:>14.8}  {:>14.8}", r.measured, r.bound);
        let _ = writeln!(csv, "{deg:.6},{:.16e},{:.16e}", r.measured, r.bound);
    }
    write_file(out, "damping.csv", csv.as_bytes())?;
    let table: Vec<Value> = rows
        .iter()
        .map(|(th, r)| json!({ "direction_deg": th.to_degrees(), "measured": r.measured, "bound": r.bound }))
        .collect();
    let result = json!({ "omega": [omega.re, omega.im], "rays": rays, "rows": table });
    write_json(out, "damping.json", &provenance("damping", cfg, result))?;
    Ok(Outcome { code: EXIT_OK, text: t })
}
