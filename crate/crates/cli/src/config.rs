//! Run configuration: a TOML file with one table per block.

use anisopml::eig::SpuriousOptions;
use anisopml::fem::BoundaryConditions;
use anisopml::media::{Medium, SymMatrix};
use anisopml::mesh::{Geometry, Obstacle};
use anisopml::pipeline::{Problem, SolverSettings};
use anisopml::scaling::{gamma_of_omega, ProfileKind, ScalingProfile};
use anisopml::Complex64;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};

pub const MAX_ORDER: usize = 6;

/// A configuration problem, reported with the offending line or key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub msg: String,
}

impl ConfigError {
    pub fn key(key: &str, msg: impl Into<String>) -> Self {
        ConfigError { line: None, key: Some(key.to_string()), msg: msg.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "key `{key}`: ")?;
        }
        f.write_str(&self.msg)
    }
}

impl std::error::Error for ConfigError {}

/// A complex number written as `[re, im]`, a real number, or text such as
/// `"8i"`, `"1-2i"` or `"0+8i"`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ComplexValue {
    Pair([f64; 2]),
    Real(f64),
    Text(String),
}

impl ComplexValue {
    pub fn resolve(&self, key: &str) -> Result<Complex64, ConfigError> {
        let z = match self {
            ComplexValue::Pair([re, im]) => Complex64::new(*re, *im),
            ComplexValue::Real(re) => Complex64::new(*re, 0.0),
            ComplexValue::Text(s) => parse_complex(s).ok_or_else(|| ConfigError::key(key, format!("cannot read {s:?} as a complex number")))?,
        };
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(ConfigError::key(key, "value must be finite"));
        }
        Ok(z)
    }
}

fn parse_real(s: &str) -> Option<f64> {
    match s {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => s.parse().ok(),
    }
}

/// Parses `a`, `bi`, `a+bi` and `a-bi` (decimal literals only).
pub fn parse_complex(text: &str) -> Option<Complex64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(body) = s.strip_suffix('i') else {
        return s.parse().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => Some(Complex64::new(body[..k].parse().ok()?, parse_real(&body[k..])?)),
        None => Some(Complex64::new(0.0, parse_real(body)?)),
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleKind {
    Disk,
    Ellipse,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub obstacle: ObstacleKind,
    pub radius: Option<f64>,
    pub semi_axes: Option<[f64; 2]>,
    pub r1: f64,
    pub layer_width: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumBlock {
    pub sigma: [[f64; 2]; 2],
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProfileName {
    #[default]
    Affine,
    Ramp,
    Smoothed,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingBlock {
    #[serde(default)]
    pub profile: ProfileName,
    pub gamma: Option<ComplexValue>,
    /// `gamma(omega) = 1 / (c - i omega)` instead of a fixed `gamma`.
    pub c: Option<f64>,
    #[serde(default)]
    pub omega_dependent: bool,
    pub width: Option<f64>,
    pub scale: Option<f64>,
    pub amplitude: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationBlock {
    pub hmax: f64,
    pub p: usize,
    #[serde(default)]
    pub refinements: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    /// Target frequency; the pencil is shifted by its square.
    pub shift: ComplexValue,
    pub k: usize,
    pub krylov_dim: Option<usize>,
    #[serde(default = "default_stretch")]
    pub stretch: f64,
    pub move_factor: Option<f64>,
    pub min_move: Option<f64>,
    pub match_radius: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_stretch() -> f64 {
    SpuriousOptions::default().stretch
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceBlock {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_re")]
    pub re: [f64; 2],
    #[serde(default = "default_im")]
    pub im: [f64; 2],
}

fn default_n_max() -> usize {
    6
}
fn default_re() -> [f64; 2] {
    [0.1, 8.0]
}
fn default_im() -> [f64; 2] {
    [-3.0, 0.0]
}

impl Default for ReferenceBlock {
    fn default() -> Self {
        ReferenceBlock { n_max: default_n_max(), re: default_re(), im: default_im() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingBlock {
    #[serde(default = "default_omega")]
    pub omega: ComplexValue,
    #[serde(default = "default_rays")]
    pub rays: usize,
}

fn default_omega() -> ComplexValue {
    ComplexValue::Real(1.0)
}
fn default_rays() -> usize {
    8
}

impl Default for DampingBlock {
    fn default() -> Self {
        DampingBlock { omega: default_omega(), rays: default_rays() }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Reference CSV overlaid on the spectrum plot.
    pub reference: Option<PathBuf>,
}

fn default_dir() -> PathBuf {
    PathBuf::from(".")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { directory: default_dir(), formats: default_formats(), reference: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryBlock,
    pub medium: MediumBlock,
    pub scaling: ScalingBlock,
    pub discretization: Option<DiscretizationBlock>,
    pub solver: Option<SolverBlock>,
    #[serde(default)]
    pub reference: ReferenceBlock,
    #[serde(default)]
    pub damping: DampingBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// A parsed configuration together with its source and hash.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub path: Option<PathBuf>,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of(text, s.start)),
            key: None,
            msg: e.message().trim().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Physical constraints that must hold before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.geometry()?;
        self.medium()?;
        self.profile_at(None)?;
        if let Some(d) = &self.discretization {
            if !(d.hmax > 0.0 && d.hmax.is_finite()) {
                return Err(ConfigError::key("discretization.hmax", "must be positive"));
            }
            if !(1..=MAX_ORDER).contains(&d.p) {
                return Err(ConfigError::key("discretization.p", format!("{} is outside [1, {MAX_ORDER}]", d.p)));
            }
        }
        if let Some(s) = &self.solver {
            s.shift.resolve("solver.shift")?;
            if s.k == 0 {
                return Err(ConfigError::key("solver.k", "must be at least 1"));
            }
            if self.krylov_dim().unwrap_or(0) < 2 * s.k + 10 {
                return Err(ConfigError::key("solver.krylov_dim", format!("must be at least 2k + 10 = {}", 2 * s.k + 10)));
            }
            if !(s.stretch >= 1.0 && s.stretch.is_finite()) {
                return Err(ConfigError::key("solver.stretch", "must be at least 1"));
            }
            for (key, v) in [("solver.move_factor", s.move_factor), ("solver.match_radius", s.match_radius)] {
                if v.is_some_and(|v| !(v > 0.0)) {
                    return Err(ConfigError::key(key, "must be positive"));
                }
            }
            if s.min_move.is_some_and(|v| !(v >= 0.0)) {
                return Err(ConfigError::key("solver.min_move", "must be non-negative"));
            }
        }
        let r = &self.reference;
        if !(r.re[0] < r.re[1] && r.im[0] < r.im[1]) {
            return Err(ConfigError::key("reference", "box bounds must be increasing"));
        }
        self.damping.omega.resolve("damping.omega")?;
        Ok(())
    }

    pub fn obstacle(&self) -> Result<Obstacle, ConfigError> {
        let g = &self.geometry;
        match g.obstacle {
            ObstacleKind::Disk => {
                let radius = g.radius.ok_or_else(|| ConfigError::key("geometry.radius", "required for a disk"))?;
                Ok(Obstacle::Disk { radius })
            }
            ObstacleKind::Ellipse => {
                let [a1, a2] = g.semi_axes.ok_or_else(|| ConfigError::key("geometry.semi_axes", "required for an ellipse"))?;
                Ok(Obstacle::Ellipse { a1, a2 })
            }
        }
    }

    /// Radius of the smallest centred ball containing the obstacle.
    pub fn obstacle_extent(&self) -> Result<f64, ConfigError> {
        Ok(match self.obstacle()? {
            Obstacle::Disk { radius } => radius,
            Obstacle::Ellipse { a1, a2 } => a1.max(a2),
        })
    }

    pub fn geometry(&self) -> Result<Geometry, ConfigError> {
        Geometry::new(self.obstacle()?, self.geometry.r1, self.geometry.layer_width)
            .map_err(|e| ConfigError::key("geometry", e.to_string()))
    }

    pub fn medium(&self) -> Result<Medium, ConfigError> {
        let [a, b] = self.medium.sigma;
        SymMatrix::from_rows(&[&a, &b])
            .and_then(Medium::new)
            .map_err(|e| ConfigError::key("medium.sigma", e.to_string()))
    }

    /// The scaling profile; a frequency dependent `gamma` is evaluated at
    /// `omega` (0 when absent).
    pub fn profile_at(&self, omega: Option<f64>) -> Result<ScalingProfile, ConfigError> {
        let s = &self.scaling;
        let gamma = match (&s.gamma, s.c) {
            (Some(g), None) => {
                if s.omega_dependent {
                    return Err(ConfigError::key("scaling.omega_dependent", "needs `c` instead of `gamma`"));
                }
                g.resolve("scaling.gamma")?
            }
            (None, Some(c)) => {
                let w = if s.omega_dependent { omega.unwrap_or(0.0) } else { 0.0 };
                gamma_of_omega(c, w).map_err(|e| ConfigError::key("scaling.c", e.to_string()))?
            }
            (Some(_), Some(_)) => return Err(ConfigError::key("scaling", "give either `gamma` or `c`, not both")),
            (None, None) => return Err(ConfigError::key("scaling.gamma", "missing (or give `c`)")),
        };
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| ConfigError::key(key, "required by this profile"));
        let kind = match s.profile {
            ProfileName::Affine => ProfileKind::Affine,
            ProfileName::Ramp => ProfileKind::Ramp {
                width: need(s.width, "scaling.width")?,
                amplitude: s.amplitude.unwrap_or(1.0),
            },
            ProfileName::Smoothed => ProfileKind::SmoothedPolynomial {
                scale: need(s.scale, "scaling.scale")?,
                amplitude: s.amplitude.unwrap_or(1.0),
            },
        };
        ScalingProfile::new(kind, self.geometry.r1, gamma).map_err(|e| ConfigError::key("scaling", e.to_string()))
    }

    pub fn krylov_dim(&self) -> Option<usize> {
        self.solver.as_ref().map(|s| s.krylov_dim.unwrap_or(2 * s.k + 40))
    }

    /// Mesh, medium and scaling for the `solve` command. A frequency
    /// dependent `gamma` is frozen at the real part of the shift.
    pub fn problem(&self) -> Result<(Problem, SolverSettings, SpuriousOptions), ConfigError> {
        let d = self.discretization.as_ref().ok_or_else(|| ConfigError::key("discretization", "section missing"))?;
        let s = self.solver.as_ref().ok_or_else(|| ConfigError::key("solver", "section missing"))?;
        let shift = s.shift.resolve("solver.shift")?;
        let problem = Problem {
            geometry: self.geometry()?,
            medium: self.medium()?,
            profile: self.profile_at(Some(shift.re))?,
            hmax: d.hmax,
            order: d.p,
            refinements: d.refinements,
            boundary: BoundaryConditions::default(),
        };
        let settings = SolverSettings { shift, k: s.k, krylov_dim: self.krylov_dim().unwrap_or(0), seed: s.seed };
        let defaults = SpuriousOptions::default();
        let filter = SpuriousOptions {
            stretch: s.stretch,
            radius: s.match_radius.unwrap_or(defaults.radius),
            move_factor: s.move_factor.unwrap_or(defaults.move_factor),
            min_move: s.min_move.unwrap_or(defaults.min_move),
        };
        Ok((problem, settings, filter))
    }
}

impl LoadedConfig {
    pub fn from_text(text: &str, path: Option<&Path>) -> Result<Self, ConfigError> {
        Ok(LoadedConfig { config: RunConfig::parse(text)?, path: path.map(Path::to_path_buf), sha256: sha256_hex(text.as_bytes()) })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            key: None,
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_text(&text, Some(path))
    }

    /// Paths in the config are relative to the config file.
    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        match self.path.as_deref().and_then(Path::parent) {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }
}
