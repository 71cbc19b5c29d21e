//! Mesh, assembly and eigensolve chained for one resonance computation.

use crate::eig::{flag_spurious, shift_invert_arnoldi_with, ArnoldiOptions, Spectrum, SpuriousOptions};
use crate::fem::{assemble, BoundaryConditions, FunctionSpace};
use crate::media::Medium;
use crate::mesh::{generate, Geometry};
use crate::scaling::ScalingProfile;
use crate::{Complex64, Error};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Mesh,
    Assembly,
    Eigensolve,
    Filter,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Mesh => "mesh",
            Stage::Assembly => "assembly",
            Stage::Eigensolve => "eigensolve",
            Stage::Filter => "filter",
        })
    }
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn at(stage: Stage) -> impl Fn(Error) -> StageError {
    move |error| StageError { stage, error }
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub geometry: Geometry,
    pub medium: Medium,
    pub profile: ScalingProfile,
    pub hmax: f64,
    pub order: usize,
    /// Uniform refinements applied after generation.
    pub refinements: usize,
    pub boundary: BoundaryConditions,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// Target frequency; the pencil is shifted by its square.
    pub shift: Complex64,
    pub k: usize,
    pub krylov_dim: usize,
    pub seed: u64,
}

impl Problem {
    pub fn with_layer_width(&self, layer_width: f64) -> Result<Problem, StageError> {
        let geometry = self.geometry.with_layer_width(layer_width).map_err(at(Stage::Mesh))?;
        Ok(Problem { geometry, ..self.clone() })
    }

    /// Builds the mesh (geometry order equal to the polynomial order), the
    /// pencil, and its eigenpairs closest to the shift.
    pub fn solve(&self, settings: &SolverSettings) -> Result<Spectrum, StageError> {
        let mut mesh = generate(&self.geometry, self.hmax, self.order).map_err(at(Stage::Mesh))?;
        for _ in 0..self.refinements {
            mesh = mesh.refine();
        }
        let space = FunctionSpace::new(&mesh, self.order, self.boundary).map_err(at(Stage::Assembly))?;
        let pencil = assemble(&space, Some(&self.profile), &self.medium).map_err(at(Stage::Assembly))?;
        log::info!(
            "layer {}: {} triangles, {} dofs",
            self.geometry.layer_width,
            mesh.num_triangles(),
            pencil.dim()
        );
        drop(space);
        drop(mesh);
        let opts = ArnoldiOptions::new(settings.k, settings.krylov_dim).with_seed(settings.seed);
        let d_inf = self.profile.d_inf().map_err(at(Stage::Eigensolve))?;
        let spectrum = shift_invert_arnoldi_with(&pencil, settings.shift * settings.shift, &opts)
            .map_err(at(Stage::Eigensolve))?;
        Ok(spectrum.classify(d_inf / d_inf.norm()).with_layer_width(self.geometry.layer_width))
    }

    /// Base solve followed by the layer-stretch spurious test.
    pub fn solve_filtered(&self, settings: &SolverSettings, filter: &SpuriousOptions) -> Result<Spectrum, StageError> {
        let base = self.solve(settings)?;
        if filter.stretch == 1.0 {
            return Ok(flag_spurious(&base, &base.omegas(), self.geometry.layer_width, filter));
        }
        if !(filter.stretch > 1.0) {
            return Err(StageError {
                stage: Stage::Filter,
                error: Error::Validation(format!("stretch {} must be at least 1", filter.stretch)),
            });
        }
        let stretched = self
            .with_layer_width(filter.stretch * self.geometry.layer_width)?
            .solve(settings)?;
        Ok(flag_spurious(&base, &stretched.omegas(), self.geometry.layer_width, filter))
    }
}
