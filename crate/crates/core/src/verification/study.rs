//! Convergence studies: solve, post-process and measure on a mesh sequence.

use std::sync::Arc;

use log::info;

use crate::assembly::{solve, ProblemData, SolveOptions};
use crate::dg::{PiecewiseVectorField, StressField, StressSpace};
use crate::error::{Error, Result};
use crate::mesh::{BoundarySpec, Mesh};
use crate::postprocess::{recover_pressure, recover_velocity, reconstruct_divfree, PressureField, Reconstruction, SaddleMethod};

use super::cases::{KappaLayout, ManufacturedCase};
use super::norms::{error_components, ErrorComponents, ErrorRecord, NormConvention};
use super::table::{ErrorTable, TableRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFamily {
    /// Squares split along one diagonal.
    Diagonal,
    /// Squares split along both diagonals.
    Crisscross,
    /// Diagonal meshes with every triangle split at its barycenter.
    Trisected,
}

impl MeshFamily {
    pub fn build(self, n: usize) -> Result<Mesh> {
        match self {
            MeshFamily::Diagonal => Mesh::diagonal_grid(n),
            MeshFamily::Crisscross => Mesh::crisscross_grid(n),
            MeshFamily::Trisected => Mesh::diagonal_grid(n)?.barycentric_trisect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryLayout {
    /// Velocity on the left and top sides, traction elsewhere.
    #[default]
    LeftTopDirichlet,
    AllDirichlet,
}

impl BoundaryLayout {
    pub fn spec(self) -> BoundarySpec {
        match self {
            BoundaryLayout::LeftTopDirichlet => BoundarySpec::left_top_dirichlet(),
            BoundaryLayout::AllDirichlet => BoundarySpec::all_dirichlet(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseKind {
    Trigonometric,
    Heterogeneous { contrast: f64 },
    Polynomial,
    ConstantStress,
}

impl CaseKind {
    pub fn build(self, mu: f64, kappa: f64) -> Result<ManufacturedCase> {
        Ok(match self {
            CaseKind::Trigonometric => ManufacturedCase::trigonometric(mu, KappaLayout::Constant(kappa)),
            CaseKind::Heterogeneous { contrast } => ManufacturedCase::heterogeneous(mu, contrast)?,
            CaseKind::Polynomial => ManufacturedCase::polynomial(mu, KappaLayout::Constant(kappa)),
            CaseKind::ConstantStress => ManufacturedCase::constant_stress(mu, KappaLayout::Constant(kappa)),
        })
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub family: MeshFamily,
    /// Subdivisions of the coarsest mesh; doubled at every level.
    pub base_n: usize,
    pub levels: usize,
    pub degree: usize,
    pub mu: f64,
    pub kappa: f64,
    pub case: CaseKind,
    pub boundary: BoundaryLayout,
    pub a_star: f64,
    pub quadrature_bump: usize,
    pub solver: SolveOptions,
    pub divfree: bool,
    pub saddle: SaddleMethod,
    pub convention: NormConvention,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            family: MeshFamily::Diagonal,
            base_n: 2,
            levels: 6,
            degree: 1,
            mu: 1e-3,
            kappa: 1.0,
            case: CaseKind::Trigonometric,
            boundary: BoundaryLayout::LeftTopDirichlet,
            a_star: 10.0,
            quadrature_bump: 0,
            solver: SolveOptions::default(),
            divfree: true,
            saddle: SaddleMethod::Direct,
            convention: NormConvention::Definition,
        }
    }
}

/// Everything computed on one mesh.
#[derive(Debug, Clone)]
pub struct LevelResult {
    pub level: usize,
    pub n: usize,
    pub dofs: usize,
    pub h: f64,
    pub components: ErrorComponents,
    pub errors: ErrorRecord,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub stress: StressField,
    pub pressure: PressureField,
    pub velocity: PiecewiseVectorField,
    pub reconstruction: Option<Reconstruction>,
}

impl LevelResult {
    /// Largest divergence coefficient of the reconstructed velocity.
    pub fn max_divergence(&self) -> Result<Option<f64>> {
        self.reconstruction
            .as_ref()
            .map(|r| {
                r.velocity
                    .divergence_coefficients()
                    .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            })
            .transpose()
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.degree) {
            return Err(Error::Degree {
                degree: self.degree,
                min: 1,
                max: 4,
            });
        }
        if self.base_n == 0 || self.levels == 0 {
            return Err(Error::Config("need at least one level with n >= 1".into()));
        }
        if !(self.mu > 0.0) {
            return Err(Error::Config(format!("viscosity must be positive, got {}", self.mu)));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Config(format!("permeability must be positive, got {}", self.kappa)));
        }
        Ok(())
    }

    /// Manufactured solution used by this study (zero-mean pressure when the
    /// whole boundary carries velocity data).
    pub fn manufactured(&self) -> Result<ManufacturedCase> {
        let case = self.case.build(self.mu, self.kappa)?;
        Ok(match self.boundary {
            BoundaryLayout::AllDirichlet => case.with_zero_mean_pressure(),
            BoundaryLayout::LeftTopDirichlet => case,
        })
    }

    pub fn mesh(&self, n: usize) -> Result<Arc<Mesh>> {
        let case = self.manufactured()?;
        let mesh = self.family.build(n)?.classify_boundary(&self.boundary.spec())?;
        Ok(Arc::new(case.kappa.apply(mesh)?))
    }

    pub fn problem_data(&self) -> Result<ProblemData> {
        Ok(self.manufactured()?.problem_data(self.a_star, self.quadrature_bump))
    }

    /// Runs one mesh with `n` subdivisions.
    pub fn run_level(&self, level: usize, n: usize) -> Result<LevelResult> {
        self.validate()?;
        let case = self.manufactured()?;
        let mesh = self.mesh(n)?;
        let data = case.problem_data(self.a_star, self.quadrature_bump);
        let space = StressSpace::new(mesh.clone(), self.degree)?;
        let sol = solve(&space, &data, &self.solver).map_err(|e| level_error(level, e))?;
        let pressure = recover_pressure(&sol.stress);
        let velocity = recover_velocity(&sol.stress, &data)?;
        let reconstruction = if self.divfree {
            Some(reconstruct_divfree(&velocity, self.degree, self.saddle).map_err(|e| level_error(level, e))?)
        } else {
            None
        };
        let components = error_components(
            &sol.stress,
            Some(&velocity),
            reconstruction.as_ref().map(|r| &r.velocity),
            Some(&pressure),
            &case,
            data.data_exactness(self.degree),
        )?;
        let errors = components.record(self.convention);
        info!(
            "level {level}: n = {n}, {} dofs, {} cg iterations, e_norm {:.3e}",
            space.num_dofs(),
            sol.iterations,
            errors.e_norm
        );
        Ok(LevelResult {
            level,
            n,
            dofs: space.num_dofs(),
            h: mesh.h(),
            components,
            errors,
            cg_iterations: sol.iterations,
            cg_residual: sol.residual,
            stress: sol.stress,
            pressure,
            velocity,
            reconstruction,
        })
    }

    /// Runs all levels; `observe` sees each level before it is dropped.
    pub fn run_with(&self, mut observe: impl FnMut(&LevelResult) -> Result<()>) -> Result<ErrorTable> {
        self.validate()?;
        let mut table = ErrorTable::default();
        for level in 0..self.levels {
            let n = self.base_n << level;
            let r = self.run_level(level, n)?;
            observe(&r)?;
            table.push(TableRow {
                level,
                dofs: r.dofs,
                h: r.h,
                errors: r.errors,
            });
        }
        Ok(table)
    }
}

fn level_error(level: usize, e: Error) -> Error {
    Error::Level {
        level,
        source: Box::new(e),
    }
}

/// Runs the study and returns its error table.
pub fn convergence_study(config: &StudyConfig) -> Result<ErrorTable> {
    config.run_with(|_| Ok(()))
}
