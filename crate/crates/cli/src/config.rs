//! Command-line flags, the optional TOML file, and the validated run
//! configuration built from both.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use stressdg::assembly::SolverMethod;
use stressdg::verification::{BoundaryLayout, CaseKind, MeshFamily, NormConvention};

/// A configuration problem detected before any computation starts.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(
    name = "stressdg",
    version,
    about = "Pure-stress interior penalty DG solver for the Brinkman equations",
    long_about = "Pure-stress interior penalty DG solver for the Brinkman equations.\n\n\
        Without a subcommand, runs `convergence` with the defaults: diagonal meshes \
        n = 2..64, k = 1, mu = 1e-3, kappa = 1, a* = 10, velocity data on the left \
        and top sides."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve on one mesh and write the fields as legacy VTK.
    Solve,
    /// Run a refinement study and write CSV and markdown tables.
    Convergence,
    /// Run consistency and invariant checks; exit nonzero on any failure.
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryArg {
    /// Velocity on the left and top sides, traction on the others.
    Mixed,
    /// Velocity on the whole boundary.
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverArg {
    /// Sparse Cholesky factorization.
    Direct,
    /// Block-Jacobi preconditioned conjugate gradients.
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseArg {
    /// Smooth rotating flow with p = sin(pi x y).
    Trig,
    /// Quadratic velocity, linear stress.
    Polynomial,
    /// Linear shear flow, constant stress.
    Constant,
    /// No forcing and no boundary data (no error norms).
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConventionArg {
    /// Normalization of the reference convergence tables.
    Tabulated,
    /// Norms exactly as defined by the energy norm.
    Definition,
}

/// Every setting, as flags. All are optional so that a config file can fill
/// the gaps; flags win over the file, the file wins over the defaults.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Options {
    /// TOML file with any of the settings below (keys as the long flag names).
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Mesh: diagonal[:n], crisscross[:n], trisected[:n] or file:path[:trisect].
    /// For `convergence`, n is the coarsest size. [default: diagonal:2]
    #[arg(long, global = true)]
    pub mesh: Option<String>,

    /// Polynomial degree of the stress, 1..=4. [default: 1]
    #[arg(long, global = true)]
    pub k: Option<usize>,

    /// Viscosity. [default: 1e-3]
    #[arg(long, global = true)]
    pub mu: Option<f64>,

    /// Constant permeability. [default: 1, or the per-element values of a mesh file]
    #[arg(long, global = true, conflicts_with = "contrast")]
    pub kappa: Option<f64>,

    /// Two subdomains split at x = 1/2 with permeabilities 1 and 1/contrast.
    #[arg(long, global = true)]
    pub contrast: Option<f64>,

    /// Manufactured solution. [default: trig]
    #[arg(long, global = true, value_enum)]
    pub case: Option<CaseArg>,

    /// Penalty base; the penalty is a* k^2. [default: 10]
    #[arg(long = "a-star", global = true)]
    pub a_star: Option<f64>,

    /// Boundary layout. [default: mixed]
    #[arg(long, global = true, value_enum)]
    pub boundary: Option<BoundaryArg>,

    /// Linear solver. [default: direct]
    #[arg(long, global = true, value_enum)]
    pub solver: Option<SolverArg>,

    /// Relative residual tolerance of the CG solver. [default: 1e-12]
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Extra exactness for the quadrature of data integrals. [default: 0]
    #[arg(long = "quad-bump", global = true)]
    pub quad_bump: Option<usize>,

    /// Number of refinement levels for `convergence`. [default: 6]
    #[arg(long, global = true)]
    pub levels: Option<usize>,

    /// Output directory. [default: out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Skip the divergence-free velocity reconstruction.
    #[arg(long = "no-divfree", global = true)]
    #[serde(skip)]
    pub no_divfree: bool,

    /// Whether to compute the divergence-free reconstruction (file only).
    #[arg(skip)]
    pub divfree: Option<bool>,

    /// Worker threads. [default: 1]
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Normalization of the reported stress errors. [default: tabulated]
    #[arg(long = "norm-convention", global = true, value_enum)]
    pub norm_convention: Option<ConventionArg>,
}

impl Options {
    pub fn load_file(path: &Path) -> anyhow::Result<Options> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| bad(format!("{}: {}", path.display(), e.message())))
    }

    /// Fills every unset field from `file`.
    pub fn or(self, file: Options) -> Options {
        Options {
            config: self.config,
            mesh: self.mesh.or(file.mesh),
            k: self.k.or(file.k),
            mu: self.mu.or(file.mu),
            kappa: self.kappa.or(file.kappa),
            contrast: self.contrast.or(file.contrast),
            case: self.case.or(file.case),
            a_star: self.a_star.or(file.a_star),
            boundary: self.boundary.or(file.boundary),
            solver: self.solver.or(file.solver),
            tol: self.tol.or(file.tol),
            quad_bump: self.quad_bump.or(file.quad_bump),
            levels: self.levels.or(file.levels),
            out: self.out.or(file.out),
            no_divfree: self.no_divfree,
            divfree: if self.no_divfree {
                Some(false)
            } else {
                self.divfree.or(file.divfree)
            },
            threads: self.threads.or(file.threads),
            norm_convention: self.norm_convention.or(file.norm_convention),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    Generated { family: MeshFamily, n: usize },
    File { path: PathBuf, trisect: bool },
}

impl FromStr for MeshSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        if let Some(rest) = s.strip_prefix("file:") {
            let (path, trisect) = match rest.strip_suffix(":trisect") {
                Some(p) => (p, true),
                None => (rest, false),
            };
            if path.is_empty() {
                return Err(bad("mesh file path is empty"));
            }
            return Ok(MeshSpec::File {
                path: PathBuf::from(path),
                trisect,
            });
        }
        let (name, n) = match s.split_once(':') {
            Some((name, n)) => {
                let n: usize = n
                    .parse()
                    .map_err(|_| bad(format!("invalid mesh size '{n}'")))?;
                (name, n)
            }
            None => (s, 2),
        };
        if n == 0 {
            return Err(bad("mesh size must be at least 1"));
        }
        let family = match name {
            "diagonal" => MeshFamily::Diagonal,
            "crisscross" => MeshFamily::Crisscross,
            "trisected" => MeshFamily::Trisected,
            other => {
                return Err(bad(format!(
                    "unknown mesh '{other}' (expected diagonal, crisscross, trisected or file:path)"
                )))
            }
        };
        Ok(MeshSpec::Generated { family, n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaSpec {
    Constant(f64),
    Contrast(f64),
    /// Keep the values stored in the mesh file.
    FromMesh,
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub mesh: MeshSpec,
    pub degree: usize,
    pub mu: f64,
    pub kappa: KappaSpec,
    pub case: CaseArg,
    pub a_star: f64,
    pub boundary: BoundaryLayout,
    pub solver: SolverMethod,
    pub tol: f64,
    pub quad_bump: usize,
    pub levels: usize,
    pub out: PathBuf,
    pub divfree: bool,
    pub threads: usize,
    pub convention: NormConvention,
}

fn positive(name: &str, v: f64) -> anyhow::Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(format!(
            "--{name} must be positive and finite, got {v}"
        )))
    }
}

impl RunConfig {
    pub fn resolve(command: Option<Command>, flags: Options) -> anyhow::Result<RunConfig> {
        let opts = match &flags.config {
            Some(path) => {
                let file = Options::load_file(path)?;
                flags.or(file)
            }
            None => flags,
        };
        let command = command.unwrap_or(Command::Convergence);
        let mesh: MeshSpec = opts.mesh.as_deref().unwrap_or("diagonal:2").parse()?;
        let degree = opts.k.unwrap_or(1);
        if !(1..=4).contains(&degree) {
            return Err(bad(format!("--k must be in 1..=4, got {degree}")));
        }
        let mu = positive("mu", opts.mu.unwrap_or(1e-3))?;
        let kappa = match (opts.kappa, opts.contrast) {
            (Some(_), Some(_)) => return Err(bad("--kappa and --contrast are mutually exclusive")),
            (Some(k), None) => KappaSpec::Constant(positive("kappa", k)?),
            (None, Some(c)) => {
                if !(c >= 1.0 && c.is_finite()) {
                    return Err(bad(format!("--contrast must be at least 1, got {c}")));
                }
                KappaSpec::Contrast(c)
            }
            (None, None) => match mesh {
                MeshSpec::File { .. } => KappaSpec::FromMesh,
                MeshSpec::Generated { .. } => KappaSpec::Constant(1.0),
            },
        };
        let case = opts.case.unwrap_or(CaseArg::Trig);
        if matches!(kappa, KappaSpec::Contrast(_)) && case != CaseArg::Trig && case != CaseArg::Zero
        {
            return Err(bad(
                "--contrast is only available with the trig or zero case",
            ));
        }
        let a_star = positive("a-star", opts.a_star.unwrap_or(10.0))?;
        let tol = positive("tol", opts.tol.unwrap_or(1e-12))?;
        let levels = opts.levels.unwrap_or(6);
        if levels == 0 {
            return Err(bad("--levels must be at least 1"));
        }
        let threads = opts.threads.unwrap_or(1);
        if threads == 0 {
            return Err(bad("--threads must be at least 1"));
        }
        if command == Command::Convergence {
            if let MeshSpec::File { .. } = mesh {
                return Err(bad(
                    "convergence needs a generated mesh family, not a mesh file",
                ));
            }
            if case == CaseArg::Zero {
                return Err(bad(
                    "convergence needs a manufactured solution, not the zero case",
                ));
            }
            if matches!(kappa, KappaSpec::FromMesh) {
                unreachable!("generated meshes always get a constant or split permeability");
            }
        }
        Ok(RunConfig {
            command,
            mesh,
            degree,
            mu,
            kappa,
            case,
            a_star,
            boundary: match opts.boundary.unwrap_or(BoundaryArg::Mixed) {
                BoundaryArg::Mixed => BoundaryLayout::LeftTopDirichlet,
                BoundaryArg::Dirichlet => BoundaryLayout::AllDirichlet,
            },
            solver: match opts.solver.unwrap_or(SolverArg::Direct) {
                SolverArg::Direct => SolverMethod::Direct,
                SolverArg::Cg => SolverMethod::Cg,
            },
            tol,
            quad_bump: opts.quad_bump.unwrap_or(0),
            levels,
            out: opts.out.unwrap_or_else(|| PathBuf::from("out")),
            divfree: !opts.no_divfree && opts.divfree.unwrap_or(true),
            threads,
            convention: match opts.norm_convention.unwrap_or(ConventionArg::Tabulated) {
                ConventionArg::Tabulated => NormConvention::Tabulated,
                ConventionArg::Definition => NormConvention::Definition,
            },
        })
    }

    /// The manufactured case kind, if any.
    pub fn case_kind(&self) -> Option<CaseKind> {
        match (self.case, self.kappa) {
            (CaseArg::Zero, _) => None,
            (CaseArg::Trig, KappaSpec::Contrast(contrast)) => {
                Some(CaseKind::Heterogeneous { contrast })
            }
            (CaseArg::Trig, _) => Some(CaseKind::Trigonometric),
            (CaseArg::Polynomial, _) => Some(CaseKind::Polynomial),
            (CaseArg::Constant, _) => Some(CaseKind::ConstantStress),
        }
    }

    pub fn constant_kappa(&self) -> f64 {
        match self.kappa {
            KappaSpec::Constant(k) => k,
            _ => 1.0,
        }
    }
}
