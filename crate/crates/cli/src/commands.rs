use std::sync::Arc;

use anyhow::Context;
use log::info;
use stressdg::assembly::{assemble, consistency_residual, solve, ProblemData, SolveOptions};
use stressdg::bdm::BdmSpace;
use stressdg::dg::{l2_project_vector, StressSpace};
use stressdg::linalg::{cg_solve, dense, CgOptions};
use stressdg::mesh::Mesh;
use stressdg::postprocess::{
    reconstruct_divfree, reconstruction_degree, recover_pressure, recover_velocity, SaddleMethod,
};
use stressdg::reference::triangle_rule;
use stressdg::verification::{
    error_components, BoundaryLayout, Column, KappaLayout, ManufacturedCase, StudyConfig,
};
use stressdg::vtk::VtkWriter;

use crate::config::{KappaSpec, MeshSpec, RunConfig};

/// Largest system whose spectrum `verify` computes densely.
const DENSE_EIGEN_MAX_DOFS: usize = 500;

fn kappa_layout(cfg: &RunConfig) -> Option<KappaLayout> {
    match cfg.kappa {
        KappaSpec::Constant(k) => Some(KappaLayout::Constant(k)),
        KappaSpec::Contrast(c) => Some(KappaLayout::SplitX {
            split: 0.5,
            left: 1.0,
            right: 1.0 / c,
        }),
        KappaSpec::FromMesh => None,
    }
}

fn build_mesh(cfg: &RunConfig) -> anyhow::Result<Arc<Mesh>> {
    let mesh = match &cfg.mesh {
        MeshSpec::Generated { family, n } => family.build(*n)?,
        MeshSpec::File { path, trisect } => {
            let m = Mesh::read_ascii_file(path)
                .with_context(|| format!("reading mesh {}", path.display()))?;
            if *trisect {
                m.barycentric_trisect()?
            } else {
                m
            }
        }
    };
    let mesh = mesh.classify_boundary(&cfg.boundary.spec())?;
    let mesh = match kappa_layout(cfg) {
        Some(layout) => layout.apply(mesh)?,
        None => mesh,
    };
    Ok(Arc::new(mesh))
}

fn manufactured(cfg: &RunConfig, mesh: &Mesh) -> anyhow::Result<Option<ManufacturedCase>> {
    let Some(kind) = cfg.case_kind() else {
        return Ok(None);
    };
    let case = kind.build(cfg.mu, cfg.constant_kappa())?;
    // Pure velocity data fixes the pressure only up to a constant; the exact
    // solution must then have zero mean over the actual domain.
    Ok(Some(match cfg.boundary {
        BoundaryLayout::AllDirichlet => case.with_zero_mean_pressure_on(mesh),
        BoundaryLayout::LeftTopDirichlet => case,
    }))
}

fn problem_data(cfg: &RunConfig, case: Option<&ManufacturedCase>) -> ProblemData {
    match case {
        Some(c) => c.problem_data(cfg.a_star, cfg.quad_bump),
        None => ProblemData {
            a_star: cfg.a_star,
            quadrature_bump: cfg.quad_bump,
            ..ProblemData::homogeneous(cfg.mu)
        },
    }
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        method: cfg.solver,
        cg: CgOptions {
            tol: cfg.tol,
            ..CgOptions::default()
        },
    }
}

pub fn solve_command(cfg: &RunConfig) -> anyhow::Result<()> {
    let mesh = build_mesh(cfg)?;
    let case = manufactured(cfg, &mesh)?;
    let data = problem_data(cfg, case.as_ref());
    let space = StressSpace::new(mesh.clone(), cfg.degree)?;
    let sol = solve(&space, &data, &solve_options(cfg))?;
    let pressure = recover_pressure(&sol.stress);
    let velocity = recover_velocity(&sol.stress, &data)?;
    let reconstruction = if cfg.divfree {
        Some(reconstruct_divfree(
            &velocity,
            cfg.degree,
            SaddleMethod::Direct,
        )?)
    } else {
        None
    };

    println!(
        "mesh: {} elements, h = {:.6}; k = {}; {} dofs; solver residual {:.2e} ({} iterations)",
        mesh.num_elements(),
        mesh.h(),
        cfg.degree,
        space.num_dofs(),
        sol.residual,
        sol.iterations
    );
    if let Some(case) = &case {
        let errors = error_components(
            &sol.stress,
            Some(&velocity),
            reconstruction.as_ref().map(|r| &r.velocity),
            Some(&pressure),
            case,
            data.data_exactness(cfg.degree),
        )?
        .record(cfg.convention);
        for col in Column::ALL {
            let v = col.get(&errors);
            if !v.is_nan() {
                println!("{:>9} = {v:.6e}", col.name());
            }
        }
    }

    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let path = cfg.out.join("solution.vtk");
    let mut writer = VtkWriter::new(&mesh)
        .stress("sigma", &sol.stress)?
        .pressure("p", &pressure)?
        .velocity("u", &velocity)?;
    if let Some(r) = &reconstruction {
        writer = writer.bdm_velocity("u_star", &r.velocity)?;
    }
    writer
        .write_file(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn convergence_command(cfg: &RunConfig) -> anyhow::Result<()> {
    let MeshSpec::Generated { family, n } = cfg.mesh else {
        unreachable!("validated in RunConfig::resolve");
    };
    let study = StudyConfig {
        family,
        base_n: n,
        levels: cfg.levels,
        degree: cfg.degree,
        mu: cfg.mu,
        kappa: cfg.constant_kappa(),
        case: cfg.case_kind().expect("validated in RunConfig::resolve"),
        boundary: cfg.boundary,
        a_star: cfg.a_star,
        quadrature_bump: cfg.quad_bump,
        solver: solve_options(cfg),
        divfree: cfg.divfree,
        saddle: SaddleMethod::Direct,
        convention: cfg.convention,
    };
    let table = study.run_with(|r| {
        if let Some(d) = r.max_divergence()? {
            info!("level {}: max |div u*| coefficient {d:.2e}", r.level);
        }
        Ok(())
    })?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let csv = cfg.out.join("convergence.csv");
    let md = cfg.out.join("convergence.md");
    std::fs::write(&csv, table.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
    std::fs::write(&md, table.to_markdown())
        .with_context(|| format!("writing {}", md.display()))?;
    print!("{}", table.to_markdown());
    println!("wrote {} and {}", csv.display(), md.display());
    Ok(())
}

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures += 1;
        }
    }
}

/// Runs the checks and returns whether all passed.
pub fn verify_command(cfg: &RunConfig) -> anyhow::Result<bool> {
    let mut report = Report { failures: 0 };
    let mesh = build_mesh(cfg)?;
    let case = manufactured(cfg, &mesh)?;
    let data = problem_data(cfg, case.as_ref());
    let space = StressSpace::new(mesh.clone(), cfg.degree)?;

    let euler = mesh.euler_characteristic();
    report.check(
        "mesh euler characteristic",
        euler == 1,
        format!("V - E + T = {euler}"),
    );
    let min_area = (0..mesh.num_elements())
        .map(|e| mesh.geometry(e).area)
        .fold(f64::INFINITY, f64::min);
    report.check(
        "mesh orientation",
        min_area > 0.0,
        format!("smallest element area {min_area:.3e}"),
    );

    if let Some(case) = &case {
        let exact = |_: usize, x| case.stress(x);
        let r = consistency_residual(&space, &data, &exact)?;
        let tol = match cfg.case {
            crate::config::CaseArg::Trig => 1e-8,
            _ => 1e-11,
        };
        report.check(
            "consistency residual",
            r < tol,
            format!("{r:.3e} (tolerance {tol:.0e})"),
        );
    }

    let m = reconstruction_degree(cfg.degree);
    let bdm = BdmSpace::new(mesh.clone(), m)?;
    let v = |x: [f64; 2]| [x[0].sin() * x[1], x[1].cos()];
    let field = bdm.interpolate(v)?;
    let q = l2_project_vector(
        |_, x| [x[0].cos() * x[1] - x[1].sin(), 0.0],
        m - 1,
        mesh.clone(),
        16,
    )?;
    let rule = triangle_rule(2 * m + 2)?;
    let mut err2 = 0.0;
    for e in 0..mesh.num_elements() {
        let g = mesh.geometry(e);
        for (xi, w) in rule.iter() {
            let x = g.to_physical(xi);
            err2 += w * g.det * (field.evaluate(e, x).1 - q.evaluate(e, x)[0]).powi(2);
        }
    }
    report.check(
        "commuting diagram",
        err2.sqrt() < 1e-10,
        format!("BDM_{m}: {:.2e}", err2.sqrt()),
    );

    let system = assemble(&space, &data)?;
    let asym = system.matrix.asymmetry();
    report.check(
        "matrix symmetry",
        asym < 1e-13,
        format!("relative asymmetry {asym:.2e}"),
    );
    let n = system.matrix.dim();
    if n <= DENSE_EIGEN_MAX_DOFS {
        let lmin = dense::min_eigenvalue(&system.matrix.to_dense());
        report.check(
            "positive definiteness",
            lmin > 0.0,
            format!("minimum eigenvalue {lmin:.3e} ({n} dofs)"),
        );
    } else {
        println!("[SKIP] positive definiteness: {n} dofs exceed the dense limit of {DENSE_EIGEN_MAX_DOFS}");
    }

    let direct = match solve(&space, &data, &SolveOptions::default()) {
        Ok(sol) => sol,
        Err(e) => {
            // Everything below needs a solution.
            report.check("direct solve", false, e.to_string());
            println!("{} check(s) failed", report.failures);
            return Ok(false);
        }
    };
    match cg_solve(
        &system.matrix,
        &system.rhs,
        &CgOptions {
            tol: cfg.tol,
            ..CgOptions::default()
        },
    ) {
        Ok(out) => {
            let scale = direct
                .stress
                .coeffs()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(1e-300);
            let diff = out
                .x
                .iter()
                .zip(direct.stress.coeffs())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            report.check(
                "cg agrees with direct solve",
                diff <= 1e-6 * scale,
                format!(
                    "{} iterations (20 sqrt(N) = {:.0}), max difference {:.2e}",
                    out.iterations,
                    20.0 * (n as f64).sqrt(),
                    diff / scale
                ),
            );
        }
        Err(e) => report.check("cg agrees with direct solve", false, e.to_string()),
    }

    if direct.theta == 1.0 {
        let tr = direct.stress.trace_integral().abs();
        let norm = direct.stress.l2_norm();
        report.check(
            "trace constraint",
            tr <= 1e-10 * norm.max(f64::MIN_POSITIVE),
            format!("|(tr sigma_h, 1)| = {tr:.2e}, ||sigma_h|| = {norm:.3e}"),
        );
    }

    if cfg.divfree {
        let velocity = recover_velocity(&direct.stress, &data)?;
        let r = reconstruct_divfree(&velocity, cfg.degree, SaddleMethod::Direct)?;
        let d = r
            .velocity
            .divergence_coefficients()?
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()));
        report.check(
            "divergence-free reconstruction",
            d < 1e-9,
            format!("max |div coefficient| {d:.2e}"),
        );
    }

    println!("{} check(s) failed", report.failures);
    Ok(report.failures == 0)
}
