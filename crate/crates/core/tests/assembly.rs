use std::sync::Arc;

use nalgebra::DMatrix;
use stressdg::assembly::{assemble, assemble_rhs, consistency_residual, solve, ProblemData, SolveOptions, SolverMethod};
use stressdg::dg::{face_quadrature, StressSpace};
use stressdg::linalg::dense::min_eigenvalue;
use stressdg::mesh::{BoundarySpec, Mesh};
use stressdg::reference::tensor::{self, Sym};
use stressdg::reference::{edge_rule, triangle_rule};
use stressdg::verification::{KappaLayout, ManufacturedCase};

fn mixed_boundary_mesh(mesh: Mesh) -> Arc<Mesh> {
    Arc::new(mesh.classify_boundary(&BoundarySpec::left_top_dirichlet()).unwrap())
}

/// Dense matrix of the bilinear form computed entry by entry from basis
/// evaluations, with over-integrating quadrature and no shared code with the
/// assembler beyond basis evaluation.
fn oracle_matrix(space: &StressSpace, a_star: f64) -> DMatrix<f64> {
    let mesh = space.mesh();
    let k = space.degree();
    let nl = space.dofs_per_element();
    let ndofs = space.num_dofs();
    let mut a = DMatrix::<f64>::zeros(ndofs, ndofs);
    let unit = |l: usize| {
        let mut c = vec![0.0; nl];
        c[l] = 1.0;
        c
    };
    let tri = triangle_rule(2 * k + 6).unwrap();
    let mut trace = vec![0.0; ndofs];
    for e in 0..mesh.num_elements() {
        let g = mesh.geometry(e);
        let kappa = mesh.kappa(e);
        for (xi, w) in tri.iter() {
            let x = g.to_physical(xi);
            let vals: Vec<(Sym, [f64; 2])> = (0..nl).map(|l| space.evaluate(e, &unit(l), x)).collect();
            for i in 0..nl {
                trace[e * nl + i] += w * g.det * tensor::trace(vals[i].0);
                for j in 0..nl {
                    let (si, di) = vals[i];
                    let (sj, dj) = vals[j];
                    let dev = tensor::frobenius(tensor::deviatoric(si), tensor::deviatoric(sj));
                    a[(e * nl + i, e * nl + j)] += w * g.det * (0.5 * dev + kappa * (di[0] * dj[0] + di[1] * dj[1]));
                }
            }
        }
    }
    if !mesh.faces().iter().any(|f| f.kind == stressdg::mesh::FaceKind::Neumann) {
        a += DMatrix::from_column_slice(ndofs, 1, &trace) * DMatrix::from_row_slice(1, ndofs, &trace);
    }
    let edge = edge_rule(2 * k + 6).unwrap();
    let penalty = a_star * (k * k) as f64;
    for f in mesh.skeleton_faces() {
        let face = mesh.face(f);
        let sides: Vec<(usize, f64)> = match face.elements.1 {
            Some(b) => vec![(face.elements.0, 1.0), (b, -1.0)],
            None => vec![(face.elements.0, 1.0)],
        };
        let gamma = sides.iter().map(|&(e, _)| 1.0 / mesh.kappa(e)).fold(f64::INFINITY, f64::min);
        let avg_weight = 1.0 / sides.len() as f64;
        for (x, w) in face_quadrature(mesh, f, &edge) {
            // (global dof, jump contribution, average contribution)
            let mut traces = Vec::new();
            for &(e, sign) in &sides {
                let n = [sign * face.normal[0], sign * face.normal[1]];
                for l in 0..nl {
                    let (s, d) = space.evaluate(e, &unit(l), x);
                    let kd = avg_weight * mesh.kappa(e);
                    traces.push((e * nl + l, tensor::apply(s, n), [kd * d[0], kd * d[1]]));
                }
            }
            for &(i, ji, ai) in &traces {
                for &(j, jj, aj) in &traces {
                    let dot = |p: [f64; 2], q: [f64; 2]| p[0] * q[0] + p[1] * q[1];
                    a[(i, j)] += w * (penalty / (gamma * face.length) * dot(ji, jj) - dot(aj, ji) - dot(ai, jj));
                }
            }
        }
    }
    a
}

fn assert_matches_oracle(space: &StressSpace) {
    let sys = assemble(space, &ProblemData::homogeneous(1e-3)).unwrap();
    let got = sys.matrix.to_dense();
    let want = oracle_matrix(space, 10.0);
    let scale = want.amax();
    let diff = (&got - &want).amax();
    assert!(diff < 1e-12 * scale, "k={}: max difference {diff:.3e} (scale {scale:.3e})", space.degree());
}

#[test]
fn matrix_matches_entrywise_oracle_on_two_elements() {
    let mesh = mixed_boundary_mesh(Mesh::diagonal_grid(1).unwrap());
    for k in 1..=4 {
        assert_matches_oracle(&StressSpace::new(mesh.clone(), k).unwrap());
    }
}

#[test]
fn matrix_matches_oracle_with_permeability_jump_and_pure_dirichlet() {
    let split = KappaLayout::SplitX {
        split: 0.5,
        left: 1.0,
        right: 1e-2,
    };
    let hetero = Arc::new(split.apply(Mesh::crisscross_grid(2).unwrap().classify_boundary(&BoundarySpec::left_top_dirichlet()).unwrap()).unwrap());
    assert_matches_oracle(&StressSpace::new(hetero, 2).unwrap());
    let dirichlet = Arc::new(Mesh::diagonal_grid(2).unwrap().classify_boundary(&BoundarySpec::all_dirichlet()).unwrap());
    assert_eq!(dirichlet.theta(), 1.0);
    assert_matches_oracle(&StressSpace::new(dirichlet, 1).unwrap());
}

#[test]
fn system_size_symmetry_and_definiteness() {
    let mesh = mixed_boundary_mesh(Mesh::diagonal_grid(2).unwrap());
    let space = StressSpace::new(mesh, 1).unwrap();
    let sys = assemble(&space, &ProblemData::homogeneous(1e-3)).unwrap();
    let dense = sys.matrix.to_dense();
    assert_eq!(dense.shape(), (72, 72));
    assert_eq!(sys.theta, 0.0);
    assert!(sys.kernel.is_none());
    assert_eq!(sys.penalty, 10.0);
    assert!((&dense - dense.transpose()).amax() < 1e-12 * dense.amax());
    assert!(min_eigenvalue(&dense) > 0.0);
}

#[test]
fn pure_dirichlet_kernel_is_the_identity_field() {
    let mesh = Arc::new(Mesh::crisscross_grid(2).unwrap().classify_boundary(&BoundarySpec::all_dirichlet()).unwrap());
    let space = StressSpace::new(mesh, 2).unwrap();
    let sys = assemble(&space, &ProblemData::homogeneous(1.0)).unwrap();
    let z = sys.kernel.expect("kernel for theta = 1");
    let mut az = vec![0.0; z.len()];
    sys.matrix.apply_sparse(&z, &mut az);
    let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(az.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-12 * zn);
    // The augmented operator is definite.
    assert!(min_eigenvalue(&sys.matrix.to_dense()) > 0.0);
}

#[test]
fn homogeneous_data_gives_zero_solution() {
    let mesh = mixed_boundary_mesh(Mesh::crisscross_grid(2).unwrap());
    let space = StressSpace::new(mesh, 1).unwrap();
    let data = ProblemData::homogeneous(1e-3);
    assert!(assemble_rhs(&space, &data).unwrap().iter().all(|&v| v == 0.0));
    for method in [SolverMethod::Direct, SolverMethod::Cg] {
        let sol = solve(&space, &data, &SolveOptions { method, ..Default::default() }).unwrap();
        assert!(sol.stress.coeffs().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn cg_and_direct_solvers_agree() {
    let case = ManufacturedCase::trigonometric(1e-3, KappaLayout::Constant(1.0));
    for (mesh, k) in [
        (mixed_boundary_mesh(Mesh::diagonal_grid(4).unwrap()), 1),
        (Arc::new(Mesh::crisscross_grid(2).unwrap().classify_boundary(&BoundarySpec::all_dirichlet()).unwrap()), 2),
    ] {
        let space = StressSpace::new(mesh, k).unwrap();
        let data = case.problem_data(10.0, 0);
        let direct = solve(&space, &data, &SolveOptions::default()).unwrap();
        let cg = solve(&space, &data, &SolveOptions { method: SolverMethod::Cg, ..Default::default() }).unwrap();
        assert!(direct.residual < 1e-12 && cg.residual < 1e-12);
        assert!(cg.iterations > 0 && direct.iterations == 0);
        let norm = direct.stress.coeffs().iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = direct.stress.coeffs().iter().zip(cg.stress.coeffs()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff < 1e-9 * norm, "relative difference {:.2e}", diff / norm);
    }
}

#[test]
fn right_hand_side_is_linear_in_the_data() {
    let mesh = mixed_boundary_mesh(Mesh::crisscross_grid(2).unwrap());
    let space = StressSpace::new(mesh, 2).unwrap();
    let a = ManufacturedCase::trigonometric(1e-3, KappaLayout::Constant(1.0)).problem_data(10.0, 0);
    let b = ManufacturedCase::polynomial(1e-3, KappaLayout::Constant(1.0)).problem_data(10.0, 0);
    let (alpha, beta) = (0.7, -1.9);
    let (a2, b2) = (a.clone(), b.clone());
    let combined = ProblemData {
        body_force: Arc::new(move |x, k| {
            let (p, q) = ((a2.body_force)(x, k), (b2.body_force)(x, k));
            [alpha * p[0] + beta * q[0], alpha * p[1] + beta * q[1]]
        }),
        dirichlet: {
            let (a, b) = (a.clone(), b.clone());
            Arc::new(move |x| {
                let (p, q) = ((a.dirichlet)(x), (b.dirichlet)(x));
                [alpha * p[0] + beta * q[0], alpha * p[1] + beta * q[1]]
            })
        },
        neumann: {
            let (a, b) = (a.clone(), b.clone());
            Arc::new(move |x, n| {
                let (p, q) = ((a.neumann)(x, n), (b.neumann)(x, n));
                [alpha * p[0] + beta * q[0], alpha * p[1] + beta * q[1]]
            })
        },
        ..a.clone()
    };
    let ra = assemble_rhs(&space, &a).unwrap();
    let rb = assemble_rhs(&space, &b).unwrap();
    let rc = assemble_rhs(&space, &combined).unwrap();
    for i in 0..rc.len() {
        assert!((rc[i] - alpha * ra[i] - beta * rb[i]).abs() < 1e-12 * (1.0 + rc[i].abs()));
    }
}

#[test]
fn exact_stress_satisfies_the_discrete_equations() {
    let cases = [
        (ManufacturedCase::trigonometric(1e-3, KappaLayout::Constant(1.0)), 1e-8),
        (ManufacturedCase::trigonometric(1.0, KappaLayout::Constant(1e-2)), 1e-8),
        (ManufacturedCase::heterogeneous(1e-3, 1e3).unwrap(), 1e-8),
        (ManufacturedCase::polynomial(1e-3, KappaLayout::Constant(1.0)), 1e-11),
        (ManufacturedCase::constant_stress(1e-3, KappaLayout::Constant(1.0)), 1e-11),
    ];
    for (case, tol) in cases {
        for (boundary, pure_dirichlet) in [(BoundarySpec::left_top_dirichlet(), false), (BoundarySpec::all_dirichlet(), true)] {
            // theta = 1 forces (tr sigma, 1) = 0, i.e. a zero-mean pressure.
            let case = if pure_dirichlet { case.clone().with_zero_mean_pressure() } else { case.clone() };
            let mesh = Arc::new(case.kappa.apply(Mesh::crisscross_grid(4).unwrap().classify_boundary(&boundary).unwrap()).unwrap());
            for k in 1..=3 {
                let space = StressSpace::new(mesh.clone(), k).unwrap();
                let r = consistency_residual(&space, &case.problem_data(10.0, 0), &|_, x| case.stress(x)).unwrap();
                assert!(r < tol, "{} k={k}: {r:.2e}", case.name);
            }
        }
    }
}

#[test]
fn in_space_stress_is_reproduced_exactly() {
    // The polynomial case has an affine stress, so k >= 1 reproduces it.
    let case = ManufacturedCase::polynomial(1e-3, KappaLayout::Constant(1.0));
    let mesh = mixed_boundary_mesh(Mesh::diagonal_grid(3).unwrap());
    for k in 1..=2 {
        let space = StressSpace::new(mesh.clone(), k).unwrap();
        let sol = solve(&space, &case.problem_data(10.0, 0), &SolveOptions::default()).unwrap();
        let rule = triangle_rule(4).unwrap();
        for e in 0..mesh.num_elements() {
            let g = mesh.geometry(e);
            for (xi, _) in rule.iter() {
                let x = g.to_physical(xi);
                let (s, _) = sol.stress.evaluate(e, x);
                let (t, _) = case.stress(x);
                for c in 0..3 {
                    assert!((s[c] - t[c]).abs() < 1e-10, "k={k}: {s:?} vs {t:?}");
                }
            }
        }
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let space = StressSpace::new(mixed_boundary_mesh(Mesh::diagonal_grid(1).unwrap()), 1).unwrap();
    let mut data = ProblemData::homogeneous(0.0);
    assert!(assemble(&space, &data).is_err());
    data.mu = 1.0;
    data.a_star = -1.0;
    assert!(assemble(&space, &data).is_err());
    data.a_star = 10.0;
    assert_eq!(data.penalty(3), 90.0);
    assert_eq!(data.data_exactness(2), 10);
    assert!(StressSpace::new(space.mesh().clone(), 5).is_err());
}
