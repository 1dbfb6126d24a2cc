use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stressdg::assembly::{solve, ProblemData, SolveOptions};
use stressdg::dg::{l2_project_vector, PiecewiseVectorField, StressField, StressSpace};
use stressdg::linalg::saddle::{saddle_solve, saddle_solve_direct, SaddleSystem};
use stressdg::linalg::CsrMatrix;
use stressdg::mesh::{BoundarySpec, Mesh, Point};
use stressdg::postprocess::{
    reconstruct_divfree, reconstruction_degree, recover_pressure, recover_velocity, SaddleMethod,
};
use stressdg::reference::triangle_rule;
use stressdg::verification::{KappaLayout, ManufacturedCase};

fn mesh(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::crisscross_grid(n).unwrap().classify_boundary(&BoundarySpec::left_top_dirichlet()).unwrap())
}

fn random_stress(space: &StressSpace, seed: u64) -> StressField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = (0..space.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    StressField::new(space.clone(), c).unwrap()
}

fn sample_points(mesh: &Mesh) -> Vec<(usize, Point)> {
    let rule = triangle_rule(3).unwrap();
    (0..mesh.num_elements())
        .flat_map(|e| {
            let g = *mesh.geometry(e);
            rule.iter().map(move |(xi, _)| (e, g.to_physical(xi))).collect::<Vec<_>>()
        })
        .collect()
}

#[test]
fn pressure_is_minus_half_the_trace() {
    let space = StressSpace::new(mesh(2), 2).unwrap();
    let sigma = random_stress(&space, 1);
    let p = recover_pressure(&sigma);
    assert_eq!(p.degree(), 2);
    for (e, x) in sample_points(space.mesh()) {
        let (s, _) = sigma.evaluate(e, x);
        assert!((p.evaluate(e, x) + 0.5 * (s[0] + s[2])).abs() < 1e-12);
    }
    // Linear in the stress.
    let tau = random_stress(&space, 2);
    let sum: Vec<f64> = sigma.coeffs().iter().zip(tau.coeffs()).map(|(a, b)| 2.0 * a - b).collect();
    let p_sum = recover_pressure(&StressField::new(space.clone(), sum).unwrap());
    let (p1, p2) = (recover_pressure(&sigma), recover_pressure(&tau));
    for i in 0..p_sum.coeffs().len() {
        assert!((p_sum.coeffs()[i] - 2.0 * p1.coeffs()[i] + p2.coeffs()[i]).abs() < 1e-13);
    }
    // Constant identity field: p = -1 everywhere, integral -1.
    let id = recover_pressure(&StressField::constant(space, [1.0, 0.0, 1.0]));
    assert!((id.integral() + 1.0).abs() < 1e-13);
}

#[test]
fn constant_stress_without_forcing_has_zero_velocity() {
    let space = StressSpace::new(mesh(2), 1).unwrap();
    let sigma = StressField::constant(space, [3.0, -1.0, 0.5]);
    let u = recover_velocity(&sigma, &ProblemData::homogeneous(1e-3)).unwrap();
    assert_eq!(u.degree(), 0);
    assert!(u.coeffs().iter().all(|c| c.abs() < 1e-12));
}

#[test]
fn velocity_matches_pointwise_formula_on_two_elements() {
    let m = Arc::new(stressdg::verification::KappaLayout::SplitX { split: 0.5, left: 2.0, right: 0.25 }
        .apply(Mesh::crisscross_grid(2).unwrap())
        .unwrap());
    for k in 1..=3 {
        let space = StressSpace::new(m.clone(), k).unwrap();
        let sigma = random_stress(&space, 10 + k as u64);
        let mu = 0.3;
        let u = recover_velocity(&sigma, &ProblemData::homogeneous(mu)).unwrap();
        for (e, x) in sample_points(&m) {
            let (_, d) = sigma.evaluate(e, x);
            let kappa = m.kappa(e);
            let got = u.evaluate(e, x);
            for c in 0..2 {
                assert!((got[c] - kappa / mu * d[c]).abs() < 1e-10 * (1.0 + got[c].abs()));
            }
        }
    }
}

#[test]
fn zero_viscosity_is_rejected() {
    let space = StressSpace::new(mesh(1), 1).unwrap();
    let sigma = StressField::zeros(space);
    assert!(recover_velocity(&sigma, &ProblemData::homogeneous(0.0)).is_err());
}

#[test]
fn recovered_velocity_error_at_reference_level() {
    // Diagonal mesh with 32 subdivisions, k = 1: ||u - u_h|| is about 4.15.
    let case = ManufacturedCase::trigonometric(1e-3, KappaLayout::Constant(1.0));
    let m = Arc::new(Mesh::diagonal_grid(32).unwrap().classify_boundary(&BoundarySpec::left_top_dirichlet()).unwrap());
    let space = StressSpace::new(m.clone(), 1).unwrap();
    let data = case.problem_data(10.0, 0);
    let sol = solve(&space, &data, &SolveOptions::default()).unwrap();
    let u = recover_velocity(&sol.stress, &data).unwrap();
    let rule = triangle_rule(8).unwrap();
    let mut e2 = 0.0;
    for e in 0..m.num_elements() {
        let g = m.geometry(e);
        for (xi, w) in rule.iter() {
            let x = g.to_physical(xi);
            let (a, b) = (u.evaluate(e, x), case.velocity(x));
            e2 += w * g.det * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
        }
    }
    assert!((e2.sqrt() / 4.15 - 1.0).abs() < 0.05, "{}", e2.sqrt());
}

fn project(m: &Arc<Mesh>, degree: usize, v: impl Fn(Point) -> [f64; 2]) -> PiecewiseVectorField {
    l2_project_vector(|_, x| v(x), degree, m.clone(), 10).unwrap()
}

#[test]
fn solenoidal_velocity_is_a_fixed_point() {
    let m = mesh(3);
    // k = 2 -> BDM_1; k = 3 -> BDM_2. Stream-function fields of matching degree.
    let fields: [(usize, fn(Point) -> [f64; 2]); 2] = [
        (2, |x| [x[0] + 0.3, 0.7 - x[1]]),
        (3, |x| [x[0] * x[0] + 2.0 * x[0] * x[1], -2.0 * x[0] * x[1] - x[1] * x[1]]),
    ];
    for (k, v) in fields {
        let u_h = project(&m, k - 1, v);
        for method in [SaddleMethod::Direct, SaddleMethod::Schur { tol: 1e-13 }] {
            let r = reconstruct_divfree(&u_h, k, method).unwrap();
            assert_eq!(r.velocity.space().degree(), reconstruction_degree(k));
            for (e, x) in sample_points(&m) {
                let (got, div) = r.velocity.evaluate(e, x);
                let want = v(x);
                assert!((got[0] - want[0]).abs() < 1e-9 && (got[1] - want[1]).abs() < 1e-9, "k={k}");
                assert!(div.abs() < 1e-9);
            }
            assert!(r.multiplier.iter().all(|l| l.abs() < 1e-9));
        }
    }
}

#[test]
fn reconstruction_of_random_field_is_divergence_free() {
    let m = mesh(4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 1..=3 {
        let mut u_h = PiecewiseVectorField::zeros(m.clone(), k - 1);
        u_h.coeffs_mut().iter_mut().for_each(|c| *c = rng.gen_range(-1.0..1.0));
        let direct = reconstruct_divfree(&u_h, k, SaddleMethod::Direct).unwrap();
        let schur = reconstruct_divfree(&u_h, k, SaddleMethod::Schur { tol: 1e-13 }).unwrap();
        let coeffs = direct.velocity.divergence_coefficients().unwrap();
        assert!(coeffs.iter().all(|c| c.abs() < 1e-10), "k={k}");
        for (e, x) in sample_points(&m) {
            assert!(direct.velocity.evaluate(e, x).1.abs() < 1e-9);
        }
        let diff = direct.velocity.coeffs().iter().zip(schur.velocity.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "k={k}: direct and Schur differ by {diff:.2e}");
        assert!(schur.outer_iterations > 0 && direct.outer_iterations == 0);
    }
}

#[test]
fn reconstruction_is_an_orthogonal_projection() {
    // u* minimizes ||u_h - v|| over divergence-free BDM fields, so the residual
    // u_h - u* is orthogonal to any divergence-free BDM field w.
    let m = mesh(2);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut u_h = PiecewiseVectorField::zeros(m.clone(), 1);
    u_h.coeffs_mut().iter_mut().for_each(|c| *c = rng.gen_range(-1.0..1.0));
    let r = reconstruct_divfree(&u_h, 2, SaddleMethod::Direct).unwrap();
    let w = r.velocity.space().interpolate(|x| [x[1] * 0.5 - 0.2, x[0] + 0.1]).unwrap();
    let rule = triangle_rule(4).unwrap();
    let mut ip = 0.0;
    for e in 0..m.num_elements() {
        let g = m.geometry(e);
        for (xi, wq) in rule.iter() {
            let x = g.to_physical(xi);
            let (us, _) = r.velocity.evaluate(e, x);
            let uh = u_h.evaluate(e, x);
            let (wv, _) = w.evaluate(e, x);
            ip += wq * g.det * ((uh[0] - us[0]) * wv[0] + (uh[1] - us[1]) * wv[1]);
        }
    }
    assert!(ip.abs() < 1e-11, "{ip:.2e}");
}

#[test]
fn saddle_solvers_report_inconsistent_sizes() {
    let sys = SaddleSystem {
        mass: CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)]),
        constraint: CsrMatrix::from_triplets(1, 3, vec![(0, 0, 1.0)]),
        rhs: vec![1.0, 1.0],
    };
    assert!(saddle_solve_direct(&sys).is_err());
    let ok = SaddleSystem {
        mass: CsrMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (1, 1, 1.0)]),
        constraint: CsrMatrix::from_triplets(1, 2, vec![(0, 0, 1.0), (0, 1, 1.0)]),
        rhs: vec![1.0, 0.0],
    };
    // min (2 a^2 + b^2)/2 - a  s.t. a + b = 0  ->  a = 1/3, b = -1/3
    for sol in [saddle_solve_direct(&ok).unwrap(), saddle_solve(&ok, 1e-14).unwrap()] {
        assert!((sol.primal[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((sol.primal[1] + 1.0 / 3.0).abs() < 1e-12);
    }
}
