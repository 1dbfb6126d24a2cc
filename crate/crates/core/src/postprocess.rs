//! Recovery of pressure and velocity from a discrete stress, and the
//! divergence-free velocity reconstruction.

use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::ProblemData;
use crate::bdm::{BdmField, BdmSpace};
use crate::dg::{l2_project_vector, PiecewiseVectorField, StressField};
use crate::error::{Error, Result};
use crate::linalg::{saddle_solve, saddle_solve_direct, CsrMatrix, SaddleSystem};
use crate::mesh::{Mesh, Point};
use crate::reference::{triangle_rule, ScalarBasis};

/// Piecewise polynomial scalar field, coefficients in the orthonormal
/// reference basis, element-major.
#[derive(Debug, Clone)]
pub struct PressureField {
    mesh: Arc<Mesh>,
    basis: Arc<ScalarBasis>,
    coeffs: Vec<f64>,
}

impl PressureField {
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element_coeffs(&self, e: usize) -> &[f64] {
        let n = self.basis.dim();
        &self.coeffs[e * n..(e + 1) * n]
    }

    pub fn evaluate(&self, e: usize, x: Point) -> f64 {
        let n = self.basis.dim();
        let mut v = vec![0.0; n];
        self.basis.eval(self.mesh.geometry(e).to_reference(x), &mut v);
        self.element_coeffs(e).iter().zip(&v).map(|(c, v)| c * v).sum()
    }

    /// `int_Omega p`.
    pub fn integral(&self) -> f64 {
        let n = self.basis.dim();
        let mut v = vec![0.0; n];
        self.basis.eval([0.0, 0.0], &mut v);
        (0..self.mesh.num_elements())
            .map(|e| 0.5 * self.mesh.geometry(e).det * v[0] * self.coeffs[e * n])
            .sum()
    }
}

/// `p_h = -tr(sigma_h) / 2`, element by element.
pub fn recover_pressure(sigma: &StressField) -> PressureField {
    let space = sigma.space();
    let n = space.scalar().dim();
    let mut coeffs = Vec::with_capacity(space.mesh().num_elements() * n);
    for e in 0..space.mesh().num_elements() {
        let c = sigma.element_coeffs(e);
        coeffs.extend((0..n).map(|i| -0.5 * (c[i] + c[2 * n + i])));
    }
    PressureField {
        mesh: space.mesh().clone(),
        basis: Arc::new(ScalarBasis::build(space.degree())),
        coeffs,
    }
}

/// `u_h = kappa / mu (div sigma_h + Q^{k-1} F)` in `P_{k-1}`.
pub fn recover_velocity(sigma: &StressField, data: &ProblemData) -> Result<PiecewiseVectorField> {
    if data.mu == 0.0 {
        return Err(Error::Config(
            "velocity recovery needs a nonzero viscosity".into(),
        ));
    }
    data.validate()?;
    let space = sigma.space();
    let mesh = space.mesh().clone();
    let k = space.degree();
    // Projecting div sigma_h (already in P_{k-1}) is exact.
    l2_project_vector(
        |e, x| {
            let kappa = mesh.kappa(e);
            let (_, d) = sigma.evaluate(e, x);
            let f = (data.body_force)(x, kappa);
            let s = kappa / data.mu;
            [s * (d[0] + f[0]), s * (d[1] + f[1])]
        },
        k - 1,
        mesh.clone(),
        data.data_exactness(k),
    )
}

/// Degree of the H(div) reconstruction for a stress of degree `k`.
pub fn reconstruction_degree(k: usize) -> usize {
    (k.max(2)) - 1
}

/// How the mixed reconstruction system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SaddleMethod {
    /// Sparse LU of the full indefinite matrix.
    #[default]
    Direct,
    /// Conjugate gradients on the Schur complement with the given tolerance.
    Schur { tol: f64 },
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub velocity: BdmField,
    /// Multiplier in `P_{m-1}`, element-major, orthonormal reference basis.
    pub multiplier: Vec<f64>,
    pub outer_iterations: usize,
}

/// Mixed projection: find `u*` in BDM_m and `l` in `P_{m-1}` with
/// `(u*, v) + (l, div v) = (u_h, v)` and `(div u*, q) = 0`.
pub fn reconstruct_divfree(u_h: &PiecewiseVectorField, k: usize, method: SaddleMethod) -> Result<Reconstruction> {
    let mesh = u_h.mesh().clone();
    let m = reconstruction_degree(k);
    let space = BdmSpace::new(mesh.clone(), m)?;
    let q_basis = ScalarBasis::build(m - 1);
    let nq = q_basis.dim();
    let rule = triangle_rule(2 * m)?;

    struct Local {
        dofs: Vec<usize>,
        mass: Vec<f64>,
        constraint: Vec<f64>,
        rhs: Vec<f64>,
    }
    let locals: Vec<Local> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let g = mesh.geometry(e);
            let local = space.local(e);
            let nl = local.len();
            let mut mass = vec![0.0; nl * nl];
            let mut constraint = vec![0.0; nq * nl];
            let mut rhs = vec![0.0; nl];
            let mut q = vec![0.0; nq];
            for (xi, w) in rule.iter() {
                let x = g.to_physical(xi);
                let (vals, divs) = local.eval(x);
                q_basis.eval(xi, &mut q);
                let wd = w * g.det;
                let uh = u_h.evaluate(e, x);
                for i in 0..nl {
                    rhs[i] += wd * (uh[0] * vals[i][0] + uh[1] * vals[i][1]);
                    for j in 0..nl {
                        mass[i * nl + j] += wd * (vals[i][0] * vals[j][0] + vals[i][1] * vals[j][1]);
                    }
                    for (a, qa) in q.iter().enumerate() {
                        constraint[a * nl + i] += wd * qa * divs[i];
                    }
                }
            }
            Local {
                dofs: local.dofs().to_vec(),
                mass,
                constraint,
                rhs,
            }
        })
        .collect();

    let n = space.num_dofs();
    let mut mass_t = Vec::new();
    let mut con_t = Vec::new();
    let mut rhs = vec![0.0; n];
    for (e, l) in locals.iter().enumerate() {
        let nl = l.dofs.len();
        for i in 0..nl {
            rhs[l.dofs[i]] += l.rhs[i];
            for j in 0..nl {
                mass_t.push((l.dofs[i], l.dofs[j], l.mass[i * nl + j]));
            }
            for a in 0..nq {
                con_t.push((e * nq + a, l.dofs[i], l.constraint[a * nl + i]));
            }
        }
    }
    let sys = SaddleSystem {
        mass: CsrMatrix::from_triplets(n, n, mass_t),
        constraint: CsrMatrix::from_triplets(mesh.num_elements() * nq, n, con_t),
        rhs,
    };
    let sol = match method {
        SaddleMethod::Direct => saddle_solve_direct(&sys)?,
        SaddleMethod::Schur { tol } => saddle_solve(&sys, tol)?,
    };
    Ok(Reconstruction {
        velocity: BdmField::new(space, sol.primal)?,
        multiplier: sol.multiplier,
        outer_iterations: sol.outer_iterations,
    })
}
