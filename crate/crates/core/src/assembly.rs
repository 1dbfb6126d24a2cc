//! Assembly of the pure-stress interior penalty system
//!
//! ```text
//! 1/2 (s^D, t^D) + theta (tr s, 1)(tr t, 1) + (k div s, div t)
//!   - <{k div s}, [t]> - <{k div t}, [s]> + a <g^-1 h^-1 [s], [t]>
//!   = <mu G_D, t n>_D - (k F, div t) + <{k F}, [t]>
//!     - <k G_N, div t>_N + <a g^-1 h^-1 G_N, t n>_N
//! ```
//!
//! with face terms over interior and Neumann faces, `k` the permeability,
//! `g = gamma_F` and `a = a* k^2` the penalty. The `theta` term is kept out
//! of the sparse matrix as a rank-one augmentation.

use std::sync::Arc;

use log::debug;
use rayon::prelude::*;

use crate::dg::{face_quadrature, StressSpace};
use crate::error::{Error, Result};
use crate::linalg::BlockSparse;
use crate::mesh::{FaceKind, Point};
use crate::reference::tensor::{self, Sym, UNIT_TENSORS, UNIT_TRACE};
use crate::reference::{edge_rule, triangle_rule, QuadratureRule};

/// Body force `F(x, kappa_K)`; the permeability argument lets per-subdomain
/// forcing be evaluated from either side of an interface.
pub type BodyForce = Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>;
/// Dirichlet velocity `G_D(x)`.
pub type VelocityData = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
/// Neumann traction `G_N(x, n)`.
pub type TractionData = Arc<dyn Fn(Point, [f64; 2]) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub struct ProblemData {
    pub mu: f64,
    pub body_force: BodyForce,
    pub dirichlet: VelocityData,
    pub neumann: TractionData,
    /// Penalty base; the penalty is `a_star * k^2`.
    pub a_star: f64,
    /// Extra exactness added to the default `2k + 6` for data integrals.
    pub quadrature_bump: usize,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData")
            .field("mu", &self.mu)
            .field("a_star", &self.a_star)
            .field("quadrature_bump", &self.quadrature_bump)
            .finish_non_exhaustive()
    }
}

impl ProblemData {
    /// Homogeneous data: no forcing, no boundary data.
    pub fn homogeneous(mu: f64) -> Self {
        Self {
            mu,
            body_force: Arc::new(|_, _| [0.0, 0.0]),
            dirichlet: Arc::new(|_| [0.0, 0.0]),
            neumann: Arc::new(|_, _| [0.0, 0.0]),
            a_star: 10.0,
            quadrature_bump: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!("viscosity must be positive, got {}", self.mu)));
        }
        if !(self.a_star > 0.0 && self.a_star.is_finite()) {
            return Err(Error::Config(format!(
                "penalty parameter must be positive, got {}",
                self.a_star
            )));
        }
        Ok(())
    }

    pub fn penalty(&self, degree: usize) -> f64 {
        self.a_star * (degree * degree) as f64
    }

    /// Exactness of the rules used for integrals involving data.
    pub fn data_exactness(&self, degree: usize) -> usize {
        (2 * degree + 6 + self.quadrature_bump).min(crate::reference::quadrature::MAX_EXACTNESS)
    }
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    /// Sparse operator; carries the `theta` rank-one term when active.
    pub matrix: BlockSparse,
    pub rhs: Vec<f64>,
    pub penalty: f64,
    pub theta: f64,
    /// Kernel of the sparse part (the identity field) when `theta = 1`.
    pub kernel: Option<Vec<f64>>,
}

/// `E_a : E_b - tr(E_a) tr(E_b) / 2`, the deviatoric product of unit tensors.
fn deviatoric_gram() -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for (a, row) in m.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            let mut ab = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    ab += UNIT_TENSORS[a][i][j] * UNIT_TENSORS[b][i][j];
                }
            }
            *v = ab - 0.5 * UNIT_TRACE[a] * UNIT_TRACE[b];
        }
    }
    m
}

/// Reference stiffness integrals `R[r][s][i][j] = int d_r phi_i d_s phi_j`.
struct ReferenceStiffness {
    n: usize,
    values: [[Vec<f64>; 2]; 2],
}

impl ReferenceStiffness {
    fn new(space: &StressSpace) -> Self {
        let basis = space.scalar();
        let n = basis.dim();
        let rule = triangle_rule(2 * space.degree()).expect("degree in range");
        let mut values: [[Vec<f64>; 2]; 2] = Default::default();
        for row in values.iter_mut() {
            for m in row.iter_mut() {
                *m = vec![0.0; n * n];
            }
        }
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        for (p, w) in rule.iter() {
            basis.eval_with_grad(p, &mut v, &mut g);
            for r in 0..2 {
                for s in 0..2 {
                    let m = &mut values[r][s];
                    for i in 0..n {
                        for j in 0..n {
                            m[i * n + j] += w * g[i][r] * g[j][s];
                        }
                    }
                }
            }
        }
        Self { n, values }
    }
}

/// Per-side trace data of all local basis functions at one face point.
struct SideTraces {
    element: usize,
    /// `tau n_K` for each local function.
    jump: Vec<[f64; 2]>,
    /// `weight * kappa_K * div tau` for each local function.
    avg: Vec<[f64; 2]>,
    /// `div tau` for each local function (unweighted).
    div: Vec<[f64; 2]>,
}

struct FaceEvaluator<'a> {
    space: &'a StressSpace,
    values: Vec<f64>,
    grads: Vec<[f64; 2]>,
}

impl<'a> FaceEvaluator<'a> {
    fn new(space: &'a StressSpace) -> Self {
        let n = space.scalar().dim();
        Self {
            space,
            values: vec![0.0; n],
            grads: vec![[0.0; 2]; n],
        }
    }

    /// Traces from both sides of face `f` at the physical point `x`.
    fn sides(&mut self, f: usize, x: Point) -> Vec<SideTraces> {
        let mesh = self.space.mesh();
        let face = mesh.face(f);
        let n = self.space.scalar().dim();
        let nloc = 3 * n;
        let mut out = Vec::with_capacity(2);
        let interior = face.elements.1.is_some();
        let weight = if interior { 0.5 } else { 1.0 };
        for (side, e) in [Some(face.elements.0), face.elements.1].into_iter().enumerate() {
            let Some(e) = e else { continue };
            let sign = if side == 0 { 1.0 } else { -1.0 };
            let normal = [sign * face.normal[0], sign * face.normal[1]];
            self.space.eval_scalar(e, x, &mut self.values, &mut self.grads);
            let kappa = mesh.kappa(e);
            let mut jump = Vec::with_capacity(nloc);
            let mut avg = Vec::with_capacity(nloc);
            let mut div = Vec::with_capacity(nloc);
            for c in 0..3 {
                let en = tensor::unit_apply(c, normal);
                for i in 0..n {
                    let v = self.values[i];
                    jump.push([en[0] * v, en[1] * v]);
                    let d = tensor::unit_divergence(c, self.grads[i]);
                    avg.push([weight * kappa * d[0], weight * kappa * d[1]]);
                    div.push(d);
                }
            }
            out.push(SideTraces {
                element: e,
                jump,
                avg,
                div,
            });
        }
        out
    }
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Integral of `tr(tau_l)` for every local function of element `e`.
fn trace_moments(space: &StressSpace, e: usize) -> Vec<f64> {
    let n = space.scalar().dim();
    let mut v = vec![0.0; n];
    space.scalar().eval([0.0, 0.0], &mut v);
    let det = space.mesh().geometry(e).det;
    let mut t = vec![0.0; 3 * n];
    for c in 0..3 {
        // int_K phi_0 = det * |T_ref| * phi_0; higher functions have zero mean.
        t[c * n] = UNIT_TRACE[c] * det * 0.5 * v[0];
    }
    t
}

/// Volume block `1/2 (s^D, t^D) + (kappa div s, div t)` of element `e`.
fn element_block(space: &StressSpace, stiff: &ReferenceStiffness, dev: &[[f64; 3]; 3], e: usize) -> Vec<f64> {
    let n = stiff.n;
    let nloc = 3 * n;
    let g = space.mesh().geometry(e);
    let kappa = space.mesh().kappa(e);
    let inv = g.inverse;
    // Physical stiffness S[q][q'] = det * sum_{r,s} inv[r][q] inv[s][q'] R[r][s]
    let mut phys: [[Vec<f64>; 2]; 2] = Default::default();
    for q in 0..2 {
        for qq in 0..2 {
            let mut m = vec![0.0; n * n];
            for r in 0..2 {
                for s in 0..2 {
                    let c = g.det * inv[r][q] * inv[s][qq];
                    for (mi, ri) in m.iter_mut().zip(&stiff.values[r][s]) {
                        *mi += c * ri;
                    }
                }
            }
            phys[q][qq] = m;
        }
    }
    let mut block = vec![0.0; nloc * nloc];
    for a in 0..3 {
        for b in 0..3 {
            // div(phi E_a)_d = sum_q E_a[d][q] d_q phi
            let mut coef = [[0.0; 2]; 2];
            for d in 0..2 {
                for q in 0..2 {
                    for qq in 0..2 {
                        coef[q][qq] += UNIT_TENSORS[a][d][q] * UNIT_TENSORS[b][d][qq];
                    }
                }
            }
            for i in 0..n {
                let row = (a * n + i) * nloc + b * n;
                for j in 0..n {
                    let mut v = 0.0;
                    for q in 0..2 {
                        for qq in 0..2 {
                            if coef[q][qq] != 0.0 {
                                v += coef[q][qq] * phys[q][qq][i * n + j];
                            }
                        }
                    }
                    block[row + j] = kappa * v;
                }
                // Orthonormal reference basis: int_K phi_i phi_j = det delta_ij.
                block[row + i] += 0.5 * dev[a][b] * g.det;
            }
        }
    }
    block
}

/// Assembles matrix and right-hand side.
pub fn assemble(space: &StressSpace, data: &ProblemData) -> Result<LinearSystem> {
    data.validate()?;
    let mesh = space.mesh();
    let k = space.degree();
    let n = space.scalar().dim();
    let nloc = 3 * n;
    let penalty = data.penalty(k);
    let theta = mesh.theta();

    // Elements couple through interior faces only.
    let pattern: Vec<Vec<usize>> = (0..mesh.num_elements())
        .map(|e| {
            let mut v: Vec<usize> = mesh.neighbors(e).collect();
            v.sort_unstable();
            v
        })
        .collect();
    let mut matrix = BlockSparse::with_pattern(nloc, &pattern);

    let stiff = ReferenceStiffness::new(space);
    let dev = deviatoric_gram();
    let blocks: Vec<Vec<f64>> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| element_block(space, &stiff, &dev, e))
        .collect();
    for (e, b) in blocks.into_iter().enumerate() {
        matrix.block_mut(e, e).copy_from_slice(&b);
    }

    let face_rule = edge_rule(2 * k + 2)?;
    let mut eval = FaceEvaluator::new(space);
    let mut local = vec![0.0; nloc * nloc];
    for f in mesh.skeleton_faces() {
        let scale = penalty / (mesh.gamma(f) * mesh.face(f).length);
        let points = face_quadrature(mesh, f, &face_rule);
        let sides_at: Vec<Vec<SideTraces>> = points.iter().map(|&(x, _)| eval.sides(f, x)).collect();
        let nsides = sides_at[0].len();
        for t in 0..nsides {
            for s in 0..nsides {
                local.iter_mut().for_each(|v| *v = 0.0);
                for ((_, w), sides) in points.iter().zip(&sides_at) {
                    let (test, trial) = (&sides[t], &sides[s]);
                    for i in 0..nloc {
                        let (ji, ai) = (test.jump[i], test.avg[i]);
                        let row = &mut local[i * nloc..(i + 1) * nloc];
                        for (j, r) in row.iter_mut().enumerate() {
                            let (jj, aj) = (trial.jump[j], trial.avg[j]);
                            *r += w * (scale * dot2(jj, ji) - dot2(aj, ji) - dot2(ai, jj));
                        }
                    }
                }
                let (et, es) = (sides_at[0][t].element, sides_at[0][s].element);
                for (dst, src) in matrix.block_mut(et, es).iter_mut().zip(&local) {
                    *dst += src;
                }
            }
        }
    }

    let mut kernel = None;
    if theta == 1.0 {
        let mut t = vec![0.0; space.num_dofs()];
        for e in 0..mesh.num_elements() {
            t[space.element_range(e)].copy_from_slice(&trace_moments(space, e));
        }
        matrix.set_rank_one(Some(t));
        kernel = Some(crate::dg::StressField::constant(space.clone(), [1.0, 0.0, 1.0]).coeffs().to_vec());
    }

    let rhs = assemble_rhs(space, data)?;
    debug!(
        "assembled {} dofs, {} stored entries, penalty {penalty}, theta {theta}",
        space.num_dofs(),
        matrix.nnz()
    );
    Ok(LinearSystem {
        matrix,
        rhs,
        penalty,
        theta,
        kernel,
    })
}

/// Right-hand side functional applied to every basis function.
pub fn assemble_rhs(space: &StressSpace, data: &ProblemData) -> Result<Vec<f64>> {
    data.validate()?;
    let mesh = space.mesh();
    let k = space.degree();
    let n = space.scalar().dim();
    let nloc = 3 * n;
    let penalty = data.penalty(k);
    let tri = triangle_rule(data.data_exactness(k))?;
    let edge = edge_rule(data.data_exactness(k))?;

    let mut rhs: Vec<f64> = (0..mesh.num_elements())
        .into_par_iter()
        .flat_map_iter(|e| {
            let g = mesh.geometry(e);
            let kappa = mesh.kappa(e);
            let mut v = vec![0.0; n];
            let mut grads = vec![[0.0; 2]; n];
            let mut out = vec![0.0; nloc];
            for (xi, w) in tri.iter() {
                let x = g.to_physical(xi);
                let force = (data.body_force)(x, kappa);
                space.scalar().eval_with_grad(xi, &mut v, &mut grads);
                let wk = w * g.det * kappa;
                for c in 0..3 {
                    for i in 0..n {
                        let d = tensor::unit_divergence(c, g.push_gradient(grads[i]));
                        out[c * n + i] -= wk * dot2(force, d);
                    }
                }
            }
            out
        })
        .collect();

    let mut eval = FaceEvaluator::new(space);
    for (f, face) in mesh.faces().iter().enumerate() {
        let scale = penalty / (mesh.gamma(f) * face.length);
        for (x, w) in face_quadrature(mesh, f, &edge) {
            let sides = eval.sides(f, x);
            match face.kind {
                FaceKind::Dirichlet => {
                    let gd = (data.dirichlet)(x);
                    let s = &sides[0];
                    let r = &mut rhs[space.element_range(s.element)];
                    for l in 0..nloc {
                        r[l] += w * data.mu * dot2(gd, s.jump[l]);
                    }
                }
                FaceKind::Interior | FaceKind::Neumann => {
                    let weight = if sides.len() == 2 { 0.5 } else { 1.0 };
                    let mut avg_kf = [0.0; 2];
                    for s in &sides {
                        let kappa = mesh.kappa(s.element);
                        let fx = (data.body_force)(x, kappa);
                        avg_kf[0] += weight * kappa * fx[0];
                        avg_kf[1] += weight * kappa * fx[1];
                    }
                    let gn = if face.kind == FaceKind::Neumann {
                        Some((data.neumann)(x, face.normal))
                    } else {
                        None
                    };
                    for s in &sides {
                        let kappa = mesh.kappa(s.element);
                        let r = &mut rhs[space.element_range(s.element)];
                        for l in 0..nloc {
                            let mut v = dot2(avg_kf, s.jump[l]);
                            if let Some(gn) = gn {
                                v += scale * dot2(gn, s.jump[l]) - kappa * dot2(gn, s.div[l]);
                            }
                            r[l] += w * v;
                        }
                    }
                }
            }
        }
    }
    Ok(rhs)
}

/// A stress given analytically: value and divergence at a point, seen from
/// element `e` (piecewise data may differ across interfaces).
pub type StressFunction<'a> = &'a (dyn Fn(usize, Point) -> (Sym, [f64; 2]) + Sync);

/// Bilinear form with a function in the trial slot, tested against every
/// basis function. Integrals use the data quadrature rules.
pub fn apply_form_to_function(space: &StressSpace, data: &ProblemData, sigma: StressFunction<'_>) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let k = space.degree();
    let n = space.scalar().dim();
    let nloc = 3 * n;
    let penalty = data.penalty(k);
    let theta = mesh.theta();
    let tri = triangle_rule(data.data_exactness(k))?;
    let edge = edge_rule(data.data_exactness(k))?;

    let mut trace_total = 0.0;
    let mut out = vec![0.0; space.num_dofs()];
    let mut v = vec![0.0; n];
    let mut grads = vec![[0.0; 2]; n];
    for e in 0..mesh.num_elements() {
        let g = mesh.geometry(e);
        let kappa = mesh.kappa(e);
        let r = &mut out[space.element_range(e)];
        for (xi, w) in tri.iter() {
            let x = g.to_physical(xi);
            let (s, ds) = sigma(e, x);
            let sd = tensor::deviatoric(s);
            trace_total += w * g.det * tensor::trace(s);
            space.scalar().eval_with_grad(xi, &mut v, &mut grads);
            let wd = w * g.det;
            for c in 0..3 {
                let mut unit = [0.0; 3];
                unit[c] = 1.0;
                let dev_c = 0.5 * tensor::frobenius(sd, tensor::deviatoric(unit));
                for i in 0..n {
                    let d = tensor::unit_divergence(c, g.push_gradient(grads[i]));
                    r[c * n + i] += wd * (dev_c * v[i] + kappa * dot2(ds, d));
                }
            }
        }
    }
    if theta == 1.0 {
        for e in 0..mesh.num_elements() {
            let t = trace_moments(space, e);
            for (o, ti) in out[space.element_range(e)].iter_mut().zip(t) {
                *o += trace_total * ti;
            }
        }
    }

    let mut eval = FaceEvaluator::new(space);
    for f in mesh.skeleton_faces() {
        let face = mesh.face(f);
        let scale = penalty / (mesh.gamma(f) * face.length);
        let weight = if face.elements.1.is_some() { 0.5 } else { 1.0 };
        for (x, w) in face_quadrature(mesh, f, &edge) {
            let sides = eval.sides(f, x);
            let mut jump_s = [0.0; 2];
            let mut avg_s = [0.0; 2];
            for (idx, s) in sides.iter().enumerate() {
                let sign = if idx == 0 { 1.0 } else { -1.0 };
                let normal = [sign * face.normal[0], sign * face.normal[1]];
                let (val, div) = sigma(s.element, x);
                let sn = tensor::apply(val, normal);
                let kappa = mesh.kappa(s.element);
                for r in 0..2 {
                    jump_s[r] += sn[r];
                    avg_s[r] += weight * kappa * div[r];
                }
            }
            for s in &sides {
                let r = &mut out[space.element_range(s.element)];
                for l in 0..nloc {
                    r[l] += w * (scale * dot2(jump_s, s.jump[l]) - dot2(avg_s, s.jump[l]) - dot2(s.avg[l], jump_s));
                }
            }
        }
    }
    Ok(out)
}

/// `max_i |b_h(sigma, tau_i) - rhs(tau_i)|` for an exact stress `sigma`.
pub fn consistency_residual(space: &StressSpace, data: &ProblemData, sigma: StressFunction<'_>) -> Result<f64> {
    let lhs = apply_form_to_function(space, data, sigma)?;
    let rhs = assemble_rhs(space, data)?;
    Ok(lhs
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Convenience: the same quadrature rule pair used for data integrals.
pub fn data_rules(space: &StressSpace, data: &ProblemData) -> Result<(QuadratureRule, QuadratureRule)> {
    let q = data.data_exactness(space.degree());
    Ok((triangle_rule(q)?, edge_rule(q)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    /// Sparse Cholesky factorization.
    #[default]
    Direct,
    /// Preconditioned conjugate gradients.
    Cg,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    pub method: SolverMethod,
    pub cg: crate::linalg::CgOptions,
}

/// Discrete stress together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub stress: crate::dg::StressField,
    /// Zero for the direct solver.
    pub iterations: usize,
    /// Relative residual of the augmented system.
    pub residual: f64,
    pub theta: f64,
}

/// Assembles and solves the discrete system.
pub fn solve(space: &StressSpace, data: &ProblemData, opts: &SolveOptions) -> Result<Solution> {
    let system = assemble(space, data)?;
    let (x, iterations) = match opts.method {
        SolverMethod::Cg => {
            let out = crate::linalg::cg_solve(&system.matrix, &system.rhs, &opts.cg)?;
            debug!("cg: {} iterations, residual {:.3e}", out.iterations, out.residual);
            (out.x, out.iterations)
        }
        SolverMethod::Direct => (
            crate::linalg::direct_solve(&system.matrix, &system.rhs, system.kernel.as_deref())?,
            0,
        ),
    };
    let mut ax = vec![0.0; x.len()];
    system.matrix.apply(&x, &mut ax);
    let rnorm: f64 = ax.iter().zip(&system.rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let bnorm: f64 = system.rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
    Ok(Solution {
        stress: crate::dg::StressField::new(space.clone(), x)?,
        iterations,
        residual: if bnorm > 0.0 { rnorm / bnorm } else { rnorm },
        theta: system.theta,
    })
}
