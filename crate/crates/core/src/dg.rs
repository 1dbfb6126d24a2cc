//! Broken polynomial spaces over a mesh: the discontinuous symmetric stress
//! space, piecewise vector fields, element-wise L2 projection and face
//! traces (jumps and averages).
//!
//! Degrees of freedom are element-major; inside an element the `xx`, `xy`
//! and `yy` blocks follow each other, each holding one coefficient per
//! scalar basis function.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{FaceKind, Mesh, Point};
use crate::reference::tensor::{self, Sym};
use crate::reference::{edge_rule, triangle_rule, QuadratureRule, ScalarBasis, SymTensorBasis};

/// Physical quadrature points and weights on a face, ordered from the
/// first to the second face vertex.
pub fn face_quadrature(mesh: &Mesh, f: usize, rule: &QuadratureRule) -> Vec<(Point, f64)> {
    let face = mesh.face(f);
    let a = mesh.vertices()[face.vertices[0]];
    let b = mesh.vertices()[face.vertices[1]];
    rule.iter()
        .map(|(s, w)| {
            let s = s[0];
            ([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], w * face.length)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct StressSpace {
    mesh: Arc<Mesh>,
    basis: Arc<SymTensorBasis>,
}

impl StressSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        Ok(Self {
            mesh,
            basis: Arc::new(SymTensorBasis::new(degree)?),
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn basis(&self) -> &SymTensorBasis {
        &self.basis
    }

    pub fn scalar(&self) -> &ScalarBasis {
        self.basis.scalar()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn dofs_per_element(&self) -> usize {
        self.basis.dim()
    }

    pub fn num_dofs(&self) -> usize {
        self.mesh.num_elements() * self.dofs_per_element()
    }

    pub fn element_range(&self, e: usize) -> std::ops::Range<usize> {
        let n = self.dofs_per_element();
        e * n..(e + 1) * n
    }

    /// Scalar values and physical gradients of the basis at a physical point of element `e`.
    pub fn eval_scalar(&self, e: usize, x: Point, values: &mut [f64], grads: &mut [[f64; 2]]) {
        let g = self.mesh.geometry(e);
        self.scalar().eval_with_grad(g.to_reference(x), values, grads);
        for gr in grads.iter_mut() {
            *gr = g.push_gradient(*gr);
        }
    }

    /// Value and divergence of the local combination `coeffs` at `x` in element `e`.
    pub fn evaluate(&self, e: usize, coeffs: &[f64], x: Point) -> (Sym, [f64; 2]) {
        let n = self.scalar().dim();
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        self.eval_scalar(e, x, &mut v, &mut g);
        self.basis.combine(coeffs, &v, &g)
    }
}

#[derive(Debug, Clone)]
pub struct StressField {
    space: StressSpace,
    coeffs: Vec<f64>,
}

impl StressField {
    pub fn new(space: StressSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.num_dofs() {
            return Err(Error::Config(format!(
                "{} coefficients for a space with {} dofs",
                coeffs.len(),
                space.num_dofs()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: StressSpace) -> Self {
        let n = space.num_dofs();
        Self {
            space,
            coeffs: vec![0.0; n],
        }
    }

    /// Element-wise L2 projection of a tensor function.
    pub fn project(space: StressSpace, f: impl Fn(usize, Point) -> Sym, exactness: usize) -> Result<Self> {
        let rule = triangle_rule(exactness)?;
        let n = space.scalar().dim();
        let mut coeffs = vec![0.0; space.num_dofs()];
        let mut v = vec![0.0; n];
        for e in 0..space.mesh().num_elements() {
            let g = *space.mesh().geometry(e);
            let block = &mut coeffs[space.element_range(e)];
            for (xi, w) in rule.iter() {
                space.scalar().eval(xi, &mut v);
                let t = f(e, g.to_physical(xi));
                // Orthonormal reference basis: physical mass matrix is det(J) I.
                for c in 0..3 {
                    for i in 0..n {
                        block[c * n + i] += w * t[c] * v[i];
                    }
                }
            }
        }
        Ok(Self { space, coeffs })
    }

    /// The same symmetric tensor on every element.
    pub fn constant(space: StressSpace, t: Sym) -> Self {
        let n = space.scalar().dim();
        let mut v = vec![0.0; n];
        space.scalar().eval([0.0, 0.0], &mut v);
        let c0 = 1.0 / v[0];
        let mut coeffs = vec![0.0; space.num_dofs()];
        for e in 0..space.mesh().num_elements() {
            let block = &mut coeffs[space.element_range(e)];
            for c in 0..3 {
                block[c * n] = t[c] * c0;
            }
        }
        Self { space, coeffs }
    }

    pub fn space(&self) -> &StressSpace {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn element_coeffs(&self, e: usize) -> &[f64] {
        &self.coeffs[self.space.element_range(e)]
    }

    /// Value and divergence at `x`, evaluated from element `e`.
    pub fn evaluate(&self, e: usize, x: Point) -> (Sym, [f64; 2]) {
        self.space.evaluate(e, self.element_coeffs(e), x)
    }

    /// `(tr sigma, 1)` over the whole domain.
    pub fn trace_integral(&self) -> f64 {
        let n = self.space.scalar().dim();
        let mut v = vec![0.0; n];
        self.space.scalar().eval([0.0, 0.0], &mut v);
        // Only the constant function has a nonzero mean.
        let mean0 = 0.5 * v[0];
        (0..self.space.mesh().num_elements())
            .map(|e| {
                let b = self.element_coeffs(e);
                self.space.mesh().geometry(e).det * mean0 * (b[0] + b[2 * n])
            })
            .sum()
    }

    /// `||sigma||_0` computed from the orthonormal coefficients.
    pub fn l2_norm(&self) -> f64 {
        let n = self.space.scalar().dim();
        (0..self.space.mesh().num_elements())
            .map(|e| {
                let b = self.element_coeffs(e);
                let s: f64 = (0..n)
                    .map(|i| b[i].powi(2) + 2.0 * b[n + i].powi(2) + b[2 * n + i].powi(2))
                    .sum();
                self.space.mesh().geometry(e).det * s
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Jump `tau_K n_K + tau_K' n_K'` at `x` on face `f` (one-sided on Neumann faces).
    pub fn face_jump(&self, f: usize, x: Point) -> Result<[f64; 2]> {
        let face = self.space.mesh().face(f);
        if face.kind == FaceKind::Dirichlet {
            return Err(Error::Config(format!("face {f} is a Dirichlet face")));
        }
        let n = face.normal;
        let (t0, _) = self.evaluate(face.elements.0, x);
        let mut j = tensor::apply(t0, n);
        if let Some(e1) = face.elements.1 {
            let (t1, _) = self.evaluate(e1, x);
            let j1 = tensor::apply(t1, n);
            j[0] -= j1[0];
            j[1] -= j1[1];
        }
        Ok(j)
    }

    /// Average of `kappa div tau` at `x` on face `f` (one-sided on Neumann faces).
    pub fn face_average_kdiv(&self, f: usize, x: Point) -> Result<[f64; 2]> {
        let mesh = self.space.mesh();
        let face = mesh.face(f);
        if face.kind == FaceKind::Dirichlet {
            return Err(Error::Config(format!("face {f} is a Dirichlet face")));
        }
        let e0 = face.elements.0;
        let (_, d0) = self.evaluate(e0, x);
        let k0 = mesh.kappa(e0);
        Ok(match face.elements.1 {
            Some(e1) => {
                let (_, d1) = self.evaluate(e1, x);
                let k1 = mesh.kappa(e1);
                [0.5 * (k0 * d0[0] + k1 * d1[0]), 0.5 * (k0 * d0[1] + k1 * d1[1])]
            }
            None => [k0 * d0[0], k0 * d0[1]],
        })
    }
}

/// Vector field in `P_m(T_h, R^2)`, stored element-major with the `x`
/// component block before the `y` block.
#[derive(Debug, Clone)]
pub struct PiecewiseVectorField {
    mesh: Arc<Mesh>,
    basis: Arc<ScalarBasis>,
    coeffs: Vec<f64>,
}

impl PiecewiseVectorField {
    pub fn zeros(mesh: Arc<Mesh>, degree: usize) -> Self {
        let basis = Arc::new(ScalarBasis::build(degree));
        let n = mesh.num_elements() * 2 * basis.dim();
        Self {
            mesh,
            basis,
            coeffs: vec![0.0; n],
        }
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn basis(&self) -> &ScalarBasis {
        &self.basis
    }

    pub fn dofs_per_element(&self) -> usize {
        2 * self.basis.dim()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn element_coeffs(&self, e: usize) -> &[f64] {
        let n = self.dofs_per_element();
        &self.coeffs[e * n..(e + 1) * n]
    }

    pub fn element_coeffs_mut(&mut self, e: usize) -> &mut [f64] {
        let n = self.dofs_per_element();
        &mut self.coeffs[e * n..(e + 1) * n]
    }

    pub fn evaluate(&self, e: usize, x: Point) -> [f64; 2] {
        let n = self.basis.dim();
        let mut v = vec![0.0; n];
        self.basis.eval(self.mesh.geometry(e).to_reference(x), &mut v);
        let c = self.element_coeffs(e);
        let mut out = [0.0; 2];
        for i in 0..n {
            out[0] += c[i] * v[i];
            out[1] += c[n + i] * v[i];
        }
        out
    }
}

/// Element-wise L2 projection onto `P_m(T_h, R^2)`. The function receives
/// the element id so that piecewise data (per-subdomain forcing) can be
/// projected without crossing interfaces.
pub fn l2_project_vector(
    f: impl Fn(usize, Point) -> [f64; 2],
    degree: usize,
    mesh: Arc<Mesh>,
    exactness: usize,
) -> Result<PiecewiseVectorField> {
    let rule = triangle_rule(exactness)?;
    let mut field = PiecewiseVectorField::zeros(mesh.clone(), degree);
    let n = field.basis.dim();
    let mut v = vec![0.0; n];
    let basis = field.basis.clone();
    for e in 0..mesh.num_elements() {
        let g = *mesh.geometry(e);
        let block = field.element_coeffs_mut(e);
        for (xi, w) in rule.iter() {
            basis.eval(xi, &mut v);
            let fx = f(e, g.to_physical(xi));
            for i in 0..n {
                block[i] += w * fx[0] * v[i];
                block[n + i] += w * fx[1] * v[i];
            }
        }
    }
    Ok(field)
}

/// Default edge rule for bilinear face integrals of a degree-`k` space.
pub fn bilinear_edge_rule(k: usize) -> QuadratureRule {
    edge_rule(2 * k + 2).expect("degree in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundarySpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize, k: usize) -> StressSpace {
        let mesh = Mesh::crisscross_grid(n)
            .unwrap()
            .classify_boundary(&BoundarySpec::left_top_dirichlet())
            .unwrap();
        StressSpace::new(Arc::new(mesh), k).unwrap()
    }

    #[test]
    fn dof_counts_follow_table_layout() {
        for (n, k, dofs) in [(2, 1, 72), (4, 1, 288), (2, 2, 144), (64, 1, 73728)] {
            let mesh = Arc::new(Mesh::diagonal_grid(n).unwrap());
            assert_eq!(StressSpace::new(mesh, k).unwrap().num_dofs(), dofs);
        }
        let s = space(2, 1);
        assert_eq!(s.num_dofs(), 144);
        let ranges: Vec<_> = (0..s.mesh().num_elements()).map(|e| s.element_range(e)).collect();
        assert_eq!(ranges[0].start, 0);
        assert_eq!(ranges.last().unwrap().end, s.num_dofs());
        assert!(ranges.windows(2).all(|w| w[0].end == w[1].start));
    }

    #[test]
    fn constant_vector_is_reproduced() {
        let mesh = Arc::new(Mesh::crisscross_grid(3).unwrap());
        for m in 0..=3 {
            let p = l2_project_vector(|_, _| [1.0, 2.0], m, mesh.clone(), 2 * m + 2).unwrap();
            for e in [0, 7, 20] {
                let c = mesh.geometry(e).centroid();
                let v = p.evaluate(e, [c[0] + 0.01, c[1] - 0.02]);
                assert!((v[0] - 1.0).abs() < 1e-13 && (v[1] - 2.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn projection_residual_is_orthogonal() {
        let mesh = Arc::new(Mesh::diagonal_grid(3).unwrap());
        let f = |_: usize, x: Point| [x[0] * x[0], 0.0];
        let p = l2_project_vector(f, 1, mesh.clone(), 6).unwrap();
        let rule = triangle_rule(8).unwrap();
        let basis = ScalarBasis::build(1);
        let mut v = vec![0.0; 3];
        for e in 0..mesh.num_elements() {
            let g = mesh.geometry(e);
            let mut res = [0.0f64; 3];
            for (xi, w) in rule.iter() {
                let x = g.to_physical(xi);
                basis.eval(xi, &mut v);
                let r = f(e, x)[0] - p.evaluate(e, x)[0];
                for i in 0..3 {
                    res[i] += w * g.det * r * v[i];
                }
            }
            assert!(res.iter().all(|r| r.abs() < 1e-12), "{res:?}");
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let mesh = Arc::new(Mesh::crisscross_grid(2).unwrap());
        let p = l2_project_vector(|_, x| [x[0].sin(), (x[0] * x[1]).exp()], 2, mesh.clone(), 10).unwrap();
        let q = l2_project_vector(|e, x| p.evaluate(e, x), 2, mesh, 6).unwrap();
        let err = p
            .coeffs()
            .iter()
            .zip(q.coeffs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-13);
    }

    #[test]
    fn constant_tensor_has_no_interior_jumps() {
        let s = space(3, 2);
        let field = StressField::constant(s.clone(), [1.5, -0.25, 3.0]);
        let rule = bilinear_edge_rule(2);
        for (f, face) in s.mesh().faces().iter().enumerate() {
            if face.kind != FaceKind::Interior {
                continue;
            }
            for (x, _) in face_quadrature(s.mesh(), f, &rule) {
                let j = field.face_jump(f, x).unwrap();
                assert!(j[0].abs() < 1e-13 && j[1].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn dirichlet_faces_are_rejected() {
        let s = space(2, 1);
        let field = StressField::zeros(s.clone());
        let f = s
            .mesh()
            .faces()
            .iter()
            .position(|f| f.kind == FaceKind::Dirichlet)
            .unwrap();
        assert!(field.face_jump(f, [0.0, 0.5]).is_err());
        assert!(field.face_average_kdiv(f, [0.0, 0.5]).is_err());
    }

    #[test]
    fn single_element_field_jump_is_one_sided() {
        let s = space(2, 1);
        let mut field = StressField::zeros(s.clone());
        let e = 5;
        let range = s.element_range(e);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for c in &mut field.coeffs_mut()[range] {
            *c = rng.gen_range(-1.0..1.0);
        }
        for f in s.mesh().element_faces(e) {
            let face = s.mesh().face(f);
            if face.kind != FaceKind::Interior {
                continue;
            }
            let rule = bilinear_edge_rule(1);
            for (x, _) in face_quadrature(s.mesh(), f, &rule) {
                let (t, _) = field.evaluate(e, x);
                let sign = if face.elements.0 == e { 1.0 } else { -1.0 };
                let n = [sign * face.normal[0], sign * face.normal[1]];
                let expected = tensor::apply(t, n);
                let j = field.face_jump(f, x).unwrap();
                assert!((j[0] - expected[0]).abs() < 1e-13);
                assert!((j[1] - expected[1]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn jump_is_orientation_independent() {
        // tau_K n_K + tau_K' n_K' is symmetric in (K, K'): recompute it with
        // the roles of the two neighbors swapped.
        let s = space(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coeffs: Vec<f64> = (0..s.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let field = StressField::new(s.clone(), coeffs).unwrap();
        let rule = bilinear_edge_rule(2);
        for (f, face) in s.mesh().faces().iter().enumerate() {
            let (a, Some(b)) = face.elements else { continue };
            for (x, _) in face_quadrature(s.mesh(), f, &rule) {
                let n = face.normal;
                let m = [-n[0], -n[1]];
                let (ta, _) = field.evaluate(a, x);
                let (tb, _) = field.evaluate(b, x);
                let swapped = {
                    let jb = tensor::apply(tb, m);
                    let ja = tensor::apply(ta, n);
                    [jb[0] + ja[0], jb[1] + ja[1]]
                };
                let j = field.face_jump(f, x).unwrap();
                assert!((j[0] - swapped[0]).abs() < 1e-13 && (j[1] - swapped[1]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn traces_are_linear() {
        let s = space(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..s.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..s.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (alpha, beta) = (0.7, -1.3);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
        let fa = StressField::new(s.clone(), a).unwrap();
        let fb = StressField::new(s.clone(), b).unwrap();
        let fs = StressField::new(s.clone(), sum).unwrap();
        let rule = bilinear_edge_rule(2);
        for f in s.mesh().skeleton_faces() {
            for (x, _) in face_quadrature(s.mesh(), f, &rule) {
                for op in [StressField::face_jump, StressField::face_average_kdiv] {
                    let (ja, jb, js) = (op(&fa, f, x).unwrap(), op(&fb, f, x).unwrap(), op(&fs, f, x).unwrap());
                    for r in 0..2 {
                        assert!((alpha * ja[r] + beta * jb[r] - js[r]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn trace_integral_and_norm_of_identity() {
        let s = space(2, 1);
        let field = StressField::constant(s, [1.0, 0.0, 1.0]);
        assert!((field.trace_integral() - 2.0).abs() < 1e-13);
        assert!((field.l2_norm() - 2f64.sqrt()).abs() < 1e-13);
    }
}
