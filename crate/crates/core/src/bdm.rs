//! Brezzi–Douglas–Marini space `BDM_m` on a triangle mesh.
//!
//! The local space is the full `P_m(K, R^2)`. Its degrees of freedom are
//!
//! * on every edge `F`: `|F|^-1 int_F (v . n_F) L_j(s) ds`, `j = 0..=m`, with
//!   `n_F` the global face normal and `L_j` the shifted Legendre polynomial
//!   in the global edge parameter (shared edges therefore share functionals,
//!   which gives continuity of the normal component);
//! * in every element: moments against `grad q`, `q` in `P_{m-1}` without
//!   constants, and against `(x - x_K)^perp r`, `r` in `P_{m-2}`.
//!
//! Nodal bases are obtained per element by inverting the generalized
//! Vandermonde matrix in physical coordinates, so no Piola map is involved.
//! Since `grad P_{m-1}` and the edge traces of `P_{m-1}` are covered by the
//! functionals, `div Pi v = Q^{m-1} div v` holds for the interpolant.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::reference::{dim_p, edge_rule, triangle_rule, QuadratureRule, ScalarBasis};

/// Shifted Legendre polynomials `L_0..=L_m` on `[0, 1]`.
fn shifted_legendre(m: usize, s: f64) -> Vec<f64> {
    let t = 2.0 * s - 1.0;
    let mut p = vec![1.0; m + 1];
    if m >= 1 {
        p[1] = t;
    }
    for j in 1..m {
        p[j + 1] = ((2 * j + 1) as f64 * t * p[j] - j as f64 * p[j - 1]) / (j + 1) as f64;
    }
    p
}

/// Exponent pairs `(a, b)` of the monomials of total degree `<= d`, graded.
fn monomials(d: usize) -> Vec<(i32, i32)> {
    (0..=d as i32)
        .flat_map(|t| (0..=t).map(move |b| (t - b, b)))
        .collect()
}

fn powi(x: f64, a: i32) -> f64 {
    if a <= 0 {
        1.0
    } else {
        x.powi(a)
    }
}

#[derive(Debug, Clone)]
pub struct BdmSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    scalar: Arc<ScalarBasis>,
    /// Per element: `C` with nodal function `d = sum_b C[b][d] psi_b`
    /// (row-major, `nl x nl`).
    nodal: Vec<Vec<f64>>,
    dofs: Vec<Vec<usize>>,
    num_dofs: usize,
    edge_quad: Arc<QuadratureRule>,
    tri_quad: Arc<QuadratureRule>,
}

/// Local nodal basis of one element.
pub struct BdmLocal<'a> {
    space: &'a BdmSpace,
    element: usize,
}

impl BdmSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::Degree {
                degree,
                min: 1,
                max: 3,
            });
        }
        let m = degree;
        let scalar = Arc::new(ScalarBasis::build(m));
        let edge_dofs = m + 1;
        let interior = Self::interior_count(m);
        let n_edge_total = mesh.num_faces() * edge_dofs;
        let dofs: Vec<Vec<usize>> = (0..mesh.num_elements())
            .map(|e| {
                let mut d = Vec::with_capacity(3 * edge_dofs + interior);
                for f in mesh.element_faces(e) {
                    d.extend((0..edge_dofs).map(|j| f * edge_dofs + j));
                }
                d.extend((0..interior).map(|i| n_edge_total + e * interior + i));
                d
            })
            .collect();
        // Vandermonde integrands have degree 2m; interpolated data is
        // general, so the rules are generous.
        let exact = (2 * m + 6).min(crate::reference::quadrature::MAX_EXACTNESS);
        let mut space = Self {
            edge_quad: Arc::new(edge_rule(exact)?),
            tri_quad: Arc::new(triangle_rule(exact)?),
            num_dofs: n_edge_total + mesh.num_elements() * interior,
            mesh,
            degree,
            scalar,
            nodal: Vec::new(),
            dofs,
        };
        let nodal: Result<Vec<Vec<f64>>> = (0..space.mesh.num_elements())
            .into_par_iter()
            .map(|e| space.nodal_matrix(e))
            .collect();
        space.nodal = nodal?;
        Ok(space)
    }

    fn interior_count(m: usize) -> usize {
        let grads = dim_p(m - 1) - 1;
        let curls = if m >= 2 { dim_p(m - 2) } else { 0 };
        grads + curls
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn local_dim(&self) -> usize {
        2 * self.scalar.dim()
    }

    pub fn local(&self, e: usize) -> BdmLocal<'_> {
        BdmLocal {
            space: self,
            element: e,
        }
    }

    /// Modal values `psi_b` and divergences at a physical point of `e`;
    /// `psi_{c n + i} = phi_i e_c`.
    fn modal(&self, e: usize, x: Point) -> (Vec<[f64; 2]>, Vec<f64>) {
        let n = self.scalar.dim();
        let g = self.mesh.geometry(e);
        let mut v = vec![0.0; n];
        let mut gr = vec![[0.0; 2]; n];
        self.scalar.eval_with_grad(g.to_reference(x), &mut v, &mut gr);
        let mut vals = vec![[0.0; 2]; 2 * n];
        let mut divs = vec![0.0; 2 * n];
        for i in 0..n {
            let pg = g.push_gradient(gr[i]);
            vals[i] = [v[i], 0.0];
            vals[n + i] = [0.0, v[i]];
            divs[i] = pg[0];
            divs[n + i] = pg[1];
        }
        (vals, divs)
    }

    /// Applies every degree of freedom of element `e` to a vector function.
    fn functionals(&self, e: usize, v: &dyn Fn(Point) -> [f64; 2], out: &mut [f64]) -> Result<()> {
        let m = self.degree;
        let mesh = &*self.mesh;
        let erule = &*self.edge_quad;
        let trule = &*self.tri_quad;
        let mut idx = 0;
        for f in mesh.element_faces(e) {
            let face = mesh.face(f);
            let a = mesh.vertices()[face.vertices[0]];
            let b = mesh.vertices()[face.vertices[1]];
            let start = idx;
            out[start..start + m + 1].iter_mut().for_each(|x| *x = 0.0);
            for (s, w) in erule.iter() {
                let s = s[0];
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let vn = {
                    let vx = v(x);
                    vx[0] * face.normal[0] + vx[1] * face.normal[1]
                };
                for (j, l) in shifted_legendre(m, s).into_iter().enumerate() {
                    out[start + j] += w * vn * l;
                }
            }
            idx += m + 1;
        }
        let g = mesh.geometry(e);
        let xc = g.centroid();
        let h = g.diameter;
        let interior = Self::interior_count(m);
        out[idx..idx + interior].iter_mut().for_each(|x| *x = 0.0);
        let grads: Vec<(i32, i32)> = monomials(m - 1).into_iter().skip(1).collect();
        let curls: Vec<(i32, i32)> = if m >= 2 { monomials(m - 2) } else { Vec::new() };
        for (xi, w) in trule.iter() {
            let x = g.to_physical(xi);
            let vx = v(x);
            let (sx, sy) = ((x[0] - xc[0]) / h, (x[1] - xc[1]) / h);
            // Mean over K (|K| = det / 2), so all functionals scale alike.
            let wq = 2.0 * w;
            let mut l = idx;
            for &(pa, pb) in &grads {
                // h * grad of (sx^pa sy^pb), in scaled coordinates.
                let gx = pa as f64 * powi(sx, pa - 1) * powi(sy, pb);
                let gy = pb as f64 * powi(sx, pa) * powi(sy, pb - 1);
                out[l] += wq * (vx[0] * gx + vx[1] * gy);
                l += 1;
            }
            for &(pa, pb) in &curls {
                let r = powi(sx, pa) * powi(sy, pb);
                out[l] += wq * r * (-sy * vx[0] + sx * vx[1]);
                l += 1;
            }
        }
        Ok(())
    }

    fn nodal_matrix(&self, e: usize) -> Result<Vec<f64>> {
        let nl = self.local_dim();
        let mut vander = DMatrix::<f64>::zeros(nl, nl);
        let mut col = vec![0.0; nl];
        for b in 0..nl {
            let psi = |x: Point| self.modal(e, x).0[b];
            self.functionals(e, &psi, &mut col)?;
            for d in 0..nl {
                vander[(d, b)] = col[d];
            }
        }
        let inv = vander
            .try_inverse()
            .ok_or_else(|| Error::Singular(format!("BDM Vandermonde matrix of element {e}")))?;
        // V C = I, so C = V^{-1}; stored row-major.
        Ok((0..nl).flat_map(|b| (0..nl).map(move |d| (b, d))).map(|(b, d)| inv[(b, d)]).collect())
    }

    /// Canonical interpolant of `v`.
    pub fn interpolate(&self, v: impl Fn(Point) -> [f64; 2]) -> Result<BdmField> {
        let mut coeffs = vec![0.0; self.num_dofs];
        let nl = self.local_dim();
        let mut local = vec![0.0; nl];
        for e in 0..self.mesh.num_elements() {
            self.functionals(e, &v, &mut local)?;
            for (d, &g) in self.dofs[e].iter().enumerate() {
                coeffs[g] = local[d];
            }
        }
        BdmField::new(self.clone(), coeffs)
    }
}

impl BdmLocal<'_> {
    pub fn len(&self) -> usize {
        self.space.local_dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Global indices of the local nodal functions.
    pub fn dofs(&self) -> &[usize] {
        &self.space.dofs[self.element]
    }

    /// Values and divergences of the nodal functions at a physical point.
    pub fn eval(&self, x: Point) -> (Vec<[f64; 2]>, Vec<f64>) {
        let nl = self.len();
        let (mv, md) = self.space.modal(self.element, x);
        let c = &self.space.nodal[self.element];
        let mut vals = vec![[0.0; 2]; nl];
        let mut divs = vec![0.0; nl];
        for b in 0..nl {
            let row = &c[b * nl..(b + 1) * nl];
            for d in 0..nl {
                vals[d][0] += row[d] * mv[b][0];
                vals[d][1] += row[d] * mv[b][1];
                divs[d] += row[d] * md[b];
            }
        }
        (vals, divs)
    }
}

#[derive(Debug, Clone)]
pub struct BdmField {
    space: BdmSpace,
    coeffs: Vec<f64>,
}

impl BdmField {
    pub fn new(space: BdmSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.num_dofs() {
            return Err(Error::Config(format!(
                "{} coefficients for a BDM space with {} dofs",
                coeffs.len(),
                space.num_dofs()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn space(&self) -> &BdmSpace {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Value and divergence at `x` in element `e`.
    pub fn evaluate(&self, e: usize, x: Point) -> ([f64; 2], f64) {
        let local = self.space.local(e);
        let (vals, divs) = local.eval(x);
        let mut v = [0.0; 2];
        let mut d = 0.0;
        for (i, &g) in local.dofs().iter().enumerate() {
            v[0] += self.coeffs[g] * vals[i][0];
            v[1] += self.coeffs[g] * vals[i][1];
            d += self.coeffs[g] * divs[i];
        }
        (v, d)
    }

    /// Coefficients of `div u` in the orthonormal basis of `P_{m-1}`,
    /// element-major. The divergence lies in that space, so these vanish
    /// exactly when the divergence is identically zero.
    pub fn divergence_coefficients(&self) -> Result<Vec<f64>> {
        let mesh = self.space.mesh();
        let m = self.space.degree();
        let basis = ScalarBasis::build(m - 1);
        let n = basis.dim();
        let rule = triangle_rule(2 * m)?;
        let mut out = vec![0.0; mesh.num_elements() * n];
        let mut q = vec![0.0; n];
        for e in 0..mesh.num_elements() {
            let g = mesh.geometry(e);
            for (xi, w) in rule.iter() {
                basis.eval(xi, &mut q);
                let (_, d) = self.evaluate(e, g.to_physical(xi));
                for i in 0..n {
                    out[e * n + i] += w * d * q[i];
                }
            }
        }
        Ok(out)
    }

    /// `u_K . n_F - u_K' . n_F` at a point of an interior face.
    pub fn normal_jump(&self, f: usize, x: Point) -> f64 {
        let face = self.space.mesh().face(f);
        let n = face.normal;
        let (a, _) = self.evaluate(face.elements.0, x);
        match face.elements.1 {
            Some(b) => {
                let (b, _) = self.evaluate(b, x);
                (a[0] - b[0]) * n[0] + (a[1] - b[1]) * n[1]
            }
            None => 0.0,
        }
    }
}
