//! Orthonormal scalar polynomial basis on the reference triangle.
//!
//! Built by Cholesky-orthonormalizing the graded monomials `xi^a eta^b`.
//! The coefficient matrix is lower triangular, so the first `dim(P_m)`
//! functions of a degree-`k` basis span `P_m` for every `m <= k`.

use nalgebra::DMatrix;

use super::quadrature::triangle_rule;
use crate::error::{Error, Result};

pub const MIN_DEGREE: usize = 1;
pub const MAX_DEGREE: usize = 4;

/// Number of polynomials of total degree at most `k` in two variables.
pub const fn dim_p(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

#[derive(Debug, Clone)]
pub struct ScalarBasis {
    degree: usize,
    exponents: Vec<(i32, i32)>,
    /// Row-major lower-triangular map from monomials to basis functions.
    coeffs: Vec<f64>,
}

impl ScalarBasis {
    /// Basis of `P_k` for `k` in `1..=4`.
    pub fn new(degree: usize) -> Result<Self> {
        if !(MIN_DEGREE..=MAX_DEGREE).contains(&degree) {
            return Err(Error::Degree {
                degree,
                min: MIN_DEGREE,
                max: MAX_DEGREE,
            });
        }
        Ok(Self::build(degree))
    }

    /// Unchecked constructor used internally for auxiliary spaces (degree 0..=5).
    pub(crate) fn build(degree: usize) -> Self {
        let exponents: Vec<(i32, i32)> = (0..=degree as i32)
            .flat_map(|d| (0..=d).rev().map(move |a| (a, d - a)))
            .collect();
        let n = exponents.len();
        let rule = triangle_rule(2 * degree).expect("degree within quadrature range");
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for (p, w) in rule.iter() {
            let m: Vec<f64> = exponents
                .iter()
                .map(|&(a, b)| p[0].powi(a) * p[1].powi(b))
                .collect();
            for i in 0..n {
                for j in 0..=i {
                    gram[(i, j)] += w * m[i] * m[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                gram[(j, i)] = gram[(i, j)];
            }
        }
        // Two passes of Cholesky orthonormalization; the second removes the
        // roundoff left by the ill-conditioned monomial Gram matrix.
        let l1 = inverse_cholesky(&gram);
        let mut gram2 = DMatrix::<f64>::zeros(n, n);
        for (p, w) in rule.iter() {
            let m: Vec<f64> = exponents
                .iter()
                .map(|&(a, b)| p[0].powi(a) * p[1].powi(b))
                .collect();
            let v: Vec<f64> = (0..n).map(|i| (0..=i).map(|j| l1[(i, j)] * m[j]).sum()).collect();
            for i in 0..n {
                for j in 0..n {
                    gram2[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        let l_inv = inverse_cholesky(&gram2) * l1;
        let mut coeffs = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                coeffs[i * n + j] = l_inv[(i, j)];
            }
        }
        Self {
            degree,
            exponents,
            coeffs,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// Values of all basis functions at a reference point.
    pub fn eval(&self, xi: [f64; 2], values: &mut [f64]) {
        let n = self.dim();
        let mut mono = [0.0f64; 28];
        for (m, &(a, b)) in mono.iter_mut().zip(&self.exponents) {
            *m = xi[0].powi(a) * xi[1].powi(b);
        }
        for i in 0..n {
            let row = &self.coeffs[i * n..i * n + i + 1];
            values[i] = row.iter().zip(&mono).map(|(c, m)| c * m).sum();
        }
    }

    /// Values and reference gradients of all basis functions.
    pub fn eval_with_grad(&self, xi: [f64; 2], values: &mut [f64], grads: &mut [[f64; 2]]) {
        let n = self.dim();
        let mut mono = [0.0f64; 28];
        let mut dx = [0.0f64; 28];
        let mut dy = [0.0f64; 28];
        for (j, &(a, b)) in self.exponents.iter().enumerate() {
            let xa = xi[0].powi(a);
            let yb = xi[1].powi(b);
            mono[j] = xa * yb;
            dx[j] = if a > 0 { a as f64 * xi[0].powi(a - 1) * yb } else { 0.0 };
            dy[j] = if b > 0 { b as f64 * xa * xi[1].powi(b - 1) } else { 0.0 };
        }
        for i in 0..n {
            let row = &self.coeffs[i * n..i * n + i + 1];
            let mut v = 0.0;
            let mut gx = 0.0;
            let mut gy = 0.0;
            for (j, c) in row.iter().enumerate() {
                v += c * mono[j];
                gx += c * dx[j];
                gy += c * dy[j];
            }
            values[i] = v;
            grads[i] = [gx, gy];
        }
    }
}

/// `L^{-1}` for the Cholesky factor `L` of an SPD matrix.
fn inverse_cholesky(gram: &DMatrix<f64>) -> DMatrix<f64> {
    let n = gram.nrows();
    let chol = gram.clone().cholesky().expect("Gram matrix is SPD");
    chol.l()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("non-singular Cholesky factor")
}
