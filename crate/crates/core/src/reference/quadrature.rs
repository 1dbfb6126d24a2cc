//! Quadrature on the reference triangle `{(0,0), (1,0), (0,1)}` and on the
//! reference edge `[0, 1]`.
//!
//! Triangle rules are collapsed (Duffy) products of a Gauss–Legendre rule in
//! the first direction and a Gauss–Jacobi(1, 0) rule in the collapsed
//! direction, so `n` points per direction integrate total degree `2n - 1`
//! exactly. Nodes and weights come from the Golub–Welsch eigenvalue problem.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const MAX_EXACTNESS: usize = 20;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Points on the reference cell. Edge rules use only the first coordinate.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss–Jacobi nodes and weights on `[-1, 1]` for the weight `(1-t)^alpha (1+t)^beta`.
fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let ab = alpha + beta;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        let diag = if i == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
        };
        jac[(i, i)] = diag;
        if i + 1 < n {
            let k = k + 1.0;
            let num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
            let den = (2.0 * k + ab).powi(2) * (2.0 * k + ab + 1.0) * (2.0 * k + ab - 1.0);
            let off = (num / den).sqrt();
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    // Total mass of the weight function; only the (0,0) and (1,0) cases are used.
    let mu0 = 2f64.powf(ab + 1.0) * gamma_int(alpha) * gamma_int(beta) / gamma_int(ab + 1.0);
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `Gamma(x + 1)` for small non-negative integers `x`.
fn gamma_int(x: f64) -> f64 {
    let n = x.round() as u32;
    (1..=n).map(f64::from).product()
}

/// Gauss–Legendre rule on `[0, 1]` exact to the given degree.
pub fn edge_rule(exactness: usize) -> Result<QuadratureRule> {
    if exactness > MAX_EXACTNESS {
        return Err(Error::Quadrature(exactness));
    }
    let n = exactness / 2 + 1;
    let (t, w) = gauss_jacobi(n, 0.0, 0.0);
    Ok(QuadratureRule {
        points: t.iter().map(|&t| [0.5 * (t + 1.0), 0.0]).collect(),
        weights: w.iter().map(|&w| 0.5 * w).collect(),
        exactness,
    })
}

/// Collapsed-product rule on the reference triangle exact to the given degree.
///
/// Degrees 0 and 1 use the single-point centroid rule.
pub fn triangle_rule(exactness: usize) -> Result<QuadratureRule> {
    if exactness > MAX_EXACTNESS {
        return Err(Error::Quadrature(exactness));
    }
    if exactness <= 1 {
        return Ok(QuadratureRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            exactness,
        });
    }
    let n = exactness / 2 + 1;
    let (s, ws) = gauss_jacobi(n, 0.0, 0.0);
    let (t, wt) = gauss_jacobi(n, 1.0, 0.0);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&tj, &wj) in t.iter().zip(&wt) {
        let eta = 0.5 * (1.0 + tj);
        for (&si, &wi) in s.iter().zip(&ws) {
            let u = 0.5 * (1.0 + si);
            points.push([u * (1.0 - eta), eta]);
            // du = ds/2, and (1 - eta) d(eta) = (1 - t)/2 * dt/2
            weights.push(0.5 * wi * 0.25 * wj);
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        exactness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^a y^b over the reference triangle: a! b! / (a + b + 2)!.
    fn monomial_integral(a: u32, b: u32) -> f64 {
        let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
        f(a) * f(b) / f(a + b + 2)
    }

    #[test]
    fn centroid_rule_for_degree_one() {
        let q = triangle_rule(1).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.weights[0], 0.5);
        assert!((q.points[0][0] - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn x2y_integral() {
        let q = triangle_rule(3).unwrap();
        let v: f64 = q.iter().map(|(p, w)| w * p[0] * p[0] * p[1]).sum();
        assert!((v - 1.0 / 60.0).abs() < 1e-15, "{v}");
    }

    #[test]
    fn edge_rule_degree_five() {
        let q = edge_rule(5).unwrap();
        let v: f64 = q.iter().map(|(p, w)| w * p[0].powi(5)).sum();
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn monomial_exactness_all_degrees() {
        for deg in 0..=MAX_EXACTNESS {
            let q = triangle_rule(deg).unwrap();
            let wsum: f64 = q.weights.iter().sum();
            assert!((wsum - 0.5).abs() < 1e-14);
            for a in 0..=deg as u32 {
                for b in 0..=(deg as u32 - a) {
                    let exact = monomial_integral(a, b);
                    let v: f64 = q
                        .iter()
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!(
                        ((v - exact) / exact).abs() < 1e-13,
                        "deg {deg}: x^{a} y^{b}: {v} vs {exact}"
                    );
                }
            }
            let e = edge_rule(deg).unwrap();
            for a in 0..=deg as i32 {
                let v: f64 = e.iter().map(|(p, w)| w * p[0].powi(a)).sum();
                let exact = 1.0 / (a as f64 + 1.0);
                assert!(((v - exact) / exact).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_high_degree() {
        assert!(triangle_rule(21).is_err());
        assert!(edge_rule(25).is_err());
    }
}
