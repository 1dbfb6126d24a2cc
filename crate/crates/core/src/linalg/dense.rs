//! Dense helpers used as desk-scale oracles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (a + a.transpose());
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Direct solve by Cholesky, falling back to LU for indefinite matrices.
pub fn solve(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let rhs = DVector::from_column_slice(b);
    if let Some(c) = a.clone().cholesky() {
        return Ok(c.solve(&rhs).as_slice().to_vec());
    }
    a.clone()
        .lu()
        .solve(&rhs)
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::Singular("dense matrix".into()))
}

/// Solves `(A + t t^T) x = b` where `A` is symmetric positive semidefinite
/// with the one-dimensional kernel `span{z}` and `t . z != 0`.
///
/// Testing with `z` gives `(t . x)(t . z) = z . b`, which fixes the scalar
/// `t . x`; what remains is the consistent singular system
/// `A y = b - (t . x) t`, solved on the complement of `z` by pinning the
/// component along `z` through the positive definite matrix `A + z z^T`.
pub fn solve_rank_one_deflated(a: &DMatrix<f64>, t: &[f64], z: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    let tz = dot(t, z);
    if tz.abs() < f64::EPSILON {
        return Err(Error::Singular("rank-one vector orthogonal to the kernel".into()));
    }
    let s = dot(z, b) / tz;
    let zz = dot(z, z);
    let mut pinned = a.clone();
    for i in 0..n {
        for j in 0..n {
            pinned[(i, j)] += z[i] * z[j] / zz;
        }
    }
    let rhs: Vec<f64> = b.iter().zip(t).map(|(bi, ti)| bi - s * ti).collect();
    // y solves A y = rhs with z . y = 0
    let y = solve(&pinned, &rhs)?;
    // x = y + c z with t . x = s
    let c = (s - dot(t, &y)) / tz;
    Ok(y.iter().zip(z).map(|(yi, zi)| yi + c * zi).collect())
}
