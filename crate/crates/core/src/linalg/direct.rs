//! Sparse Cholesky solves of block-sparse operators.
//!
//! For `A + t t^T` with `A` positive semi-definite and one-dimensional
//! kernel spanned by `z` (the pure-Dirichlet case), the rank-one term is
//! never formed: with `s = z.b / z.t`, the compatible singular system
//! `A y = b - s t` is solved with one pinned unknown (where `|z_j|` is
//! largest) and the kernel component is then fixed by `t.x = s`.

use faer::prelude::*;
use faer::sparse::SparseColMat;
use faer::Side;

use super::sparse::BlockSparse;
use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cholesky factorization of the sparse part of `a`, optionally with one
/// unknown pinned to zero.
fn factor(a: &BlockSparse, pinned: Option<usize>) -> Result<faer::sparse::linalg::solvers::Cholesky<usize, f64>> {
    let bs = a.block_size();
    let n = a.dim();
    let mut triplets = Vec::with_capacity(a.nnz() / 2 + n);
    for r in 0..a.num_block_rows() {
        for &c in a.row_blocks(r) {
            if c > r {
                continue;
            }
            let blk = a.block(r, c).expect("pattern entry");
            for i in 0..bs {
                let gi = r * bs + i;
                for j in 0..bs {
                    let gj = c * bs + j;
                    if gj > gi || pinned == Some(gi) || pinned == Some(gj) {
                        continue;
                    }
                    let v = blk[i * bs + j];
                    if v != 0.0 {
                        triplets.push((gi, gj, v));
                    }
                }
            }
        }
    }
    if let Some(p) = pinned {
        triplets.push((p, p, 1.0));
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Singular(format!("sparse matrix construction failed: {e:?}")))?;
    mat.as_ref()
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Singular(format!("sparse Cholesky failed: {e:?}")))
}

/// Solves `(A + t t^T) x = b`, where `t` is the rank-one vector stored in
/// `a` (if any). `kernel` must span the null space of the sparse part when
/// a rank-one term is present.
pub fn direct_solve(a: &BlockSparse, b: &[f64], kernel: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Config(format!("right-hand side has length {} instead of {n}", b.len())));
    }
    let solve_with = |pinned: Option<usize>, rhs: &[f64]| -> Result<Vec<f64>> {
        let chol = factor(a, pinned)?;
        let mut x = Col::<f64>::from_fn(n, |i| if Some(i) == pinned { 0.0 } else { rhs[i] });
        chol.solve_in_place(x.as_mut());
        let x: Vec<f64> = (0..n).map(|i| x[i]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("direct solve produced non-finite values".into()));
        }
        Ok(x)
    };
    match (a.rank_one(), kernel) {
        (None, _) => solve_with(None, b),
        (Some(_), None) => Err(Error::Config(
            "a rank-one augmented operator needs its kernel vector for a direct solve".into(),
        )),
        (Some(t), Some(z)) => {
            let zt = dot(z, t);
            if zt.abs() < 1e-14 * dot(z, z).sqrt() * dot(t, t).sqrt() {
                return Err(Error::Singular("rank-one vector is orthogonal to the kernel".into()));
            }
            let s = dot(z, b) / zt;
            let rhs: Vec<f64> = b.iter().zip(t).map(|(bi, ti)| bi - s * ti).collect();
            let pin = (0..n)
                .max_by(|&i, &j| z[i].abs().total_cmp(&z[j].abs()))
                .expect("nonempty system");
            let mut y = solve_with(Some(pin), &rhs)?;
            let alpha = (s - dot(t, &y)) / zt;
            for (yi, zi) in y.iter_mut().zip(z) {
                *yi += alpha * zi;
            }
            Ok(y)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    /// 1D Neumann Laplacian: singular with constant kernel.
    fn neumann_laplacian(n: usize) -> BlockSparse {
        let pattern: Vec<Vec<usize>> = (0..n)
            .map(|i| [i.checked_sub(1), (i + 1 < n).then_some(i + 1)].into_iter().flatten().collect())
            .collect();
        let mut a = BlockSparse::with_pattern(1, &pattern);
        for i in 0..n {
            let deg = pattern[i].len() as f64;
            a.block_mut(i, i)[0] = deg;
            for &j in &pattern[i] {
                a.block_mut(i, j)[0] = -1.0;
            }
        }
        a
    }

    #[test]
    fn matches_dense_solve_for_spd_matrix() {
        let mut a = neumann_laplacian(12);
        a.block_mut(0, 0)[0] += 1.0;
        let b: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = direct_solve(&a, &b, None).unwrap();
        let xd = a.to_dense().cholesky().unwrap().solve(&DVector::from_vec(b));
        for i in 0..12 {
            assert!((x[i] - xd[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_augmentation_matches_densified_operator() {
        let mut a = neumann_laplacian(15);
        let t: Vec<f64> = (0..15).map(|i| 0.2 + 0.05 * i as f64).collect();
        a.set_rank_one(Some(t));
        let b: Vec<f64> = (0..15).map(|i| (i as f64).cos()).collect();
        let x = direct_solve(&a, &b, Some(&vec![1.0; 15])).unwrap();
        let xd = a.to_dense().cholesky().unwrap().solve(&DVector::from_vec(b));
        for i in 0..15 {
            assert!((x[i] - xd[i]).abs() < 1e-10, "{} vs {}", x[i], xd[i]);
        }
        assert!(direct_solve(&a, &[0.0; 15], None).is_err());
    }
}
