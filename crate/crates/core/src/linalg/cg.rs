//! Preconditioned conjugate gradients.

use nalgebra::DMatrix;

use super::sparse::{BlockSparse, CsrMatrix};
use crate::error::{Error, Result};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for BlockSparse {
    fn dim(&self) -> usize {
        BlockSparse::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        BlockSparse::apply(self, x, y)
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        CsrMatrix::apply(self, x, y)
    }
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        Self {
            inv_diag: diag.iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect(),
        }
    }

    pub fn from_blocks(a: &BlockSparse) -> Self {
        let bs = a.block_size();
        let t = a.rank_one();
        let diag: Vec<f64> = (0..a.dim())
            .map(|i| {
                let (r, l) = (i / bs, i % bs);
                a.block(r, r).unwrap()[l * bs + l] + t.map_or(0.0, |t| t[i] * t[i])
            })
            .collect();
        Self::new(&diag)
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * d;
        }
    }
}

/// Inverts the diagonal blocks of a [`BlockSparse`] operator, including
/// the block-diagonal part of its rank-one term.
pub struct BlockJacobi {
    block_size: usize,
    inverses: Vec<f64>,
}

impl BlockJacobi {
    pub fn new(a: &BlockSparse) -> Result<Self> {
        let bs = a.block_size();
        let mut inverses = Vec::with_capacity(a.num_block_rows() * bs * bs);
        for r in 0..a.num_block_rows() {
            let blk = a.block(r, r).unwrap();
            let mut m = DMatrix::from_row_slice(bs, bs, blk);
            if let Some(t) = a.rank_one() {
                let tr = &t[r * bs..(r + 1) * bs];
                for i in 0..bs {
                    for j in 0..bs {
                        m[(i, j)] += tr[i] * tr[j];
                    }
                }
            }
            let inv = match m.clone().cholesky() {
                Some(c) => c.inverse(),
                None => m
                    .try_inverse()
                    .ok_or_else(|| Error::Singular(format!("diagonal block {r}")))?,
            };
            for i in 0..bs {
                for j in 0..bs {
                    inverses.push(inv[(i, j)]);
                }
            }
        }
        Ok(Self {
            block_size: bs,
            inverses,
        })
    }
}

impl Preconditioner for BlockJacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let bs = self.block_size;
        let bs2 = bs * bs;
        for (b, (zb, rb)) in z.chunks_mut(bs).zip(r.chunks(bs)).enumerate() {
            let inv = &self.inverses[b * bs2..(b + 1) * bs2];
            for (i, zi) in zb.iter_mut().enumerate() {
                *zi = inv[i * bs..(i + 1) * bs].iter().zip(rb).map(|(a, x)| a * x).sum();
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreconditionerKind {
    None,
    Jacobi,
    #[default]
    BlockJacobi,
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Relative residual target `||b - A x|| / ||b||`.
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
            preconditioner: PreconditionerKind::BlockJacobi,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final true relative residual.
    pub residual: f64,
    /// `x^T A x / 2 - b^T x` after every iteration; non-increasing in exact
    /// arithmetic since it equals the squared A-norm error up to a constant.
    pub energy: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves a block-sparse system with the preconditioner named in `opts`.
pub fn cg_solve(a: &BlockSparse, b: &[f64], opts: &CgOptions) -> Result<CgOutcome> {
    match opts.preconditioner {
        PreconditionerKind::None => pcg(a, &Identity, b, None, opts.tol, opts.max_iter),
        PreconditionerKind::Jacobi => pcg(a, &Jacobi::from_blocks(a), b, None, opts.tol, opts.max_iter),
        PreconditionerKind::BlockJacobi => pcg(a, &BlockJacobi::new(a)?, b, None, opts.tol, opts.max_iter),
    }
}

/// Preconditioned CG. Convergence is declared on the recursively updated
/// residual and confirmed on the true residual; if the two disagree the
/// iteration restarts from the current iterate.
pub fn pcg(
    a: &dyn LinearOperator,
    m: &dyn Preconditioner,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    let bnorm = dot(b, b).sqrt();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            energy: Vec::new(),
        });
    }
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut energy = Vec::new();
    let mut iterations = 0;

    let true_residual = |x: &[f64], r: &mut [f64]| {
        a.apply(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
    };

    for _restart in 0..5 {
        true_residual(&x, &mut r);
        let mut rnorm = dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            return Ok(CgOutcome {
                x,
                iterations,
                residual: rnorm / bnorm,
                energy,
            });
        }
        m.apply(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            a.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if pq <= 0.0 {
                return Err(Error::Singular(format!(
                    "operator not positive definite (p^T A p = {pq:.3e})"
                )));
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            iterations += 1;
            energy.push(-0.5 * (dot(&x, b) + dot(&x, &r)));
            rnorm = dot(&r, &r).sqrt();
            if rnorm <= tol * bnorm {
                break;
            }
            m.apply(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if iterations >= max_iter {
            break;
        }
    }
    true_residual(&x, &mut r);
    let residual = dot(&r, &r).sqrt() / bnorm;
    if residual <= tol {
        Ok(CgOutcome {
            x,
            iterations,
            residual,
            energy,
        })
    } else {
        Err(Error::NotConverged {
            iterations,
            residual,
        })
    }
}
