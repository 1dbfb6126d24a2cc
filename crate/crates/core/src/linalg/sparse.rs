//! Sparse storage: a block-row matrix for DG operators (dense square
//! blocks on an element adjacency pattern) and a plain CSR matrix for the
//! H(div) post-processing system.

use nalgebra::DMatrix;
use rayon::prelude::*;

/// Square-block sparse matrix with an optional rank-one term:
/// the represented operator is `x -> A x + (t . x) t`.
#[derive(Debug, Clone)]
pub struct BlockSparse {
    block_size: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    rank_one: Option<Vec<f64>>,
}

impl BlockSparse {
    /// Zero matrix with the given block pattern. Each pattern row is
    /// sorted; the diagonal block is always present.
    pub fn with_pattern(block_size: usize, pattern: &[Vec<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(pattern.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for (r, cols) in pattern.iter().enumerate() {
            let mut cols = cols.clone();
            cols.push(r);
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len() * block_size * block_size];
        Self {
            block_size,
            row_ptr,
            col_idx,
            values,
            rank_one: None,
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_block_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.num_block_rows() * self.block_size
    }

    pub fn rank_one(&self) -> Option<&[f64]> {
        self.rank_one.as_deref()
    }

    pub fn set_rank_one(&mut self, t: Option<Vec<f64>>) {
        if let Some(t) = &t {
            assert_eq!(t.len(), self.dim());
        }
        self.rank_one = t;
    }

    /// Column block indices of a block row.
    pub fn row_blocks(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    fn slot(&self, r: usize, c: usize) -> Option<usize> {
        let cols = self.row_blocks(r);
        cols.binary_search(&c).ok().map(|i| self.row_ptr[r] + i)
    }

    /// Row-major dense block `(r, c)`; panics if it is not in the pattern.
    pub fn block_mut(&mut self, r: usize, c: usize) -> &mut [f64] {
        let s = self.slot(r, c).expect("block outside sparsity pattern");
        let bs2 = self.block_size * self.block_size;
        &mut self.values[s * bs2..(s + 1) * bs2]
    }

    pub fn block(&self, r: usize, c: usize) -> Option<&[f64]> {
        let bs2 = self.block_size * self.block_size;
        self.slot(r, c).map(|s| &self.values[s * bs2..(s + 1) * bs2])
    }

    /// `y = A x` without the rank-one term.
    pub fn apply_sparse(&self, x: &[f64], y: &mut [f64]) {
        let bs = self.block_size;
        let bs2 = bs * bs;
        y.par_chunks_mut(bs).enumerate().for_each(|(r, yr)| {
            yr.iter_mut().for_each(|v| *v = 0.0);
            for s in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[s];
                let blk = &self.values[s * bs2..(s + 1) * bs2];
                let xc = &x[c * bs..(c + 1) * bs];
                for (i, yi) in yr.iter_mut().enumerate() {
                    let row = &blk[i * bs..(i + 1) * bs];
                    *yi += row.iter().zip(xc).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        });
    }

    /// `y = A x + (t . x) t`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_sparse(x, y);
        if let Some(t) = &self.rank_one {
            let s: f64 = t.iter().zip(x).map(|(a, b)| a * b).sum();
            y.iter_mut().zip(t).for_each(|(yi, ti)| *yi += s * ti);
        }
    }

    /// Dense copy of the full operator including the rank-one term.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let bs = self.block_size;
        let n = self.dim();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for r in 0..self.num_block_rows() {
            for &c in self.row_blocks(r) {
                let blk = self.block(r, c).unwrap();
                for i in 0..bs {
                    for j in 0..bs {
                        m[(r * bs + i, c * bs + j)] += blk[i * bs + j];
                    }
                }
            }
        }
        if let Some(t) = &self.rank_one {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += t[i] * t[j];
                }
            }
        }
        m
    }

    /// `max |A - A^T| / max |A|` over the stored blocks.
    pub fn asymmetry(&self) -> f64 {
        let bs = self.block_size;
        let mut max_entry = 0.0f64;
        let mut max_diff = 0.0f64;
        for r in 0..self.num_block_rows() {
            for &c in self.row_blocks(r) {
                let a = self.block(r, c).unwrap();
                let b = self.block(c, r).expect("pattern must be symmetric");
                for i in 0..bs {
                    for j in 0..bs {
                        max_entry = max_entry.max(a[i * bs + j].abs());
                        max_diff = max_diff.max((a[i * bs + j] - b[j * bs + i]).abs());
                    }
                }
            }
        }
        if max_entry == 0.0 {
            0.0
        } else {
            max_diff / max_entry
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet out of range");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, yr)| {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            *yr = self.col_idx[a..b]
                .iter()
                .zip(&self.values[a..b])
                .map(|(&c, v)| v * x[c])
                .sum();
        });
    }

    /// `y = A^T x`.
    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.nrows {
            for s in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[s]] += self.values[s] * x[r];
            }
        }
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row_iter(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .find(|&s| self.col_idx[s] == r)
                    .map_or(0.0, |s| self.values[s])
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for s in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[s])] += self.values[s];
            }
        }
        m
    }
}
