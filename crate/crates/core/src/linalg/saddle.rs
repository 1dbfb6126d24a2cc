//! Saddle-point solver for `[M B^T; B 0] [u; l] = [f; 0]` by conjugate
//! gradients on the Schur complement `B M^{-1} B^T`, with inner CG solves
//! for the SPD block `M`.

use super::cg::{pcg, Jacobi, LinearOperator};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SaddleSystem {
    /// SPD primal block.
    pub mass: CsrMatrix,
    /// Constraint block, one row per multiplier.
    pub constraint: CsrMatrix,
    /// Right-hand side of the primal equation.
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub primal: Vec<f64>,
    pub multiplier: Vec<f64>,
    pub outer_iterations: usize,
}

struct Schur<'a> {
    sys: &'a SaddleSystem,
    mass_pc: Jacobi,
    inner_tol: f64,
}

impl Schur<'_> {
    fn solve_mass(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(pcg(&self.sys.mass, &self.mass_pc, rhs, None, self.inner_tol, 10_000)?.x)
    }
}

impl LinearOperator for Schur<'_> {
    fn dim(&self) -> usize {
        self.sys.constraint.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut bt = vec![0.0; self.sys.mass.nrows()];
        self.sys.constraint.apply_transpose(x, &mut bt);
        // An inner failure leaves NaNs that the outer iteration reports.
        match self.solve_mass(&bt) {
            Ok(w) => self.sys.constraint.apply(&w, y),
            Err(_) => y.iter_mut().for_each(|v| *v = f64::NAN),
        }
    }
}

pub fn saddle_solve(sys: &SaddleSystem, tol: f64) -> Result<SaddleSolution> {
    let n = sys.mass.nrows();
    let m = sys.constraint.nrows();
    if sys.rhs.len() != n || sys.constraint.ncols() != n {
        return Err(Error::Config("saddle system blocks have inconsistent sizes".into()));
    }
    let mass_diag = sys.mass.diagonal();
    let schur = Schur {
        sys,
        mass_pc: Jacobi::new(&mass_diag),
        inner_tol: (tol * 1e-2).max(1e-14),
    };

    // diag(B diag(M)^{-1} B^T) preconditions the outer iteration.
    let sdiag: Vec<f64> = (0..m)
        .map(|i| sys.constraint.row_iter(i).map(|(c, v)| v * v / mass_diag[c]).sum())
        .collect();
    let outer_pc = Jacobi::new(&sdiag);

    let f = &sys.rhs;
    let minv_f = schur.solve_mass(f)?;
    let mut g = vec![0.0; m];
    sys.constraint.apply(&minv_f, &mut g);
    let outer = pcg(&schur, &outer_pc, &g, None, tol, 10_000).map_err(|e| match e {
        Error::NotConverged { iterations, residual } => Error::Singular(format!(
            "Schur complement iteration broke down after {iterations} iterations (residual {residual:.3e})"
        )),
        other => other,
    })?;
    if outer.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("inner mass solve failed".into()));
    }
    let mut bt = vec![0.0; n];
    sys.constraint.apply_transpose(&outer.x, &mut bt);
    let rhs: Vec<f64> = f.iter().zip(&bt).map(|(a, b)| a - b).collect();
    let primal = schur.solve_mass(&rhs)?;
    Ok(SaddleSolution {
        primal,
        multiplier: outer.x,
        outer_iterations: outer.iterations,
    })
}

/// Solves the full indefinite system `[M B^T; B 0]` by sparse LU with
/// partial pivoting.
pub fn saddle_solve_direct(sys: &SaddleSystem) -> Result<SaddleSolution> {
    use faer::prelude::*;
    use faer::sparse::SparseColMat;

    let n = sys.mass.nrows();
    let m = sys.constraint.nrows();
    if sys.rhs.len() != n || sys.constraint.ncols() != n {
        return Err(Error::Config("saddle system blocks have inconsistent sizes".into()));
    }
    let mut triplets = Vec::new();
    for r in 0..n {
        triplets.extend(sys.mass.row_iter(r).map(|(c, v)| (r, c, v)));
    }
    for r in 0..m {
        for (c, v) in sys.constraint.row_iter(r) {
            triplets.push((n + r, c, v));
            triplets.push((c, n + r, v));
        }
    }
    let kkt = SparseColMat::<usize, f64>::try_new_from_triplets(n + m, n + m, &triplets)
        .map_err(|e| Error::Singular(format!("saddle matrix construction failed: {e:?}")))?;
    let lu = kkt
        .as_ref()
        .sp_lu()
        .map_err(|e| Error::Singular(format!("saddle LU factorization failed: {e:?}")))?;
    let mut x = Col::<f64>::from_fn(n + m, |i| if i < n { sys.rhs[i] } else { 0.0 });
    lu.solve_in_place(x.as_mut());
    let x: Vec<f64> = (0..n + m).map(|i| x[i]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("saddle system is singular".into()));
    }
    Ok(SaddleSolution {
        primal: x[..n].to_vec(),
        multiplier: x[n..].to_vec(),
        outer_iterations: 0,
    })
}
