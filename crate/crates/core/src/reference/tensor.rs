//! Symmetric 2x2 tensor-valued basis built from a scalar basis.
//!
//! Local function `c * n + i` is `phi_i * E_c`, where `E_xx`, `E_xy`, `E_yy`
//! are the unit symmetric tensors below and `n` the scalar dimension.

use super::scalar::ScalarBasis;
use crate::error::Result;

/// Symmetric tensor stored as `[xx, xy, yy]`.
pub type Sym = [f64; 3];

/// The three symmetric unit tensors as full 2x2 matrices (`E[c][row][col]`).
pub const UNIT_TENSORS: [[[f64; 2]; 2]; 3] = [
    [[1.0, 0.0], [0.0, 0.0]],
    [[0.0, 1.0], [1.0, 0.0]],
    [[0.0, 0.0], [0.0, 1.0]],
];

pub const UNIT_TRACE: [f64; 3] = [1.0, 0.0, 1.0];

pub fn trace(t: Sym) -> f64 {
    t[0] + t[2]
}

/// `t - tr(t)/2 I`.
pub fn deviatoric(t: Sym) -> Sym {
    let half_tr = 0.5 * trace(t);
    [t[0] - half_tr, t[1], t[2] - half_tr]
}

/// Frobenius product `s : t`.
pub fn frobenius(s: Sym, t: Sym) -> f64 {
    s[0] * t[0] + 2.0 * s[1] * t[1] + s[2] * t[2]
}

/// `t n`.
pub fn apply(t: Sym, n: [f64; 2]) -> [f64; 2] {
    [t[0] * n[0] + t[1] * n[1], t[1] * n[0] + t[2] * n[1]]
}

/// Row-wise divergence of `phi * E_c` given the physical gradient of `phi`.
pub fn unit_divergence(component: usize, grad: [f64; 2]) -> [f64; 2] {
    let e = &UNIT_TENSORS[component];
    [
        e[0][0] * grad[0] + e[0][1] * grad[1],
        e[1][0] * grad[0] + e[1][1] * grad[1],
    ]
}

/// `E_c n` for a unit tensor.
pub fn unit_apply(component: usize, n: [f64; 2]) -> [f64; 2] {
    let e = &UNIT_TENSORS[component];
    [e[0][0] * n[0] + e[0][1] * n[1], e[1][0] * n[0] + e[1][1] * n[1]]
}

#[derive(Debug, Clone)]
pub struct SymTensorBasis {
    scalar: ScalarBasis,
}

impl SymTensorBasis {
    pub fn new(degree: usize) -> Result<Self> {
        Ok(Self {
            scalar: ScalarBasis::new(degree)?,
        })
    }

    pub fn scalar(&self) -> &ScalarBasis {
        &self.scalar
    }

    pub fn degree(&self) -> usize {
        self.scalar.degree()
    }

    pub fn dim(&self) -> usize {
        3 * self.scalar.dim()
    }

    /// Splits a local index into `(component, scalar index)`.
    pub fn split(&self, local: usize) -> (usize, usize) {
        let n = self.scalar.dim();
        (local / n, local % n)
    }

    /// Tensor value of local function `local` given scalar values.
    pub fn value(&self, local: usize, scalar_values: &[f64]) -> Sym {
        let (c, i) = self.split(local);
        let mut t = [0.0; 3];
        t[c] = scalar_values[i];
        t
    }

    /// Divergence of local function `local` given physical scalar gradients.
    pub fn divergence(&self, local: usize, grads: &[[f64; 2]]) -> [f64; 2] {
        let (c, i) = self.split(local);
        unit_divergence(c, grads[i])
    }

    /// Evaluates a coefficient combination at a point (reference coordinates
    /// for values, caller-supplied physical gradients for the divergence).
    pub fn combine(&self, coeffs: &[f64], values: &[f64], grads: &[[f64; 2]]) -> (Sym, [f64; 2]) {
        let n = self.scalar.dim();
        let mut t = [0.0; 3];
        let mut div = [0.0; 2];
        for c in 0..3 {
            let block = &coeffs[c * n..(c + 1) * n];
            let mut g = [0.0; 2];
            for i in 0..n {
                t[c] += block[i] * values[i];
                g[0] += block[i] * grads[i][0];
                g[1] += block[i] * grads[i][1];
            }
            let d = unit_divergence(c, g);
            div[0] += d[0];
            div[1] += d[1];
        }
        (t, div)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dimension_k1() {
        assert_eq!(SymTensorBasis::new(1).unwrap().dim(), 9);
        assert_eq!(SymTensorBasis::new(3).unwrap().dim(), 30);
    }

    #[test]
    fn identity_is_in_span_and_has_no_deviator() {
        // phi_0 is the constant sqrt(2) on the reference triangle.
        let b = SymTensorBasis::new(2).unwrap();
        let n = b.scalar().dim();
        let mut coeffs = vec![0.0; b.dim()];
        let c0 = 1.0 / 2f64.sqrt();
        coeffs[0] = c0;
        coeffs[2 * n] = c0;
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        for p in [[0.2, 0.3], [0.7, 0.1], [0.0, 1.0]] {
            b.scalar().eval_with_grad(p, &mut v, &mut g);
            let (t, div) = b.combine(&coeffs, &v, &g);
            assert!((t[0] - 1.0).abs() < 1e-13 && t[1].abs() < 1e-13 && (t[2] - 1.0).abs() < 1e-13);
            assert!(div[0].abs() < 1e-12 && div[1].abs() < 1e-12);
            let d = deviatoric(t);
            assert!(d.iter().all(|x| x.abs() < 1e-13));
        }
    }

    #[test]
    fn divergence_matches_finite_differences() {
        let b = SymTensorBasis::new(3).unwrap();
        let n = b.scalar().dim();
        let (mut v, mut vp, mut vm) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut g = vec![[0.0; 2]; n];
        let h = 1e-6;
        for p in [[0.21, 0.33], [0.6, 0.15], [0.1, 0.8], [0.4, 0.4]] {
            b.scalar().eval_with_grad(p, &mut v, &mut g);
            for l in 0..b.dim() {
                let div = b.divergence(l, &g);
                // d/dx of column 0 plus d/dy of column 1, row by row
                let mut fd = [0.0; 2];
                for dir in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[dir] += h;
                    pm[dir] -= h;
                    b.scalar().eval(pp, &mut vp);
                    b.scalar().eval(pm, &mut vm);
                    let tp = b.value(l, &vp);
                    let tm = b.value(l, &vm);
                    // row 0 entries: (xx, xy); row 1 entries: (xy, yy)
                    let row0 = [(tp[0] - tm[0]) / (2.0 * h), (tp[1] - tm[1]) / (2.0 * h)];
                    let row1 = [(tp[1] - tm[1]) / (2.0 * h), (tp[2] - tm[2]) / (2.0 * h)];
                    fd[0] += row0[dir];
                    fd[1] += row1[dir];
                }
                for r in 0..2 {
                    let scale = div[r].abs().max(1.0);
                    assert!((fd[r] - div[r]).abs() / scale < 1e-6);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn norm_splits_into_deviator_and_trace(t in proptest::array::uniform3(-10.0f64..10.0)) {
            let d = deviatoric(t);
            let lhs = frobenius(t, t);
            let rhs = frobenius(d, d) + 0.5 * trace(t).powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
            prop_assert!(trace(d).abs() < 1e-12 * lhs.sqrt().max(1.0));
        }
    }
}
