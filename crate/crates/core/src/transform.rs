//! Log-space machinery: gradients under `y = log x` and the log-sum-exp /
//! affine forms that posynomials and monomials take after the transform.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{Monomial, Posynomial};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransformError {
    #[error("function value {0} is not strictly positive")]
    NonPositiveValue(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
}

/// `d log f(e^y) / d y_i = (x_i / f) * df/dx_i`.
pub fn logspace_gradient(f_val: f64, grad_x: &[f64], x: &[f64]) -> Result<Vec<f64>, TransformError> {
    if !(f_val > 0.0) {
        return Err(TransformError::NonPositiveValue(f_val));
    }
    if grad_x.len() != x.len() {
        return Err(TransformError::Dimension {
            expected: x.len(),
            found: grad_x.len(),
        });
    }
    Ok(grad_x.iter().zip(x).map(|(g, xi)| xi * g / f_val).collect())
}

/// Posynomial in log space: `log sum_j exp(P_j . y + q_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LseForm {
    /// K x n, one row of exponents per term.
    pub p: DMatrix<f64>,
    /// log of each term coefficient.
    pub q: DVector<f64>,
    /// Columns of `p` holding at least one non-zero.
    pub support: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct LseEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// Value, gradient and Hessian restricted to [`LseForm::support`].
#[derive(Debug, Clone)]
pub struct CompactLseEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `|support| x |support|`.
    pub hessian: Vec<f64>,
}

impl LseForm {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>) -> Self {
        let support = (0..p.ncols())
            .filter(|&c| p.column(c).iter().any(|v| *v != 0.0))
            .collect();
        Self { p, q, support }
    }

    pub fn n_terms(&self) -> usize {
        self.q.len()
    }

    pub fn dim(&self) -> usize {
        self.p.ncols()
    }

    /// Softmax weights of the terms together with the log-sum-exp value,
    /// using the max-shift so no exponential overflows.
    pub fn weights(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let mut z: Vec<f64> = (0..self.n_terms())
            .map(|j| {
                self.q[j]
                    + self
                        .support
                        .iter()
                        .map(|&i| self.p[(j, i)] * y[i])
                        .sum::<f64>()
            })
            .collect();
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for zj in z.iter_mut() {
            *zj = (*zj - zmax).exp();
            total += *zj;
        }
        for zj in z.iter_mut() {
            *zj /= total;
        }
        (zmax + total.ln(), z)
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.weights(y).0
    }

    pub fn eval_compact(&self, y: &[f64]) -> CompactLseEval {
        let (value, w) = self.weights(y);
        let s = self.support.len();
        let mut gradient = vec![0.0; s];
        for (a, &i) in self.support.iter().enumerate() {
            gradient[a] = (0..self.n_terms()).map(|j| w[j] * self.p[(j, i)]).sum();
        }
        // P^T diag(w) P - g g^T
        let mut hessian = vec![0.0; s * s];
        for j in 0..self.n_terms() {
            if w[j] == 0.0 {
                continue;
            }
            for (a, &ia) in self.support.iter().enumerate() {
                let pa = w[j] * self.p[(j, ia)];
                if pa == 0.0 {
                    continue;
                }
                for (b, &ib) in self.support.iter().enumerate() {
                    hessian[a * s + b] += pa * self.p[(j, ib)];
                }
            }
        }
        for a in 0..s {
            for b in 0..s {
                hessian[a * s + b] -= gradient[a] * gradient[b];
            }
        }
        CompactLseEval {
            value,
            gradient,
            hessian,
        }
    }
}

pub fn posynomial_to_lse(p: &Posynomial) -> LseForm {
    let k = p.terms.len();
    let n = p.dim();
    let mat = DMatrix::from_fn(k, n, |j, i| p.terms[j].exponents[i]);
    let q = DVector::from_iterator(k, p.terms.iter().map(|t| t.coefficient.ln()));
    LseForm::new(mat, q)
}

/// Dense value, gradient `P^T w` and Hessian `P^T (diag(w) - w w^T) P`.
pub fn lse_eval(form: &LseForm, y: &[f64]) -> LseEval {
    let n = form.dim();
    let compact = form.eval_compact(y);
    let s = form.support.len();
    let mut gradient = DVector::zeros(n);
    let mut hessian = DMatrix::zeros(n, n);
    for (a, &ia) in form.support.iter().enumerate() {
        gradient[ia] = compact.gradient[a];
        for (b, &ib) in form.support.iter().enumerate() {
            hessian[(ia, ib)] = compact.hessian[a * s + b];
        }
    }
    LseEval {
        value: compact.value,
        gradient,
        hessian,
    }
}

/// Monomial in log space: `A . y + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonoAffineForm {
    pub a: Vec<f64>,
    pub b: f64,
}

impl MonoAffineForm {
    pub fn from_monomial(m: &Monomial) -> Self {
        Self {
            a: m.exponents.clone(),
            b: m.coefficient.ln(),
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.b + self.a.iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>()
    }
}
