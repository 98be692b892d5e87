//! Differentiable primitives and their vector-Jacobian products.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}

/// Given `c = a · b` and upstream `dc`, returns `(da, db) = (dc · bᵀ, aᵀ · dc)`.
pub fn matmul_vjp(a: &Matrix, b: &Matrix, dc: &Matrix) -> Result<(Matrix, Matrix)> {
    if dc.shape() != (a.rows(), b.cols()) || a.cols() != b.rows() {
        return Err(Error::Shape {
            op: "matmul_vjp",
            left: (a.rows(), b.cols()),
            right: dc.shape(),
        });
    }
    Ok((dc.matmul(&b.transpose())?, a.transpose().matmul(dc)?))
}

/// Numerically stabilized softmax.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::arg("softmax of an empty vector"));
    }
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::arg(format!("softmax input contains {bad}")));
    }
    Ok(softmax_unchecked(v))
}

pub(crate) fn softmax_unchecked(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

/// Given `y = softmax(v)` and upstream `dy`, returns `dv = y ⊙ (dy − ⟨y, dy⟩)`.
pub fn softmax_vjp(y: &[f64], dy: &[f64]) -> Vec<f64> {
    let inner: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
    y.iter().zip(dy).map(|(yi, di)| yi * (di - inner)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the output `y = f(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Overflow-free logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activation(kind: Activation, m: &Matrix) -> Matrix {
    m.map(|x| kind.apply(x))
}

/// Given `y = activation(kind, x)` and upstream `dy`, returns `dx`.
pub fn activation_vjp(kind: Activation, y: &Matrix, dy: &Matrix) -> Result<Matrix> {
    y.same_shape("activation_vjp", dy)?;
    let data = y
        .as_slice()
        .iter()
        .zip(dy.as_slice())
        .map(|(&yi, &di)| di * kind.derivative_from_output(yi))
        .collect();
    Matrix::from_vec(y.rows(), y.cols(), data)
}
