//! Dense linear algebra, differentiable primitives and a finite-difference
//! gradient oracle. All arithmetic is `f64`.

mod gradcheck;
pub(crate) mod matrix;
mod ops;

pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use matrix::Matrix;
pub use ops::{
    activation, activation_vjp, matmul, matmul_vjp, sigmoid, softmax, softmax_vjp, Activation,
};

pub(crate) use matrix::{dot, outer_acc, vec_mat_acc, vec_mat_t_acc};
pub(crate) use ops::softmax_unchecked;
