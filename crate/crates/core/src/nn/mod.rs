//! A small reverse-mode engine for 1-D convolutional networks.
//!
//! Networks are sequences of [`Layer`]s. A forward pass returns a [`Tape`]
//! of activations; [`Network::backward`] walks it in reverse and returns
//! parameter gradients plus the gradient with respect to the input. Nothing
//! is cached inside layers, so a network can be shared immutably while
//! several forward/backward passes are in flight.
//!
//! Everything is generic over [`Scalar`]: training runs in `f32`, gradient
//! verification in `f64`.

mod adam;
mod gradcheck;
mod init;
mod layer;
mod loss;
mod network;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckReport, Objective};
pub use init::{he_uniform, layer_rng};
pub use layer::{Layer, LayerSpec, Padding};
pub use loss::{mse_loss, weighted_bce_logit_grad, weighted_bce_loss, Loss, BCE_EPS};
pub use network::{GradSession, Grads, Network, Tape};
pub use tensor::Tensor;

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point element type of tensors and parameters.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts between scalar types, going through `f64`.
#[inline]
pub fn cast<A: Scalar, B: Scalar>(v: A) -> B {
    B::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or_else(B::nan)
}

/// Dot product with eight independent accumulators so the loop vectorizes.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            acc[i] = acc[i] + x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * *xi;
    }
}
