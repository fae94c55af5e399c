//! A small trainable 1D CNN engine: conv1d, batch normalization, ReLU,
//! max-pooling, fully-connected and softmax cross-entropy, with hand-written
//! backward passes and Adam.
//!
//! The network is generic over [`Scalar`] so the same code runs in `f32` for
//! training / deployment and in `f64` for finite-difference gradient checks.

pub mod kernels;
mod model;
mod network;
mod spec;
mod train;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

pub use model::{CnnModel, InputNorm};
pub use network::{ForwardCache, Network, BN_EPS, BN_MOMENTUM};
pub use spec::{CnnSpec, POOL_STRIDE, POOL_WIDTH};
pub use train::{train_cnn, TrainConfig, TrainLog};

pub trait Scalar:
    Float + FromPrimitive + AddAssign + SubAssign + MulAssign + DivAssign + Sum + Default + Debug + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + AddAssign + SubAssign + MulAssign + DivAssign + Sum + Default + Debug + Send + Sync + 'static
{
}

/// Dense row-major tensor of shape `(channels, length)` or `(batch, channels, length)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor data does not match shape {shape:?}");
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![T::zero(); n] }
    }

    /// `(batch, channels, length)`; a 2D tensor is a batch of one.
    pub fn dims3(&self) -> (usize, usize, usize) {
        match self.shape.as_slice() {
            [c, l] => (1, *c, *l),
            [b, c, l] => (*b, *c, *l),
            s => panic!("expected a 2D or 3D tensor, got shape {s:?}"),
        }
    }
}
