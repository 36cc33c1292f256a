//! A small, dependency-light neural-network engine for CPU training.
//!
//! The engine covers exactly what a compact 2-D CNN classifier needs:
//! shaped [`Tensor`]s, "same"-padded convolution, width max-pooling, inverted
//! dropout, a Gaussian noise-injection layer, dense layers, softmax with
//! cross-entropy, and the ADAM optimizer. Every layer implements an explicit
//! backward pass; there is no autodiff graph.
//!
//! All math is generic over [`Real`], implemented for `f64` (reference mode,
//! used by tests and determinism checks) and `f32` (fast mode).

pub mod activation;
pub mod checkpoint;
mod error;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
mod real;
mod tensor;

pub use error::{NnError, Result};
pub use layers::{Conv2d, Dense, Dropout, Flatten, GaussianNoise, Layer, MaxPoolWidth, Mode, Pass};
pub use network::{Sequential, ShapeRow};
pub use optim::{Adam, AdamConfig};
pub use real::Real;
pub use tensor::Tensor;
