//! Layer trait and the fixed layer set.
//!
//! Tensors flowing between layers carry a leading batch dimension; shapes
//! reported by [`Layer::output_shape`] are per-sample (batch dimension
//! stripped). Spatial tensors are laid out `[batch, height, width, channels]`.

use rand_chacha::ChaCha8Rng;

use crate::{Real, Result, Tensor};

mod conv;
mod dense;
mod dropout;
mod flatten;
mod noise;
mod pool;

pub use conv::Conv2d;
pub use dense::Dense;
pub use dropout::Dropout;
pub use flatten::Flatten;
pub use noise::GaussianNoise;
pub use pool::MaxPoolWidth;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-forward-pass context.
pub struct Pass<'a> {
    pub mode: Mode,
    /// Randomness for dropout and noise; only consumed in training mode.
    pub rng: &'a mut ChaCha8Rng,
    /// Labeled SNR of every sample in the batch, used by the noise layer.
    pub snr_db: Option<&'a [f64]>,
}

/// A trainable parameter with its accumulated gradient.
pub struct ParamMut<'a, T> {
    pub name: &'static str,
    pub value: &'a mut Tensor<T>,
    pub grad: &'a Tensor<T>,
}

pub trait Layer<T: Real>: Send {
    fn name(&self) -> &str;

    /// Output shape for one sample of shape `input`.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    /// Batch forward pass; caches whatever `backward` needs.
    fn forward(&mut self, input: &Tensor<T>, pass: &mut Pass<'_>) -> Result<Tensor<T>>;

    /// Consumes the cache of the last `forward`, accumulates parameter
    /// gradients and returns the gradient with respect to the input.
    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>>;

    fn params(&self) -> Vec<(&'static str, &Tensor<T>)> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        Vec::new()
    }

    fn zero_grads(&mut self) {}
}

/// Uniform fan-in scaled initializer, `U(-sqrt(6/fan_in), +sqrt(6/fan_in))`.
pub(crate) fn fan_in_uniform<T: Real>(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    use rand::Rng;
    let limit = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64_lossy(rng.random_range(-limit..limit)))
        .collect();
    Tensor::from_vec(shape, data).expect("initializer shape")
}

pub(crate) fn expect_batch_shape<T: Real>(
    context: &str,
    input: &Tensor<T>,
    per_sample: &[usize],
) -> Result<()> {
    let found = input.shape();
    if found.len() != per_sample.len() + 1 || &found[1..] != per_sample {
        let mut expected = vec![found.first().copied().unwrap_or(1)];
        expected.extend_from_slice(per_sample);
        return Err(crate::NnError::shape(context, &expected, found));
    }
    Ok(())
}
