//! Elementwise and row-wise activations.

use crate::{NnError, Real, Result, Tensor};

/// `max(0, x)` elementwise.
pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `grad` where the forward input was strictly positive; the
/// subgradient at exactly zero is zero.
pub fn relu_backward<T: Real>(input: &Tensor<T>, grad: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != grad.shape() {
        return Err(NnError::shape("relu_backward", input.shape(), grad.shape()));
    }
    let data = input
        .data()
        .iter()
        .zip(grad.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

/// Numerically stable softmax of one logit vector.
pub fn softmax<T: Real>(logits: &[T]) -> Result<Vec<T>> {
    if logits.is_empty() {
        return Err(NnError::InvalidArgument("softmax of an empty vector".into()));
    }
    if logits.iter().any(|v| v.is_nan()) {
        return Err(NnError::NonFinite("NaN logit in softmax".into()));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = out.iter().copied().sum();
    out.iter_mut().for_each(|p| *p = *p / sum);
    Ok(out)
}

/// Row-wise softmax over a `[batch, classes]` tensor.
pub fn softmax_rows<T: Real>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.shape().len() != 2 {
        return Err(NnError::InvalidArgument(format!(
            "softmax_rows expects [batch, classes], got {:?}",
            logits.shape()
        )));
    }
    let classes = logits.shape()[1];
    let mut data = Vec::with_capacity(logits.len());
    for row in logits.data().chunks_exact(classes) {
        data.extend(softmax(row)?);
    }
    Tensor::from_vec(logits.shape(), data)
}
