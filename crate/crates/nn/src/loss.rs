//! Categorical cross-entropy paired with softmax.

use crate::activation::softmax;
use crate::{NnError, Real, Result, Tensor};

/// Smallest probability fed to the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln p[label]`, with `p[label]` floored at [`PROB_FLOOR`].
pub fn cross_entropy<T: Real>(probs: &[T], label: usize) -> Result<T> {
    let p = probs.get(label).ok_or_else(|| {
        NnError::InvalidArgument(format!("label {label} out of range for {} classes", probs.len()))
    })?;
    let floor = T::from_f64_lossy(PROB_FLOOR);
    Ok(-(p.max(floor)).ln())
}

/// Gradient of cross-entropy with respect to the logits that produced
/// `probs` through softmax: `p - onehot(label)`.
pub fn cross_entropy_logit_grad<T: Real>(probs: &[T], label: usize) -> Result<Vec<T>> {
    if label >= probs.len() {
        return Err(NnError::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let mut g = probs.to_vec();
    g[label] = g[label] - T::one();
    Ok(g)
}

/// Batch result of [`softmax_cross_entropy`].
#[derive(Debug, Clone)]
pub struct BatchLoss<T> {
    /// Mean loss over the batch.
    pub loss: T,
    /// Per-row class probabilities, `[batch, classes]`.
    pub probs: Tensor<T>,
    /// Gradient of the mean loss with respect to the logits.
    pub grad: Tensor<T>,
    /// Number of rows whose argmax equals the label.
    pub correct: usize,
}

/// Softmax + mean cross-entropy over a `[batch, classes]` logit tensor.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<BatchLoss<T>> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(NnError::shape(
            "softmax_cross_entropy",
            &[labels.len(), shape.last().copied().unwrap_or(0)],
            shape,
        ));
    }
    let (batch, classes) = (shape[0], shape[1]);
    let scale = T::one() / T::from_usize(batch).unwrap();
    let mut total = T::zero();
    let mut correct = 0;
    let mut probs = Vec::with_capacity(batch * classes);
    let mut grad = Vec::with_capacity(batch * classes);
    for (row, &label) in logits.data().chunks_exact(classes).zip(labels) {
        let p = softmax(row)?;
        total = total + cross_entropy(&p, label)?;
        if argmax(&p) == label {
            correct += 1;
        }
        grad.extend(cross_entropy_logit_grad(&p, label)?.into_iter().map(|g| g * scale));
        probs.extend(p);
    }
    Ok(BatchLoss {
        loss: total * scale,
        probs: Tensor::from_vec(shape, probs)?,
        grad: Tensor::from_vec(shape, grad)?,
        correct,
    })
}

/// Index of the largest value; first index wins ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
