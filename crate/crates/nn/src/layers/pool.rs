use super::{Layer, Pass};
use crate::{NnError, Real, Result, Tensor};

/// Max pooling over non-overlapping 1x2 windows: halves the width, keeps
/// height and channels. Backward routes each window's gradient to its
/// argmax, the first element on ties.
#[derive(Debug, Clone)]
pub struct MaxPoolWidth {
    name: String,
    /// Per output element: 0 if the left input won, 1 if the right one did.
    winners: Vec<u8>,
    input_shape: Option<Vec<usize>>,
}

impl MaxPoolWidth {
    pub fn new(name: impl Into<String>) -> Self {
        MaxPoolWidth {
            name: name.into(),
            winners: Vec::new(),
            input_shape: None,
        }
    }
}

impl<T: Real> Layer<T> for MaxPoolWidth {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            [h, w, c] if w % 2 == 0 => Ok(vec![*h, w / 2, *c]),
            _ => Err(NnError::shape(
                format!("{} (width must be even)", self.name),
                &[input.first().copied().unwrap_or(0), input.get(1).map_or(0, |w| w + 1), input.get(2).copied().unwrap_or(0)],
                input,
            )),
        }
    }

    fn forward(&mut self, input: &Tensor<T>, _pass: &mut Pass<'_>) -> Result<Tensor<T>> {
        if input.shape().len() != 4 {
            return Err(NnError::shape(&self.name, &[0, 0, 0, 0], input.shape()));
        }
        let per = Layer::<T>::output_shape(self, &input.shape()[1..])?;
        let (n, h, wo, c) = (input.batch(), per[0], per[1], per[2]);
        let mut out = Tensor::zeros(&[n, h, wo, c]);
        self.winners.clear();
        self.winners.reserve(out.len());
        let x = input.data();
        let o = out.data_mut();
        for row in 0..n * h {
            for xo in 0..wo {
                let left = (row * 2 * wo + 2 * xo) * c;
                let right = left + c;
                let dst = (row * wo + xo) * c;
                for ch in 0..c {
                    let (a, b) = (x[left + ch], x[right + ch]);
                    if b > a {
                        o[dst + ch] = b;
                        self.winners.push(1);
                    } else {
                        o[dst + ch] = a;
                        self.winners.push(0);
                    }
                }
            }
        }
        self.input_shape = Some(input.shape().to_vec());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self
            .input_shape
            .take()
            .ok_or_else(|| NnError::InvalidArgument(format!("{}: backward without forward", self.name)))?;
        let (n, h, w, c) = (shape[0], shape[1], shape[2], shape[3]);
        let wo = w / 2;
        if grad_out.shape() != [n, h, wo, c] {
            return Err(NnError::shape(&self.name, &[n, h, wo, c], grad_out.shape()));
        }
        let mut grad_in = Tensor::zeros(&shape);
        let gi = grad_in.data_mut();
        let g = grad_out.data();
        for row in 0..n * h {
            for xo in 0..wo {
                let left = (row * 2 * wo + 2 * xo) * c;
                let src = (row * wo + xo) * c;
                for ch in 0..c {
                    let k = src + ch;
                    gi[left + self.winners[k] as usize * c + ch] = g[k];
                }
            }
        }
        Ok(grad_in)
    }
}
