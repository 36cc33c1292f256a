use super::{Layer, Pass};
use crate::{NnError, Real, Result, Tensor};

#[derive(Debug, Clone, Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Real> Layer<T> for Flatten {
    fn name(&self) -> &str {
        "Flatten"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(vec![input.iter().product()])
    }

    fn forward(&mut self, input: &Tensor<T>, _pass: &mut Pass<'_>) -> Result<Tensor<T>> {
        let n = input.batch();
        let per = input.len() / n;
        self.input_shape = Some(input.shape().to_vec());
        input.clone().reshape(&[n, per])
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self
            .input_shape
            .take()
            .ok_or_else(|| NnError::InvalidArgument("Flatten: backward without forward".into()))?;
        grad_out.clone().reshape(&shape)
    }
}
