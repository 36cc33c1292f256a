use rand_chacha::ChaCha8Rng;

use super::{expect_batch_shape, fan_in_uniform, Layer, ParamMut, Pass};
use crate::{NnError, Real, Result, Tensor};

/// Fully connected layer `y = x W + b`, optionally followed by ReLU.
/// Weights are stored `[inputs, outputs]`.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    name: String,
    inputs: usize,
    outputs: usize,
    relu: bool,
    weight: Tensor<T>,
    bias: Tensor<T>,
    grad_weight: Tensor<T>,
    grad_bias: Tensor<T>,
    input: Option<Tensor<T>>,
    output: Option<Tensor<T>>,
}

impl<T: Real> Dense<T> {
    pub fn new(name: impl Into<String>, inputs: usize, outputs: usize, relu: bool, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            name: name.into(),
            inputs,
            outputs,
            relu,
            weight: fan_in_uniform(&[inputs, outputs], inputs, rng),
            bias: Tensor::zeros(&[outputs]),
            grad_weight: Tensor::zeros(&[inputs, outputs]),
            grad_bias: Tensor::zeros(&[outputs]),
            input: None,
            output: None,
        }
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn set_params(&mut self, weight: Tensor<T>, bias: Tensor<T>) -> Result<()> {
        if weight.shape() != self.weight.shape() {
            return Err(NnError::shape(&self.name, self.weight.shape(), weight.shape()));
        }
        if bias.shape() != self.bias.shape() {
            return Err(NnError::shape(&self.name, self.bias.shape(), bias.shape()));
        }
        self.weight = weight;
        self.bias = bias;
        Ok(())
    }
}

impl<T: Real> Layer<T> for Dense<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input != [self.inputs] {
            return Err(NnError::shape(&self.name, &[self.inputs], input));
        }
        Ok(vec![self.outputs])
    }

    fn forward(&mut self, input: &Tensor<T>, _pass: &mut Pass<'_>) -> Result<Tensor<T>> {
        expect_batch_shape(&self.name, input, &[self.inputs])?;
        let n = input.batch();
        let mut out = Tensor::zeros(&[n, self.outputs]);
        for row in out.data_mut().chunks_exact_mut(self.outputs) {
            row.copy_from_slice(self.bias.data());
        }
        T::gemm(
            n,
            self.inputs,
            self.outputs,
            T::one(),
            input.data(),
            self.inputs,
            1,
            self.weight.data(),
            self.outputs,
            1,
            T::one(),
            out.data_mut(),
            self.outputs,
            1,
        );
        if self.relu {
            out.data_mut().iter_mut().for_each(|v| {
                if *v < T::zero() {
                    *v = T::zero()
                }
            });
        }
        self.input = Some(input.clone());
        self.output = Some(out.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self
            .input
            .take()
            .ok_or_else(|| NnError::InvalidArgument(format!("{}: backward without forward", self.name)))?;
        let output = self.output.take().expect("output cached with input");
        if grad_out.shape() != output.shape() {
            return Err(NnError::shape(&self.name, output.shape(), grad_out.shape()));
        }
        let n = input.batch();
        let mut g = grad_out.clone();
        if self.relu {
            for (gv, &ov) in g.data_mut().iter_mut().zip(output.data()) {
                if ov <= T::zero() {
                    *gv = T::zero();
                }
            }
        }
        for row in g.data().chunks_exact(self.outputs) {
            for (acc, &v) in self.grad_bias.data_mut().iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        T::gemm(
            self.inputs,
            n,
            self.outputs,
            T::one(),
            input.data(),
            1,
            self.inputs,
            g.data(),
            self.outputs,
            1,
            T::one(),
            self.grad_weight.data_mut(),
            self.outputs,
            1,
        );
        let mut grad_in = Tensor::zeros(input.shape());
        T::gemm(
            n,
            self.outputs,
            self.inputs,
            T::one(),
            g.data(),
            self.outputs,
            1,
            self.weight.data(),
            1,
            self.outputs,
            T::zero(),
            grad_in.data_mut(),
            self.inputs,
            1,
        );
        Ok(grad_in)
    }

    fn params(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        vec![
            ParamMut {
                name: "weight",
                value: &mut self.weight,
                grad: &self.grad_weight,
            },
            ParamMut {
                name: "bias",
                value: &mut self.bias,
                grad: &self.grad_bias,
            },
        ]
    }

    fn zero_grads(&mut self) {
        self.grad_weight.fill(T::zero());
        self.grad_bias.fill(T::zero());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Mode;
    use rand::SeedableRng;

    #[test]
    fn identity_weights_pass_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut d = Dense::<f64>::new("d", 3, 3, false, &mut rng);
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        d.set_params(eye, Tensor::zeros(&[3])).unwrap();
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 4.0, 5.0, -6.0]).unwrap();
        let mut p = Pass {
            mode: Mode::Eval,
            rng: &mut rng,
            snr_db: None,
        };
        assert_eq!(d.forward(&x, &mut p).unwrap(), x);
    }

    #[test]
    fn wrong_input_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = Dense::<f64>::new("dense1", 8192, 128, true, &mut rng);
        assert_eq!(d.output_shape(&[8192]).unwrap(), vec![128]);
        assert!(d.output_shape(&[1024]).is_err());
    }
}
