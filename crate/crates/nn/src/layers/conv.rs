use rand_chacha::ChaCha8Rng;

use super::{expect_batch_shape, fan_in_uniform, Layer, ParamMut, Pass};
use crate::{NnError, Real, Result, Tensor};

/// 2-D cross-correlation with "same" zero padding and an optional fused ReLU.
///
/// Padding follows the usual convention for even kernels: the extra row or
/// column of zeros goes after the data (bottom/right). Weights are stored
/// `[kh, kw, c_in, c_out]` so each kernel tap is a contiguous `c_in x c_out`
/// matrix, and the convolution runs as one matrix product per (row, tap).
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    name: String,
    kernel: (usize, usize),
    in_channels: usize,
    out_channels: usize,
    relu: bool,
    weight: Tensor<T>,
    bias: Tensor<T>,
    grad_weight: Tensor<T>,
    grad_bias: Tensor<T>,
    input: Option<Tensor<T>>,
    output: Option<Tensor<T>>,
}

impl<T: Real> Conv2d<T> {
    pub fn new(
        name: impl Into<String>,
        kernel: (usize, usize),
        in_channels: usize,
        out_channels: usize,
        relu: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(kernel.0 >= 1 && kernel.1 >= 1 && in_channels >= 1 && out_channels >= 1);
        let shape = [kernel.0, kernel.1, in_channels, out_channels];
        let fan_in = kernel.0 * kernel.1 * in_channels;
        Conv2d {
            name: name.into(),
            kernel,
            in_channels,
            out_channels,
            relu,
            weight: fan_in_uniform(&shape, fan_in, rng),
            bias: Tensor::zeros(&[out_channels]),
            grad_weight: Tensor::zeros(&shape),
            grad_bias: Tensor::zeros(&[out_channels]),
            input: None,
            output: None,
        }
    }

    pub fn kernel(&self) -> (usize, usize) {
        self.kernel
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weight(&self) -> &Tensor<T> {
        &self.weight
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

    fn pads(&self) -> (usize, usize) {
        ((self.kernel.0 - 1) / 2, (self.kernel.1 - 1) / 2)
    }

    /// Valid output-column range for kernel column offset `dx`, and the
    /// matching first input column.
    fn column_span(width: usize, kx: usize, pad_left: usize) -> Option<(usize, usize, usize)> {
        let dx = kx as isize - pad_left as isize;
        let x0 = (-dx).max(0) as usize;
        let x1 = (width as isize - dx).min(width as isize);
        if x1 <= x0 as isize {
            return None;
        }
        Some((x0, x1 as usize, (x0 as isize + dx) as usize))
    }
}

impl<T: Real> Layer<T> for Conv2d<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            [h, w, c] if *c == self.in_channels && *h >= 1 && *w >= 1 => {
                Ok(vec![*h, *w, self.out_channels])
            }
            _ => Err(NnError::shape(
                &self.name,
                &[input.first().copied().unwrap_or(0), input.get(1).copied().unwrap_or(0), self.in_channels],
                input,
            )),
        }
    }

    fn forward(&mut self, input: &Tensor<T>, _pass: &mut Pass<'_>) -> Result<Tensor<T>> {
        if input.shape().len() != 4 {
            return Err(NnError::shape(&self.name, &[0, 0, 0, self.in_channels], input.shape()));
        }
        let s = input.shape();
        if s[3] != self.in_channels {
            return Err(NnError::shape(&self.name, &[s[0], s[1], s[2], self.in_channels], s));
        }
        let per = self.output_shape(&s[1..])?;
        expect_batch_shape(&self.name, input, &[per[0], per[1], self.in_channels])?;
        let (n, h, w) = (input.shape()[0], per[0], per[1]);
        let (cin, cout) = (self.in_channels, self.out_channels);
        let (kh, kw) = self.kernel;
        let (pad_top, pad_left) = self.pads();

        let mut out = Tensor::zeros(&[n, h, w, cout]);
        {
            let bias = self.bias.data();
            for px in out.data_mut().chunks_exact_mut(cout) {
                px.copy_from_slice(bias);
            }
        }
        let x = input.data();
        let wt = self.weight.data();
        let o = out.data_mut();
        for b in 0..n {
            for y in 0..h {
                for ky in 0..kh {
                    let iy = y as isize + ky as isize - pad_top as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let iy = iy as usize;
                    for kx in 0..kw {
                        let Some((x0, x1, ix0)) = Self::column_span(w, kx, pad_left) else {
                            continue;
                        };
                        let a_off = ((b * h + iy) * w + ix0) * cin;
                        let w_off = (ky * kw + kx) * cin * cout;
                        let c_off = ((b * h + y) * w + x0) * cout;
                        let rows = x1 - x0;
                        T::gemm(
                            rows,
                            cin,
                            cout,
                            T::one(),
                            &x[a_off..a_off + rows * cin],
                            cin,
                            1,
                            &wt[w_off..w_off + cin * cout],
                            cout,
                            1,
                            T::one(),
                            &mut o[c_off..c_off + rows * cout],
                            cout,
                            1,
                        );
                    }
                }
            }
        }
        if self.relu {
            o.iter_mut().for_each(|v| {
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
        let (n, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (cin, cout) = (self.in_channels, self.out_channels);
        let (kh, kw) = self.kernel;
        let (pad_top, pad_left) = self.pads();

        let mut g = grad_out.clone();
        if self.relu {
            for (gv, &ov) in g.data_mut().iter_mut().zip(output.data()) {
                if ov <= T::zero() {
                    *gv = T::zero();
                }
            }
        }
        let gd = g.data();
        for px in gd.chunks_exact(cout) {
            for (acc, &v) in self.grad_bias.data_mut().iter_mut().zip(px) {
                *acc = *acc + v;
            }
        }

        let mut grad_in = Tensor::zeros(input.shape());
        let x = input.data();
        let wt = self.weight.data();
        let gw = self.grad_weight.data_mut();
        let gi = grad_in.data_mut();
        for b in 0..n {
            for y in 0..h {
                for ky in 0..kh {
                    let iy = y as isize + ky as isize - pad_top as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let iy = iy as usize;
                    for kx in 0..kw {
                        let Some((x0, x1, ix0)) = Self::column_span(w, kx, pad_left) else {
                            continue;
                        };
                        let rows = x1 - x0;
                        let a_off = ((b * h + iy) * w + ix0) * cin;
                        let w_off = (ky * kw + kx) * cin * cout;
                        let g_off = ((b * h + y) * w + x0) * cout;
                        let x_blk = &x[a_off..a_off + rows * cin];
                        let g_blk = &gd[g_off..g_off + rows * cout];
                        // dW[tap] += X_blk^T * G_blk
                        T::gemm(
                            cin,
                            rows,
                            cout,
                            T::one(),
                            x_blk,
                            1,
                            cin,
                            g_blk,
                            cout,
                            1,
                            T::one(),
                            &mut gw[w_off..w_off + cin * cout],
                            cout,
                            1,
                        );
                        // dX_blk += G_blk * W[tap]^T
                        T::gemm(
                            rows,
                            cout,
                            cin,
                            T::one(),
                            g_blk,
                            cout,
                            1,
                            &wt[w_off..w_off + cin * cout],
                            1,
                            cout,
                            T::one(),
                            &mut gi[a_off..a_off + rows * cin],
                            cin,
                            1,
                        );
                    }
                }
            }
        }
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
