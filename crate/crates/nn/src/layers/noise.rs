use rand_distr::{Distribution, StandardNormal};

use super::{Layer, Mode, Pass};
use crate::{NnError, Real, Result, Tensor};

/// Training-time additive white Gaussian noise at each sample's labeled SNR.
///
/// For a sample with mean square `P` over its elements, noise of variance
/// `P / 10^(snr/10)` is added to every element, so the ratio holds equally
/// for interleaved I/Q rows. A fresh draw is taken on every call; in
/// evaluation mode the layer is the identity.
///
/// The noise scale depends on the input power, so the backward pass carries
/// the `d sigma / d x` term as well as the identity path.
#[derive(Debug, Clone)]
pub struct GaussianNoise {
    name: String,
    cache: Option<NoiseCache>,
}

#[derive(Debug, Clone)]
struct NoiseCache {
    input: Vec<f64>,
    /// Unit normal draws, one per element.
    draws: Vec<f64>,
    /// Per sample `(sigma, linear snr)`; `None` for noiseless samples.
    scale: Vec<Option<(f64, f64)>>,
}

impl GaussianNoise {
    pub fn new(name: impl Into<String>) -> Self {
        GaussianNoise {
            name: name.into(),
            cache: None,
        }
    }
}

impl Default for GaussianNoise {
    fn default() -> Self {
        Self::new("Noise Layer")
    }
}

impl<T: Real> Layer<T> for GaussianNoise {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn forward(&mut self, input: &Tensor<T>, pass: &mut Pass<'_>) -> Result<Tensor<T>> {
        if pass.mode == Mode::Eval {
            self.cache = None;
            return Ok(input.clone());
        }
        let n = input.batch();
        let snr = pass.snr_db.ok_or_else(|| {
            NnError::InvalidArgument(format!("{}: training mode needs per-sample SNR labels", self.name))
        })?;
        if snr.len() != n {
            return Err(NnError::shape(&self.name, &[n], &[snr.len()]));
        }
        let per = input.len() / n;
        let mut out = input.clone();
        let mut draws = vec![0.0; input.len()];
        let mut scale = vec![None; n];
        for (i, sample) in out.data_mut().chunks_exact_mut(per).enumerate() {
            let snr_db = snr[i];
            if snr_db == f64::INFINITY {
                continue;
            }
            let power = sample.iter().map(|v| v.to_f64().unwrap().powi(2)).sum::<f64>() / per as f64;
            if !(power > 0.0) {
                return Err(NnError::Degenerate(format!(
                    "{}: sample {i} has zero power",
                    self.name
                )));
            }
            let ratio = 10f64.powf(snr_db / 10.0);
            let sigma = (power / ratio).sqrt();
            scale[i] = Some((sigma, ratio));
            for (v, d) in sample.iter_mut().zip(&mut draws[i * per..(i + 1) * per]) {
                let z: f64 = StandardNormal.sample(pass.rng);
                *d = z;
                *v = *v + T::from_f64_lossy(sigma * z);
            }
        }
        self.cache = Some(NoiseCache {
            input: input.data().iter().map(|v| v.to_f64().unwrap()).collect(),
            draws,
            scale,
        });
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let Some(cache) = self.cache.take() else {
            return Ok(grad_out.clone());
        };
        if cache.input.len() != grad_out.len() {
            return Err(NnError::shape(&self.name, &[cache.input.len()], &[grad_out.len()]));
        }
        let n = cache.scale.len();
        let per = grad_out.len() / n;
        let mut grad = grad_out.clone();
        for (i, g) in grad.data_mut().chunks_exact_mut(per).enumerate() {
            let Some((sigma, ratio)) = cache.scale[i] else {
                continue;
            };
            let range = i * per..(i + 1) * per;
            // out = x + sigma(x) z, sigma = sqrt(mean(x^2) / ratio)
            let gz: f64 = g
                .iter()
                .zip(&cache.draws[range.clone()])
                .map(|(gv, z)| gv.to_f64().unwrap() * z)
                .sum();
            let k = gz / (per as f64 * ratio * sigma);
            for (gv, x) in g.iter_mut().zip(&cache.input[range]) {
                *gv = *gv + T::from_f64_lossy(k * x);
            }
        }
        Ok(grad)
    }
}
