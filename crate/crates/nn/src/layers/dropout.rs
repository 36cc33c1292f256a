use rand::Rng;

use super::{Layer, Mode, Pass};
use crate::{NnError, Real, Result, Tensor};

/// Inverted dropout: in training each element is zeroed with probability
/// `rate` and survivors are scaled by `1/(1-rate)`; evaluation is identity.
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    name: String,
    rate: f64,
    mask: Option<Vec<T>>,
}

impl<T: Real> Dropout<T> {
    pub fn new(name: impl Into<String>, rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::InvalidArgument(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Dropout {
            name: name.into(),
            rate,
            mask: None,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl<T: Real> Layer<T> for Dropout<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn forward(&mut self, input: &Tensor<T>, pass: &mut Pass<'_>) -> Result<Tensor<T>> {
        if pass.mode == Mode::Eval || self.rate == 0.0 {
            self.mask = None;
            return Ok(input.clone());
        }
        let scale = T::from_f64_lossy(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = (0..input.len())
            .map(|_| {
                if pass.rng.random::<f64>() < self.rate {
                    T::zero()
                } else {
                    scale
                }
            })
            .collect();
        let data = input.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        self.mask = Some(mask);
        Tensor::from_vec(input.shape(), data)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        match self.mask.take() {
            None => Ok(grad_out.clone()),
            Some(mask) => {
                if mask.len() != grad_out.len() {
                    return Err(NnError::shape(&self.name, &[mask.len()], &[grad_out.len()]));
                }
                let data = grad_out.data().iter().zip(&mask).map(|(&g, &m)| g * m).collect();
                Tensor::from_vec(grad_out.shape(), data)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn forward(d: &mut Dropout<f64>, x: &Tensor<f64>, mode: Mode, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Pass {
            mode,
            rng: &mut rng,
            snr_db: None,
        };
        d.forward(x, &mut p).unwrap()
    }

    #[test]
    fn eval_is_identity() {
        let mut d = Dropout::new("d", 0.5).unwrap();
        let x = Tensor::from_vec(&[1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(forward(&mut d, &x, Mode::Eval, 1), x);
    }

    #[test]
    fn zero_rate_is_identity_in_training() {
        let mut d = Dropout::new("d", 0.0).unwrap();
        let x = Tensor::from_vec(&[1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(forward(&mut d, &x, Mode::Train, 1), x);
    }

    #[test]
    fn rate_must_be_below_one() {
        assert!(Dropout::<f64>::new("d", 1.0).is_err());
        assert!(Dropout::<f64>::new("d", -0.1).is_err());
    }

    #[test]
    fn survivor_fraction_and_scale() {
        // Binomial(1e5, 0.5): sd = 158, so [0.49, 0.51] is a > 6 sigma band.
        let n = 100_000;
        let mut d = Dropout::new("d", 0.5).unwrap();
        let x = Tensor::filled(&[1, n], 1.0);
        let y = forward(&mut d, &x, Mode::Train, 7);
        let survivors = y.data().iter().filter(|&&v| v != 0.0).count();
        let frac = survivors as f64 / n as f64;
        assert!((0.49..=0.51).contains(&frac), "{frac}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
