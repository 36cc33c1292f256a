//! Complex baseband sample buffers.

use crate::{Error, Result, C64};

/// Native record length.
pub const DEFAULT_SAMPLES: usize = 1024;

/// Complex samples plus the cumulative scale applied by normalization, so a
/// receiver can undo it when checking symbol decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<C64>,
    gain: f64,
}

impl Waveform {
    pub fn new(samples: Vec<C64>) -> Self {
        Waveform { samples, gain: 1.0 }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Waveform::new(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [C64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub(crate) fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

pub fn mean_power(x: &[C64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|s| s.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Scales to unit mean power.
pub fn normalize_power(w: Waveform) -> Result<Waveform> {
    let p = w.mean_power();
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::DegenerateSignal(format!(
            "cannot normalize a signal with mean power {p}"
        )));
    }
    let scale = p.sqrt().recip();
    let gain = w.gain * scale;
    let samples = w.samples.into_iter().map(|s| s * scale).collect();
    Ok(Waveform { samples, gain })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_two() {
        let w = normalize_power(Waveform::new(vec![C64::new(2.0, 0.0); 5])).unwrap();
        assert!(w.samples().iter().all(|s| (*s - C64::new(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(w.gain(), 0.5);
    }

    #[test]
    fn idempotent() {
        let x: Vec<C64> = (0..64).map(|i| C64::from_polar(1.0, i as f64)).collect();
        let w = normalize_power(Waveform::new(x.clone())).unwrap();
        for (a, b) in w.samples().iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_is_degenerate() {
        let err = normalize_power(Waveform::new(vec![C64::new(0.0, 0.0); 4])).unwrap_err();
        assert!(matches!(err, Error::DegenerateSignal(_)));
        assert!(normalize_power(Waveform::new(vec![])).is_err());
    }
}
