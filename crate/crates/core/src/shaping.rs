//! Raised-cosine pulse shaping.

use std::f64::consts::PI;

use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingConfig {
    /// Samples per symbol.
    pub oversampling: usize,
    /// Roll-off factor in `[0, 1]`.
    pub rolloff: f64,
    /// Filter half-length in symbols.
    pub span: usize,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        ShapingConfig {
            oversampling: 2,
            rolloff: 0.35,
            span: 8,
        }
    }
}

impl ShapingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.oversampling < 2 {
            return Err(Error::invalid("oversampling must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::invalid(format!("roll-off {} outside [0, 1]", self.rolloff)));
        }
        if self.span == 0 {
            return Err(Error::invalid("filter span must be at least one symbol"));
        }
        Ok(())
    }

    /// Index of the filter peak (taps are `2 * delay + 1` long).
    pub fn delay(&self) -> usize {
        self.span * self.oversampling
    }

    pub fn tap_count(&self) -> usize {
        2 * self.delay() + 1
    }

    /// Symbols that must precede the first output sample for the filter to
    /// be in steady state.
    pub fn lead_symbols(&self) -> usize {
        self.span
    }

    /// Symbols consumed to fill `n_samples` output samples.
    pub fn symbols_needed(&self, n_samples: usize) -> usize {
        n_samples.div_ceil(self.oversampling) + 2 * self.span
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Unit-peak raised-cosine impulse response at `t` symbol periods.
pub fn raised_cosine(t: f64, beta: f64) -> f64 {
    if beta > 0.0 && ((2.0 * beta * t).abs() - 1.0).abs() < 1e-12 {
        return PI / 4.0 * sinc(1.0 / (2.0 * beta));
    }
    let d = 1.0 - (2.0 * beta * t).powi(2);
    sinc(t) * (PI * beta * t).cos() / d
}

pub fn rc_taps(cfg: &ShapingConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d = cfg.delay() as isize;
    let sps = cfg.oversampling as f64;
    Ok((-d..=d)
        .map(|k| raised_cosine(k as f64 / sps, cfg.rolloff))
        .collect())
}

/// Upsamples `symbols` and filters with the raised-cosine taps, returning the
/// `n_samples` steady-state window that starts at symbol `lead_symbols()`.
/// Window sample `sps * m` lands exactly on symbol `lead_symbols() + m`.
pub fn shape(symbols: &[C64], cfg: &ShapingConfig, n_samples: usize) -> Result<Vec<C64>> {
    let taps = rc_taps(cfg)?;
    let need = cfg.symbols_needed(n_samples);
    if symbols.len() < need {
        return Err(Error::invalid(format!(
            "{} symbols cannot fill {n_samples} samples (need {need})",
            symbols.len()
        )));
    }
    let sps = cfg.oversampling;
    let delay = cfg.delay();
    let start = cfg.span * sps + delay;
    let out = (0..n_samples)
        .map(|n| {
            let pos = start + n;
            // taps k with (pos - k) a multiple of sps
            let mut acc = C64::new(0.0, 0.0);
            let mut k = pos % sps;
            while k < taps.len() && k <= pos {
                acc += symbols[(pos - k) / sps] * taps[k];
                k += sps;
            }
            acc
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nyquist_zero_crossings() {
        for beta in [0.0, 0.2, 0.35, 0.5, 1.0] {
            assert_eq!(raised_cosine(0.0, beta), 1.0);
            for k in 1..=8 {
                assert!(raised_cosine(k as f64, beta).abs() < 1e-12, "beta {beta} k {k}");
                assert!(raised_cosine(-(k as f64), beta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beta_zero_is_sinc() {
        let cfg = ShapingConfig { rolloff: 0.0, ..Default::default() };
        let taps = rc_taps(&cfg).unwrap();
        for (i, h) in taps.iter().enumerate() {
            let t = (i as f64 - 16.0) / 2.0;
            let s = if t == 0.0 { 1.0 } else { (PI * t).sin() / (PI * t) };
            assert!((h - s).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_point_is_continuous() {
        let beta = 0.25; // t = 2 symbol periods hits the removable singularity
        let at = raised_cosine(2.0, beta);
        let near = raised_cosine(2.0 + 1e-7, beta);
        assert!((at - near).abs() < 1e-6);
    }

    #[test]
    fn taps_symmetric_odd() {
        let taps = rc_taps(&ShapingConfig::default()).unwrap();
        assert_eq!(taps.len(), 33);
        for i in 0..taps.len() {
            assert_eq!(taps[i], taps[taps.len() - 1 - i]);
        }
    }

    #[test]
    fn bad_configs() {
        let base = ShapingConfig::default();
        assert!(ShapingConfig { oversampling: 1, ..base }.validate().is_err());
        assert!(ShapingConfig { rolloff: 1.5, ..base }.validate().is_err());
        assert!(ShapingConfig { span: 0, ..base }.validate().is_err());
    }

    #[test]
    fn too_few_symbols() {
        let cfg = ShapingConfig::default();
        let s = vec![C64::new(1.0, 0.0); cfg.symbols_needed(64) - 1];
        assert!(shape(&s, &cfg, 64).is_err());
    }
}
