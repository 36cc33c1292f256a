//! Clean baseband synthesis for every catalogue variant, plus the matching
//! noiseless receivers used to check it.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::modulation::{
    bits_to_values, constellation, generate_bits, gray, gray_inverse, nearest_point,
    values_to_bits, Family, ModulationSpec, Variant,
};
use crate::seed::{self, Stream};
use crate::shaping::{shape, ShapingConfig};
use crate::waveform::{normalize_power, Waveform};
use crate::{Error, Result, C64};

/// AM-DSB modulation depth.
pub const AM_DEPTH: f64 = 0.5;
/// FM frequency sensitivity in cycles per sample per unit message.
pub const FM_SENSITIVITY: f64 = 0.1;
/// PM phase sensitivity in radians per unit message.
pub const PM_SENSITIVITY: f64 = PI / 2.0;
/// Message bandwidth as a fraction of the sample rate.
pub const MESSAGE_BANDWIDTH: f64 = 0.125;
const MESSAGE_TAPS: usize = 65;

pub fn modulate_linear(
    bits: &[u8],
    spec: &ModulationSpec,
    shaping: &ShapingConfig,
    n_samples: usize,
) -> Result<Waveform> {
    spec.require(&[Family::Pam, Family::Psk, Family::Qam], "PAM, PSK or QAM")?;
    shaping.validate()?;
    if n_samples == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let k = spec.bits_per_symbol();
    let need = shaping.symbols_needed(n_samples) * k;
    if bits.len() < need {
        return Err(Error::invalid(format!(
            "{} bits cannot fill {n_samples} samples of {} (need {need})",
            bits.len(),
            spec.variant()
        )));
    }
    let points = constellation(spec)?;
    let symbols: Vec<C64> = bits_to_values(&bits[..need], k)?
        .into_iter()
        .map(|v| points[v])
        .collect();
    normalize_power(Waveform::new(shape(&symbols, shaping, n_samples)?))
}

/// Tone frequency, in cycles per sample, of FSK tone `k` out of `m`.
pub fn fsk_tone(k: usize, m: usize) -> f64 {
    (2.0 * k as f64 - m as f64 + 1.0) / (4.0 * m as f64)
}

/// Bits consumed by [`modulate_fsk`] for `n_samples`.
pub fn fsk_bits_needed(spec: &ModulationSpec, shaping: &ShapingConfig, n_samples: usize) -> usize {
    n_samples.div_ceil(shaping.oversampling) * spec.bits_per_symbol()
}

/// Continuous-phase FSK; symbol value `v` selects tone `gray_inverse(v)` so
/// neighbouring tones differ in one bit.
pub fn modulate_fsk(
    bits: &[u8],
    spec: &ModulationSpec,
    shaping: &ShapingConfig,
    n_samples: usize,
) -> Result<Waveform> {
    spec.require(&[Family::Fsk], "FSK")?;
    shaping.validate()?;
    if n_samples == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let need = fsk_bits_needed(spec, shaping, n_samples);
    if bits.len() < need {
        return Err(Error::invalid(format!(
            "{} bits cannot fill {n_samples} samples of {} (need {need})",
            bits.len(),
            spec.variant()
        )));
    }
    let m = spec.order();
    let sps = shaping.oversampling;
    let values = bits_to_values(&bits[..need], spec.bits_per_symbol())?;
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(n_samples);
    'outer: for v in values {
        let step = 2.0 * PI * fsk_tone(gray_inverse(v), m);
        for _ in 0..sps {
            if out.len() == n_samples {
                break 'outer;
            }
            out.push(C64::from_polar(1.0, phase));
            phase = (phase + step).rem_euclid(2.0 * PI);
        }
    }
    normalize_power(Waveform::new(out))
}

fn lowpass_taps() -> Vec<f64> {
    let mid = (MESSAGE_TAPS - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..MESSAGE_TAPS)
        .map(|i| {
            let t = i as f64 - mid;
            let ideal = if t == 0.0 {
                2.0 * MESSAGE_BANDWIDTH
            } else {
                (2.0 * PI * MESSAGE_BANDWIDTH * t).sin() / (PI * t)
            };
            let hamming = 0.54 - 0.46 * (2.0 * PI * i as f64 / (MESSAGE_TAPS - 1) as f64).cos();
            ideal * hamming
        })
        .collect();
    let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    h.iter_mut().for_each(|v| *v /= norm);
    h
}

/// Low-pass filtered white Gaussian noise; unit variance in expectation.
pub fn make_message(n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    if n_samples == 0 {
        return Err(Error::invalid("message length must be positive"));
    }
    let h = lowpass_taps();
    let mut rng = seed::rng(seed);
    let white: Vec<f64> = (0..n_samples + h.len() - 1)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Ok((0..n_samples)
        .map(|n| h.iter().enumerate().map(|(k, hk)| hk * white[n + h.len() - 1 - k]).sum())
        .collect())
}

/// `m + j H{m}` via the FFT: negative-frequency bins are zeroed.
pub fn analytic_signal(x: &[f64]) -> Vec<C64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (i, b) in buf.iter_mut().enumerate() {
        let positive = i > 0 && 2 * i < n;
        let nyquist_or_dc = i == 0 || 2 * i == n;
        if positive {
            *b *= 2.0;
        } else if !nyquist_or_dc {
            *b = C64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter().map(|b| b * inv).collect()
}

pub fn modulate_analog(message: &[f64], variant: Variant, n_samples: usize) -> Result<Waveform> {
    ModulationSpec::new(variant).require(&[Family::Analog], "analog")?;
    if message.len() < n_samples || n_samples == 0 {
        return Err(Error::invalid(format!(
            "message of {} samples cannot fill {n_samples}",
            message.len()
        )));
    }
    let m = &message[..n_samples];
    let samples: Vec<C64> = match variant {
        Variant::AmDsb => m.iter().map(|&v| C64::new(1.0 + AM_DEPTH * v, 0.0)).collect(),
        Variant::AmSc => m.iter().map(|&v| C64::new(v, 0.0)).collect(),
        Variant::AmUsb => analytic_signal(m),
        Variant::AmLsb => analytic_signal(m).into_iter().map(|z| z.conj()).collect(),
        Variant::Fm => {
            let mut acc = 0.0;
            m.iter()
                .map(|&v| {
                    acc += v;
                    C64::from_polar(1.0, 2.0 * PI * FM_SENSITIVITY * acc)
                })
                .collect()
        }
        Variant::Pm => m.iter().map(|&v| C64::from_polar(1.0, PM_SENSITIVITY * v)).collect(),
        _ => unreachable!(),
    };
    normalize_power(Waveform::new(samples))
}

/// Clean unit-power waveform for `spec`, drawing bits or message from the
/// source stream of `record_seed`.
pub fn synthesize(
    spec: &ModulationSpec,
    shaping: &ShapingConfig,
    n_samples: usize,
    record_seed: u64,
) -> Result<Waveform> {
    let source = seed::stream(record_seed, Stream::Source);
    match spec.family() {
        Family::Analog => {
            let msg = make_message(n_samples, source)?;
            modulate_analog(&msg, spec.variant(), n_samples)
        }
        Family::Fsk => {
            let bits = generate_bits(fsk_bits_needed(spec, shaping, n_samples), source)?;
            modulate_fsk(&bits, spec, shaping, n_samples)
        }
        _ => {
            let count = shaping.symbols_needed(n_samples) * spec.bits_per_symbol();
            let bits = generate_bits(count, source)?;
            modulate_linear(&bits, spec, shaping, n_samples)
        }
    }
}

/// Noiseless linear receiver: samples at symbol instants, removes the
/// normalization gain and demaps. Returns bits for the symbols inside the
/// window, i.e. starting at symbol `shaping.lead_symbols()`.
pub fn demod_linear(w: &Waveform, spec: &ModulationSpec, shaping: &ShapingConfig) -> Result<Vec<u8>> {
    let points = constellation(spec)?;
    if w.is_empty() {
        return Err(Error::invalid("empty waveform"));
    }
    let inv = 1.0 / w.gain();
    let values: Vec<usize> = w
        .samples()
        .iter()
        .step_by(shaping.oversampling)
        .map(|&z| nearest_point(&points, z * inv))
        .collect();
    Ok(values_to_bits(&values, spec.bits_per_symbol()))
}

/// Noiseless FSK receiver from the mean phase increment within each symbol.
pub fn demod_fsk(w: &Waveform, spec: &ModulationSpec, shaping: &ShapingConfig) -> Result<Vec<u8>> {
    spec.require(&[Family::Fsk], "FSK")?;
    let sps = shaping.oversampling;
    let m = spec.order();
    let s = w.samples();
    let symbols = s.len() / sps;
    if symbols == 0 {
        return Err(Error::invalid("waveform shorter than one symbol"));
    }
    let values: Vec<usize> = (0..symbols)
        .map(|i| {
            let chunk = &s[i * sps..(i + 1) * sps];
            let rot: C64 = chunk.windows(2).map(|p| p[1] * p[0].conj()).sum();
            let f = rot.arg() / (2.0 * PI);
            let k = ((f * 4.0 * m as f64 + m as f64 - 1.0) / 2.0).round();
            gray(k.clamp(0.0, (m - 1) as f64) as usize)
        })
        .collect();
    Ok(values_to_bits(&values, spec.bits_per_symbol()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(v: Variant) -> ModulationSpec {
        ModulationSpec::new(v)
    }

    #[test]
    fn fsk2_zero_bits_is_single_tone() {
        let cfg = ShapingConfig::default();
        let w = modulate_fsk(&[0; 64], &spec(Variant::Fsk2), &cfg, 64).unwrap();
        for (n, z) in w.samples().iter().enumerate() {
            let want = C64::from_polar(1.0, -2.0 * PI * n as f64 / 8.0);
            assert!((z - want).norm() < 1e-9);
        }
    }

    #[test]
    fn fsk_tones_inside_quarter_band() {
        for m in [2, 4, 8, 16] {
            for k in 0..m {
                assert!(fsk_tone(k, m).abs() <= 0.25);
            }
        }
    }

    #[test]
    fn fsk_constant_envelope_and_continuous() {
        let cfg = ShapingConfig::default();
        let s = spec(Variant::Fsk16);
        let bits = generate_bits(fsk_bits_needed(&s, &cfg, 256), 3).unwrap();
        let w = modulate_fsk(&bits, &s, &cfg, 256).unwrap();
        assert!(w.samples().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        // each step advances by one of the tone increments
        let steps: Vec<f64> = (0..16).map(|k| 2.0 * PI * fsk_tone(k, 16)).collect();
        for p in w.samples().windows(2) {
            let d = (p[1] * p[0].conj()).arg();
            assert!(steps.iter().any(|s| (s - d).abs() < 1e-9), "jump {d}");
        }
    }

    #[test]
    fn wrong_families() {
        let cfg = ShapingConfig::default();
        assert!(matches!(
            modulate_fsk(&[0; 8], &spec(Variant::Qpsk), &cfg, 4),
            Err(Error::WrongFamily { .. })
        ));
        assert!(matches!(
            modulate_linear(&[0; 8], &spec(Variant::Fsk2), &cfg, 4),
            Err(Error::WrongFamily { .. })
        ));
        assert!(matches!(
            modulate_analog(&[0.0; 8], Variant::Qpsk, 8),
            Err(Error::WrongFamily { .. })
        ));
    }

    #[test]
    fn insufficient_bits() {
        let cfg = ShapingConfig::default();
        assert!(modulate_linear(&[0; 10], &spec(Variant::Qpsk), &cfg, 1024).is_err());
        assert!(modulate_fsk(&[0; 10], &spec(Variant::Fsk2), &cfg, 1024).is_err());
    }

    #[test]
    fn am_sc_zero_message_is_degenerate() {
        let err = modulate_analog(&[0.0; 32], Variant::AmSc, 32).unwrap_err();
        assert!(matches!(err, Error::DegenerateSignal(_)));
    }

    #[test]
    fn angle_modulations_constant_envelope() {
        let m = make_message(512, 1).unwrap();
        for v in [Variant::Fm, Variant::Pm] {
            let w = modulate_analog(&m, v, 512).unwrap();
            let g = w.gain();
            assert!(w.samples().iter().all(|z| (z.norm() / g - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn message_statistics() {
        let m = make_message(100_000, 17).unwrap();
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m.len() as f64;
        assert!(mean.abs() <= 0.05, "{mean}");
        assert!((0.9..=1.1).contains(&var), "{var}");
        assert_eq!(make_message(16, 4).unwrap(), make_message(16, 4).unwrap());
        assert!(make_message(0, 4).is_err());
    }

    #[test]
    fn analytic_keeps_real_part() {
        let m = make_message(256, 2).unwrap();
        let a = analytic_signal(&m);
        for (z, v) in a.iter().zip(&m) {
            assert!((z.re - v).abs() < 1e-12);
        }
    }

    #[test]
    fn every_variant_synthesizes_unit_power() {
        let cfg = ShapingConfig::default();
        for v in Variant::ALL {
            let w = synthesize(&spec(v), &cfg, 1024, 77).unwrap();
            assert_eq!(w.len(), 1024);
            assert!((w.mean_power() - 1.0).abs() < 1e-9, "{v}");
        }
    }
}
