//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use amc_core::C64;
use std::f64::consts::PI;

/// Textbook raised cosine, written separately from the library version.
pub fn rc_oracle(t: f64, beta: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if beta > 0.0 && (t.abs() - 1.0 / (2.0 * beta)).abs() < 1e-12 {
        let x = PI / (2.0 * beta);
        return PI / 4.0 * x.sin() / x;
    }
    (PI * t).sin() / (PI * t) * (PI * beta * t).cos() / (1.0 - 4.0 * beta * beta * t * t)
}

/// `y[n] = sum_k h[k] x[n-k]`, full length.
pub fn convolve(x: &[C64], h: &[C64]) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); x.len() + h.len() - 1];
    for (i, xi) in x.iter().enumerate() {
        for (k, hk) in h.iter().enumerate() {
            y[i + k] += xi * hk;
        }
    }
    y
}

/// O(n^2) DFT.
pub fn dft(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| v * C64::from_polar(1.0, -2.0 * PI * (k * t) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Fraction of spectral energy in bins strictly above n/2 (negative
/// frequencies), DC and Nyquist excluded from both sides.
pub fn negative_frequency_fraction(x: &[C64]) -> f64 {
    let spec = dft(x);
    let n = spec.len();
    let (mut neg, mut total) = (0.0, 0.0);
    for (k, s) in spec.iter().enumerate() {
        if k == 0 || 2 * k == n {
            continue;
        }
        total += s.norm_sqr();
        if 2 * k > n {
            neg += s.norm_sqr();
        }
    }
    neg / total
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic 1% critical value for the two-sample KS test.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    // c(alpha) = sqrt(-ln(alpha / 2) / 2)
    let c = (-(0.01f64 / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// Empirical SNR in dB from a clean signal and its noisy version.
pub fn measured_snr_db(clean: &[C64], noisy: &[C64]) -> f64 {
    let ps: f64 = clean.iter().map(|c| c.norm_sqr()).sum();
    let pn: f64 = clean.iter().zip(noisy).map(|(c, y)| (y - c).norm_sqr()).sum();
    10.0 * (ps / pn).log10()
}
