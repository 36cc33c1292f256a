//! Block-fading tapped-delay-line channels and calibrated AWGN.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::waveform::{mean_power, Waveform};
use crate::{seed, Error, Result, C64};

pub const DEFAULT_RICIAN_K: f64 = 3.0;
pub const DEFAULT_NAKAGAMI_M: f64 = 2.0;

/// Pedestrian-A relative tap powers, dB.
const PED_A_DB: [f64; 4] = [0.0, -9.7, -19.2, -22.8];
/// Vehicular-A relative tap powers, dB.
const VEH_A_DB: [f64; 6] = [0.0, -1.0, -9.0, -10.0, -15.0, -20.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelKind {
    Ideal,
    Static,
    Rayleigh,
    Rician,
    Nakagami,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 5] = [
        ChannelKind::Ideal,
        ChannelKind::Static,
        ChannelKind::Rayleigh,
        ChannelKind::Rician,
        ChannelKind::Nakagami,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<ChannelKind> {
        ChannelKind::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Ideal => "ideal",
            ChannelKind::Static => "static",
            ChannelKind::Rayleigh => "rayleigh",
            ChannelKind::Rician => "rician",
            ChannelKind::Nakagami => "nakagami",
        }
    }

    pub fn is_fading(self) -> bool {
        matches!(self, ChannelKind::Rayleigh | ChannelKind::Rician | ChannelKind::Nakagami)
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let key = key.split(['-', '_', ' ']).next().unwrap_or_default();
        ChannelKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown channel kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub rician_k: f64,
    pub nakagami_m: f64,
    pub n_taps: usize,
    pub seed: u64,
}

impl ChannelSpec {
    /// Default shape parameters; `n_taps` is ignored for single-tap kinds.
    pub fn new(kind: ChannelKind, n_taps: usize, seed: u64) -> Self {
        ChannelSpec {
            kind,
            rician_k: DEFAULT_RICIAN_K,
            nakagami_m: DEFAULT_NAKAGAMI_M,
            n_taps: if kind.is_fading() { n_taps } else { 1 },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rician_k > 0.0) {
            return Err(Error::invalid(format!("Rician k must be positive, got {}", self.rician_k)));
        }
        if !(self.nakagami_m >= 0.5) {
            return Err(Error::invalid(format!(
                "Nakagami m must be at least 0.5, got {}",
                self.nakagami_m
            )));
        }
        match (self.kind.is_fading(), self.n_taps) {
            (true, 4 | 6) | (false, 1) => Ok(()),
            (true, n) => Err(Error::invalid(format!("fading channels use 4 or 6 taps, got {n}"))),
            (false, n) => Err(Error::invalid(format!("{} channel is single-tap, got {n}", self.kind))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub kind: ChannelKind,
    pub seed: u64,
    pub taps: Vec<C64>,
    pub profile_powers: Vec<f64>,
}

impl ChannelRealization {
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|h| h.norm_sqr()).sum()
    }
}

/// Normalized linear tap powers for a 4-tap (Pedestrian-A) or 6-tap
/// (Vehicular-A) profile.
pub fn profile_for(n_taps: usize) -> Result<Vec<f64>> {
    let db: &[f64] = match n_taps {
        4 => &PED_A_DB,
        6 => &VEH_A_DB,
        n => return Err(Error::invalid(format!("no delay profile with {n} taps"))),
    };
    let lin: Vec<f64> = db.iter().map(|d| 10f64.powf(d / 10.0)).collect();
    let total: f64 = lin.iter().sum();
    Ok(lin.into_iter().map(|p| p / total).collect())
}

fn complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

fn uniform_phase<R: Rng>(rng: &mut R) -> f64 {
    rng.random::<f64>() * 2.0 * PI
}

pub fn draw_channel(spec: &ChannelSpec) -> Result<ChannelRealization> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let (taps, powers) = match spec.kind {
        ChannelKind::Ideal => (vec![C64::new(1.0, 0.0)], vec![1.0]),
        ChannelKind::Static => (vec![C64::from_polar(1.0, uniform_phase(&mut rng))], vec![1.0]),
        ChannelKind::Rayleigh => {
            let p = profile_for(spec.n_taps)?;
            (p.iter().map(|&pk| complex_gaussian(&mut rng, pk)).collect(), p)
        }
        ChannelKind::Rician => {
            let p = profile_for(spec.n_taps)?;
            let k = spec.rician_k;
            let los = C64::from_polar((p[0] * k / (k + 1.0)).sqrt(), uniform_phase(&mut rng));
            let mut taps = vec![los + complex_gaussian(&mut rng, p[0] / (k + 1.0))];
            taps.extend(p[1..].iter().map(|&pk| complex_gaussian(&mut rng, pk)));
            (taps, p)
        }
        ChannelKind::Nakagami => {
            let p = profile_for(spec.n_taps)?;
            let m = spec.nakagami_m;
            let taps = p
                .iter()
                .map(|&omega| {
                    let gamma = Gamma::new(m, omega / m)
                        .map_err(|e| Error::invalid(format!("Nakagami parameters: {e}")))?;
                    let power: f64 = gamma.sample(&mut rng);
                    Ok(C64::from_polar(power.sqrt(), uniform_phase(&mut rng)))
                })
                .collect::<Result<Vec<_>>>()?;
            (taps, p)
        }
    };
    Ok(ChannelRealization {
        kind: spec.kind,
        seed: spec.seed,
        taps,
        profile_powers: powers,
    })
}

/// Linear convolution truncated to the input length (head transient kept).
pub fn apply_channel(w: &Waveform, r: &ChannelRealization) -> Result<Waveform> {
    if r.taps.is_empty() {
        return Err(Error::invalid("channel has no taps"));
    }
    let x = w.samples();
    if x.len() < r.taps.len() {
        return Err(Error::invalid(format!(
            "waveform of {} samples is shorter than {} channel taps",
            x.len(),
            r.taps.len()
        )));
    }
    let y = (0..x.len())
        .map(|n| {
            r.taps
                .iter()
                .take(n + 1)
                .enumerate()
                .map(|(k, h)| h * x[n - k])
                .sum()
        })
        .collect();
    Ok(Waveform::new(y).with_gain(w.gain()))
}

/// Circular complex Gaussian noise of total variance `variance` per sample.
pub fn awgn(len: usize, variance: f64, seed: u64) -> Vec<C64> {
    let mut rng = seed::rng(seed);
    (0..len).map(|_| complex_gaussian(&mut rng, variance)).collect()
}

/// Adds noise at `snr_db` relative to the measured input power. An infinite
/// SNR returns the input unchanged.
pub fn add_awgn(w: &Waveform, snr_db: f64, seed: u64) -> Result<Waveform> {
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR is NaN"));
    }
    let p = mean_power(w.samples());
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::DegenerateSignal(format!(
            "cannot reference noise to signal power {p}"
        )));
    }
    if snr_db == f64::INFINITY {
        return Ok(w.clone());
    }
    let variance = p / 10f64.powf(snr_db / 10.0);
    let noise = awgn(w.len(), variance, seed);
    let y = w.samples().iter().zip(noise).map(|(s, n)| s + n).collect();
    Ok(Waveform::new(y).with_gain(w.gain()))
}
