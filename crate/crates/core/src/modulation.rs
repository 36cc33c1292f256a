//! The modulation catalogue, constellations and bit mapping.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::{seed, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Analog,
    Fsk,
    Pam,
    Psk,
    Qam,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Analog, Family::Fsk, Family::Pam, Family::Psk, Family::Qam];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Family> {
        Family::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Analog => "Analog",
            Family::Fsk => "FSK",
            Family::Pam => "PAM",
            Family::Psk => "PSK",
            Family::Qam => "QAM",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

macro_rules! variants {
    ($($v:ident => $name:literal, $family:ident, $order:literal;)*) => {
        /// The 26 synthesizable modulation types, in catalogue order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Variant { $($v),* }

        impl Variant {
            pub const ALL: [Variant; 26] = [$(Variant::$v),*];

            pub fn name(self) -> &'static str {
                match self { $(Variant::$v => $name),* }
            }

            pub fn family(self) -> Family {
                match self { $(Variant::$v => Family::$family),* }
            }

            /// Constellation / alphabet size; 1 for analog.
            pub fn order(self) -> usize {
                match self { $(Variant::$v => $order),* }
            }
        }
    };
}

variants! {
    AmDsb => "AM-DSB", Analog, 1;
    AmSc => "AM-SC", Analog, 1;
    AmUsb => "AM-USB", Analog, 1;
    AmLsb => "AM-LSB", Analog, 1;
    Fm => "FM", Analog, 1;
    Pm => "PM", Analog, 1;
    Fsk2 => "2-FSK", Fsk, 2;
    Fsk4 => "4-FSK", Fsk, 4;
    Fsk8 => "8-FSK", Fsk, 8;
    Fsk16 => "16-FSK", Fsk, 16;
    Pam4 => "4-PAM", Pam, 4;
    Pam8 => "8-PAM", Pam, 8;
    Pam16 => "16-PAM", Pam, 16;
    Bpsk => "BPSK", Psk, 2;
    Qpsk => "QPSK", Psk, 4;
    Psk8 => "8-PSK", Psk, 8;
    Psk16 => "16-PSK", Psk, 16;
    Psk32 => "32-PSK", Psk, 32;
    Psk64 => "64-PSK", Psk, 64;
    Qam4 => "4-QAM", Qam, 4;
    Qam8 => "8-QAM", Qam, 8;
    Qam16 => "16-QAM", Qam, 16;
    Qam32 => "32-QAM", Qam, 32;
    Qam64 => "64-QAM", Qam, 64;
    Qam128 => "128-QAM", Qam, 128;
    Qam256 => "256-QAM", Qam, 256;
}

fn normalize_name(s: &str) -> String {
    s.trim()
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '_' | '\u{2013}' | '\u{2014}' => '-',
            c => c.to_ascii_uppercase(),
        })
        .collect()
}

impl Variant {
    pub fn id(self) -> u16 {
        self as u16
    }

    pub fn from_id(id: u16) -> Option<Variant> {
        Variant::ALL.get(id as usize).copied()
    }

    pub fn is_digital_linear(self) -> bool {
        matches!(self.family(), Family::Pam | Family::Psk | Family::Qam)
    }

    pub fn in_family(family: Family) -> impl Iterator<Item = Variant> {
        Variant::ALL.into_iter().filter(move |v| v.family() == family)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = normalize_name(s);
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown modulation variant '{s}'")))
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Family of a variant name.
pub fn family_of(variant: &str) -> Result<Family> {
    Ok(variant.parse::<Variant>()?.family())
}

/// A validated modulation choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModulationSpec {
    variant: Variant,
}

impl ModulationSpec {
    pub fn new(variant: Variant) -> Self {
        ModulationSpec { variant }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn family(&self) -> Family {
        self.variant.family()
    }

    pub fn order(&self) -> usize {
        self.variant.order()
    }

    /// `log2(order)`; zero for analog.
    pub fn bits_per_symbol(&self) -> usize {
        self.order().trailing_zeros() as usize
    }

    pub(crate) fn require(&self, allowed: &[Family], expected: &str) -> Result<()> {
        if allowed.contains(&self.family()) {
            Ok(())
        } else {
            Err(Error::WrongFamily {
                variant: self.variant.name().into(),
                family: self.family().name().into(),
                expected: expected.into(),
            })
        }
    }
}

impl FromStr for ModulationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(ModulationSpec::new(s.parse()?))
    }
}

impl From<Variant> for ModulationSpec {
    fn from(v: Variant) -> Self {
        ModulationSpec::new(v)
    }
}

pub fn gray(n: usize) -> usize {
    n ^ (n >> 1)
}

pub fn gray_inverse(mut g: usize) -> usize {
    let mut n = g;
    while g > 0 {
        g >>= 1;
        n ^= g;
    }
    n
}

/// Amplitude of position `p` on an `m`-level axis: `m-1, m-3, ..., -(m-1)`.
fn axis_level(p: usize, m: usize) -> f64 {
    (m as f64 - 1.0) - 2.0 * p as f64
}

/// Constellation points indexed by symbol value, scaled to unit mean energy.
///
/// * PSK: position `p` at phase `2 pi p / M`, labelled `gray(p)`.
/// * PAM: real levels `M-1 ... -(M-1)`, Gray labelled.
/// * Square QAM (4/16/64/256): Gray PAM on each axis, high bits on I.
/// * 8-QAM: 4x2 rectangle, Gray on each axis (the cross construction
///   degenerates to a rectangle at this order).
/// * Cross QAM (32/128): odd-integer square grid of side 6 / 12 with the
///   corner blocks removed, labelled in row-major order (not Gray).
pub fn constellation(spec: &ModulationSpec) -> Result<Vec<C64>> {
    spec.require(&[Family::Pam, Family::Psk, Family::Qam], "PAM, PSK or QAM")?;
    let m = spec.order();
    let mut pts = vec![C64::new(0.0, 0.0); m];
    match spec.family() {
        Family::Psk => {
            for p in 0..m {
                let phase = 2.0 * std::f64::consts::PI * p as f64 / m as f64;
                pts[gray(p)] = C64::from_polar(1.0, phase);
            }
        }
        Family::Pam => {
            for p in 0..m {
                pts[gray(p)] = C64::new(axis_level(p, m), 0.0);
            }
        }
        Family::Qam => match m {
            4 | 16 | 64 | 256 => rectangular(&mut pts, m.isqrt(), m.isqrt()),
            8 => rectangular(&mut pts, 4, 2),
            32 | 128 => {
                let side = if m == 32 { 6 } else { 12 };
                let cut = if m == 32 { 1 } else { 2 };
                let mut v = 0;
                for qi in 0..side {
                    for ii in 0..side {
                        let corner_i = ii < cut || ii >= side - cut;
                        let corner_q = qi < cut || qi >= side - cut;
                        if corner_i && corner_q {
                            continue;
                        }
                        pts[v] = C64::new(-axis_level(ii, side), axis_level(qi, side));
                        v += 1;
                    }
                }
                debug_assert_eq!(v, m);
            }
            _ => unreachable!("catalogue has no {m}-QAM"),
        },
        _ => unreachable!(),
    }
    let energy = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
    let scale = 1.0 / energy.sqrt();
    Ok(pts.into_iter().map(|p| p * scale).collect())
}

fn rectangular(pts: &mut [C64], i_levels: usize, q_levels: usize) {
    let q_bits = q_levels.trailing_zeros();
    for pi in 0..i_levels {
        for pq in 0..q_levels {
            let v = (gray(pi) << q_bits) | gray(pq);
            pts[v] = C64::new(axis_level(pi, i_levels), axis_level(pq, q_levels));
        }
    }
}

/// `count` i.i.d. uniform bits (values 0/1), reproducible per seed.
pub fn generate_bits(count: usize, seed: u64) -> Result<Vec<u8>> {
    if count == 0 {
        return Err(Error::invalid("bit count must be positive"));
    }
    let mut rng = seed::rng(seed);
    let mut bits = Vec::with_capacity(count);
    while bits.len() < count {
        let word: u64 = rng.random();
        let take = (count - bits.len()).min(64);
        bits.extend((0..take).map(|i| ((word >> i) & 1) as u8));
    }
    Ok(bits)
}

pub(crate) fn bits_to_values(bits: &[u8], k: usize) -> Result<Vec<usize>> {
    if k == 0 || bits.len() % k != 0 {
        return Err(Error::invalid(format!(
            "{} bits do not divide into {k}-bit symbols",
            bits.len()
        )));
    }
    bits.chunks_exact(k)
        .map(|chunk| {
            chunk.iter().try_fold(0usize, |acc, &b| match b {
                0 | 1 => Ok((acc << 1) | b as usize),
                other => Err(Error::invalid(format!("bit value {other} is not 0 or 1"))),
            })
        })
        .collect()
}

pub(crate) fn values_to_bits(values: &[usize], k: usize) -> Vec<u8> {
    values
        .iter()
        .flat_map(|&v| (0..k).rev().map(move |i| ((v >> i) & 1) as u8))
        .collect()
}

/// Maps bits (MSB first within each symbol) to constellation points.
pub fn map_symbols(bits: &[u8], spec: &ModulationSpec) -> Result<Vec<C64>> {
    let pts = constellation(spec)?;
    Ok(bits_to_values(bits, spec.bits_per_symbol())?
        .into_iter()
        .map(|v| pts[v])
        .collect())
}

/// Index of the nearest point; the lowest index wins exact ties.
pub fn nearest_point(points: &[C64], z: C64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (z - p).norm_sqr();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Minimum-distance hard decisions back to bits.
pub fn demap_symbols(symbols: &[C64], spec: &ModulationSpec) -> Result<Vec<u8>> {
    if symbols.is_empty() {
        return Err(Error::invalid("no symbols to demap"));
    }
    let pts = constellation(spec)?;
    let values: Vec<usize> = symbols.iter().map(|&z| nearest_point(&pts, z)).collect();
    Ok(values_to_bits(&values, spec.bits_per_symbol()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_counts() {
        let count = |f| Variant::in_family(f).count();
        assert_eq!(Variant::ALL.len(), 26);
        assert_eq!(
            [Family::Analog, Family::Fsk, Family::Pam, Family::Psk, Family::Qam].map(count),
            [6, 4, 3, 6, 7]
        );
        for v in Variant::ALL {
            if v.family() != Family::Analog {
                assert!(v.order().is_power_of_two());
            }
            assert_eq!(Variant::from_id(v.id()), Some(v));
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn family_lookup() {
        assert_eq!(family_of("AM-LSB").unwrap(), Family::Analog);
        assert_eq!(family_of("16-FSK").unwrap(), Family::Fsk);
        assert_eq!(family_of("256-QAM").unwrap(), Family::Qam);
        assert_eq!(family_of("qpsk").unwrap(), Family::Psk);
        assert_eq!(family_of("AM\u{2013}DSB").unwrap(), Family::Analog);
        assert!(family_of("OFDM").is_err());
        assert!(family_of("512-QAM").is_err());
    }

    #[test]
    fn bpsk_is_antipodal() {
        let s = map_symbols(&[0, 1], &Variant::Bpsk.into()).unwrap();
        assert!((s[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((s[1] - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn qam4_first_point() {
        let s = map_symbols(&[0, 0], &Variant::Qam4.into()).unwrap();
        let want = C64::new(1.0, 1.0) / 2f64.sqrt();
        assert!((s[0] - want).norm() < 1e-15);
    }

    #[test]
    fn qam16_scale_from_grid_energy() {
        // Oracle: enumerate the {+-1,+-3}^2 grid directly.
        let mut e = 0.0;
        for i in [-3.0f64, -1.0, 1.0, 3.0] {
            for q in [-3.0f64, -1.0, 1.0, 3.0] {
                e += i * i + q * q;
            }
        }
        let scale = 1.0 / (e / 16.0).sqrt();
        assert!((scale - 1.0 / 10f64.sqrt()).abs() < 1e-15);
        let pts = constellation(&Variant::Qam16.into()).unwrap();
        let max_i = pts.iter().map(|p| p.re).fold(f64::MIN, f64::max);
        assert!((max_i - 3.0 * scale).abs() < 1e-15);
    }

    #[test]
    fn cross_qam_shapes() {
        for (v, side_max) in [(Variant::Qam32, 5.0), (Variant::Qam128, 11.0)] {
            let pts = constellation(&v.into()).unwrap();
            let scale = pts.iter().map(|p| p.re.abs()).fold(0.0, f64::max) / side_max;
            let raw: Vec<(i64, i64)> = pts
                .iter()
                .map(|p| ((p.re / scale).round() as i64, (p.im / scale).round() as i64))
                .collect();
            let mut uniq = raw.clone();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), v.order());
            // no outer corner point
            let m = side_max as i64;
            assert!(!raw.contains(&(m, m)) && !raw.contains(&(-m, -m)));
        }
    }

    #[test]
    fn wrong_family_and_divisibility() {
        assert!(matches!(
            map_symbols(&[0, 1], &Variant::Fsk2.into()),
            Err(Error::WrongFamily { .. })
        ));
        assert!(matches!(
            map_symbols(&[0, 1, 1], &Variant::Qpsk.into()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(demap_symbols(&[], &Variant::Qpsk.into()).is_err());
    }

    #[test]
    fn demap_tie_goes_to_lowest_index() {
        // The origin is equidistant from both BPSK points.
        let bits = demap_symbols(&[C64::new(0.0, 0.0)], &Variant::Bpsk.into()).unwrap();
        assert_eq!(bits, vec![0]);
        // and from all four QPSK points
        let bits = demap_symbols(&[C64::new(0.0, 0.0)], &Variant::Qpsk.into()).unwrap();
        assert_eq!(bits, vec![0, 0]);
    }

    #[test]
    fn bits_reproducible() {
        assert_eq!(generate_bits(8, 5).unwrap(), generate_bits(8, 5).unwrap());
        let one = generate_bits(1, 5).unwrap();
        assert!(one.len() == 1 && one[0] <= 1);
        assert!(generate_bits(0, 5).is_err());
    }

    #[test]
    fn bit_balance_million() {
        // Binomial(1e6, 1/2): sd = 500 ones = 0.0005; [0.497, 0.503] is +-6 sd.
        let bits = generate_bits(1_000_000, 99).unwrap();
        let frac = bits.iter().map(|&b| b as f64).sum::<f64>() / 1e6;
        assert!((0.497..=0.503).contains(&frac), "{frac}");
    }

    #[test]
    fn gray_inverse_roundtrip() {
        for n in 0..1024 {
            assert_eq!(gray_inverse(gray(n)), n);
        }
    }
}
