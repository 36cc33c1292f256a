//! Stratified train/validation/test splits.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use super::CellKey;
use crate::{seed, Error, Result};

/// An exact non-negative rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::invalid("ratio with zero denominator"));
        }
        let g = gcd(num, den);
        Ok(Ratio { num: num / g, den: den / g })
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

impl FromStr for Ratio {
    type Err = Error;

    /// Accepts `a/b`, integers and plain decimals.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("cannot parse ratio '{s}'"));
        if let Some((a, b)) = s.split_once('/') {
            let a = a.trim().parse().map_err(|_| bad())?;
            let b = b.trim().parse().map_err(|_| bad())?;
            return Ratio::new(a, b);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10u64.pow(frac.len() as u32);
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        Ratio::new(int * den + frac, den)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Train / validation / test proportions, summing to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRatios(pub [Ratio; 3]);

impl SplitRatios {
    pub fn new(train: Ratio, val: Ratio, test: Ratio) -> Result<Self> {
        let r = SplitRatios([train, val, test]);
        let (nums, den) = r.common();
        if nums.iter().sum::<u128>() != den {
            return Err(Error::invalid(format!("split ratios {r} do not sum to 1")));
        }
        Ok(r)
    }

    /// The 8/15, 2/15, 5/15 split.
    pub fn standard() -> Self {
        SplitRatios::from_str("8/15,2/15,5/15").expect("valid ratios")
    }

    fn common(&self) -> ([u128; 3], u128) {
        let den = self.0.iter().fold(1u128, |acc, r| {
            let d = r.den as u128;
            acc / gcd128(acc, d) * d
        });
        (self.0.map(|r| r.num as u128 * (den / r.den as u128)), den)
    }
}

fn gcd128(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd128(b, a % b)
    }
}

impl FromStr for SplitRatios {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<Ratio> = s.split(',').map(str::parse).collect::<Result<_>>()?;
        match parts[..] {
            [a, b, c] => SplitRatios::new(a, b, c),
            [a, b] => SplitRatios::new(a, b, Ratio::new(0, 1)?),
            _ => Err(Error::invalid(format!("expected 2 or 3 split ratios, got '{s}'"))),
        }
    }
}

impl fmt::Display for SplitRatios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<u64>,
    pub val: Vec<u64>,
    pub test: Vec<u64>,
}

impl Splits {
    pub fn parts(&self) -> [(&'static str, &[u64]); 3] {
        [("train", &self.train), ("val", &self.val), ("test", &self.test)]
    }
}

fn cell_seed(master: u64, cell: &CellKey) -> u64 {
    let packed = ((cell.modulation.0 as u64) << 24)
        | (((cell.snr_db as u16) as u64) << 8)
        | cell.channel as u64;
    seed::derive(master, packed)
}

/// Splits record indices stratified by cell.
///
/// Cells are visited in key order and apportioned cumulatively: a cell that
/// covers positions `[a, b)` of the running total gets
/// `floor(b * r) - floor(a * r)` training records. The records left over are
/// apportioned the same way between validation and test using
/// `val / (val + test)`. Totals are exact and each cell stays within a record
/// of its ideal share. Records inside a cell are shuffled with a seed derived
/// from `(seed, cell)` before assignment.
///
/// Fails with [`Error::Stratification`] when a split with a nonzero ratio
/// would end up empty.
pub fn split_records(cells: &[CellKey], ratios: &SplitRatios, seed: u64) -> Result<Splits> {
    let mut groups: BTreeMap<CellKey, Vec<u64>> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        groups.entry(*c).or_default().push(i as u64);
    }
    let (nums, den) = ratios.common();
    let rest = nums[1] + nums[2];
    let mut out = Splits::default();
    let (mut pos, mut pos_rest) = (0u128, 0u128);
    for (cell, mut ids) in groups {
        ids.shuffle(&mut seed::rng(cell_seed(seed, &cell)));
        let end = pos + ids.len() as u128;
        let n_train = (end * nums[0] / den - pos * nums[0] / den) as usize;
        let left = ids.len() - n_train;
        let end_rest = pos_rest + left as u128;
        let n_val = if rest == 0 {
            0
        } else {
            (end_rest * nums[1] / rest - pos_rest * nums[1] / rest) as usize
        };
        out.train.extend_from_slice(&ids[..n_train]);
        out.val.extend_from_slice(&ids[n_train..n_train + n_val]);
        out.test.extend_from_slice(&ids[n_train + n_val..]);
        pos = end;
        pos_rest = end_rest;
    }
    for ((name, part), r) in out.parts().into_iter().zip(ratios.0) {
        if part.is_empty() && !r.is_zero() {
            return Err(Error::Stratification(format!(
                "{} records are too few to give the {name} split ({r}) any record",
                cells.len()
            )));
        }
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

pub fn write_index_file(path: &Path, ids: &[u64]) -> Result<()> {
    let mut text = String::with_capacity(ids.len() * 7);
    for id in ids {
        text.push_str(&id.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(Error::io(format!("writing {}", path.display())))
}

pub fn read_index_file(path: &Path) -> Result<Vec<u64>> {
    let text =
        fs::read_to_string(path).map_err(Error::io(format!("reading {}", path.display())))?;
    let mut offset = 0u64;
    let mut ids = Vec::new();
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if !t.is_empty() {
            ids.push(t.parse().map_err(|_| Error::Parse {
                offset,
                message: format!("bad record index '{t}' in {}", path.display()),
            })?);
        }
        offset += line.len() as u64;
    }
    Ok(ids)
}
