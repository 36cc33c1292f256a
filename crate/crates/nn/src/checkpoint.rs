//! `HIQW` weight checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "HIQW" | version u16 | entry count u16
//! per entry: name length u16 | UTF-8 name | rank u8 | dims u32 x rank | f32 values
//! ```

use std::fs;
use std::path::Path;

use crate::{NnError, Real, Result, Tensor};

pub const MAGIC: &[u8; 4] = b"HIQW";
pub const VERSION: u16 = 1;

pub fn encode<T: Real>(entries: &[(String, &Tensor<T>)]) -> Result<Vec<u8>> {
    let count = u16::try_from(entries.len())
        .map_err(|_| NnError::InvalidArgument("too many tensors for a checkpoint".into()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for (name, t) in entries {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len())
            .map_err(|_| NnError::InvalidArgument(format!("tensor name too long: {name}")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(bytes);
        let rank = u8::try_from(t.shape().len())
            .map_err(|_| NnError::InvalidArgument(format!("rank too large for {name}")))?;
        out.push(rank);
        for &d in t.shape() {
            let d = u32::try_from(d)
                .map_err(|_| NnError::InvalidArgument(format!("dimension too large for {name}")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&(v.to_f64().unwrap_or(f64::NAN) as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(NnError::Checkpoint {
                offset: self.pos as u64,
                message: format!("truncated while reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(NnError::Checkpoint {
            offset: 0,
            message: "bad magic, expected \"HIQW\"".into(),
        });
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(NnError::Checkpoint {
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let count = r.u16("entry count")?;
    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let at = r.pos as u64;
        let len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| NnError::Checkpoint {
                offset: at,
                message: "tensor name is not UTF-8".into(),
            })?
            .to_string();
        let rank = r.take(1, "rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(r.take(4, "dims")?.try_into().unwrap()) as usize);
        }
        let n: usize = shape.iter().product();
        let at = r.pos as u64;
        let raw = r.take(n * 4, &format!("values of '{name}'"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::from_vec(&shape, data).map_err(|e| NnError::Checkpoint {
            offset: at,
            message: format!("tensor '{name}': {e}"),
        })?;
        entries.push((name, t));
    }
    if r.pos != buf.len() {
        return Err(NnError::Checkpoint {
            offset: r.pos as u64,
            message: "trailing bytes after last tensor".into(),
        });
    }
    Ok(entries)
}

pub fn save<T: Real>(path: &Path, entries: &[(String, &Tensor<T>)]) -> Result<()> {
    fs::write(path, encode(entries)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = Tensor::<f64>::from_vec(&[2, 3], vec![0.5, -1.0, 2.25, 3.0, 0.0, -7.5]).unwrap();
        let b = Tensor::<f64>::from_vec(&[1], vec![9.0]).unwrap();
        let bytes = encode(&[("conv1.weight".to_string(), &a), ("conv1.bias".to_string(), &b)]).unwrap();
        let back = decode(&bytes).unwrap();
        assert_eq!(back[0].0, "conv1.weight");
        assert_eq!(back[0].1, a.cast::<f32>());
        assert_eq!(back[1].1.data(), &[9.0f32]);
    }

    #[test]
    fn header_errors() {
        let t = Tensor::<f32>::filled(&[2], 1.0);
        let good = encode(&[("w".to_string(), &t)]).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(NnError::Checkpoint { offset: 0, .. })));
        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(decode(&bad), Err(NnError::Checkpoint { offset: 4, .. })));
        assert!(decode(&good[..good.len() - 1]).is_err());
    }
}
