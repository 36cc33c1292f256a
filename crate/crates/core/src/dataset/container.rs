//! The `HisarIQ` binary container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "HIQ1" | version u16 | count u64 | samples_per_record u32
//! per record: modulation u16 | family u8 | channel u8 | snr i16 | reserved u16
//!             | seed u64 | samples_per_record x (I f32, Q f32)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{IqRecord, ModulationId, CHANNEL_UNKNOWN_UPSTREAM};
use crate::channel::ChannelKind;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HIQ1";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: u64 = 18;
pub const RECORD_HEADER_BYTES: u64 = 16;

pub fn record_bytes(samples_per_record: u32) -> u64 {
    RECORD_HEADER_BYTES + 8 * samples_per_record as u64
}

/// Streaming writer; the record count is fixed up front.
pub struct ContainerWriter<W: Write> {
    out: W,
    count: u64,
    written: u64,
    samples_per_record: u32,
}

impl<W: Write> ContainerWriter<W> {
    pub fn new(mut out: W, count: u64, samples_per_record: u32) -> Result<Self> {
        let mut head = Vec::with_capacity(HEADER_BYTES as usize);
        head.extend_from_slice(MAGIC);
        head.extend_from_slice(&VERSION.to_le_bytes());
        head.extend_from_slice(&count.to_le_bytes());
        head.extend_from_slice(&samples_per_record.to_le_bytes());
        out.write_all(&head).map_err(Error::io("writing container header"))?;
        Ok(ContainerWriter { out, count, written: 0, samples_per_record })
    }

    pub fn write(&mut self, r: &IqRecord) -> Result<()> {
        if self.written == self.count {
            return Err(Error::invalid(format!("container already holds {} records", self.count)));
        }
        if r.samples.len() != self.samples_per_record as usize {
            return Err(Error::invalid(format!(
                "record has {} samples, container stores {}",
                r.samples.len(),
                self.samples_per_record
            )));
        }
        let mut buf = Vec::with_capacity(record_bytes(self.samples_per_record) as usize);
        buf.extend_from_slice(&r.modulation.0.to_le_bytes());
        buf.push(r.family);
        buf.push(r.channel);
        buf.extend_from_slice(&r.snr_db.to_le_bytes());
        buf.extend_from_slice(&0u16.to_le_bytes());
        buf.extend_from_slice(&r.seed.to_le_bytes());
        for s in &r.samples {
            buf.extend_from_slice(&s.re.to_le_bytes());
            buf.extend_from_slice(&s.im.to_le_bytes());
        }
        self.out.write_all(&buf).map_err(Error::io("writing record"))?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.count {
            return Err(Error::invalid(format!(
                "container declared {} records but {} were written",
                self.count, self.written
            )));
        }
        self.out.flush().map_err(Error::io("flushing container"))?;
        Ok(self.out)
    }
}

pub fn encode(records: &[IqRecord], samples_per_record: u32) -> Result<Vec<u8>> {
    let mut w = ContainerWriter::new(Vec::new(), records.len() as u64, samples_per_record)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

/// Samples per record inferred from the first record (0 for an empty list).
pub fn save_container(records: &[IqRecord], path: &Path) -> Result<()> {
    let spr = records.first().map_or(0, |r| r.samples.len() as u32);
    let file = File::create(path).map_err(Error::io(format!("creating {}", path.display())))?;
    let mut w = ContainerWriter::new(BufWriter::new(file), records.len() as u64, spr)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub samples_per_record: u32,
    pub records: Vec<IqRecord>,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Parse {
                offset: self.data.len() as u64,
                message: format!("truncated {what}: need {n} bytes at offset {}", self.pos),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

pub fn decode(data: &[u8]) -> Result<Container> {
    let mut c = Cursor { data, pos: 0 };
    let magic = c.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad magic {magic:?}, expected \"HIQ1\""),
        });
    }
    let version = u16::from_le_bytes(c.array("version")?);
    if version != VERSION {
        return Err(Error::Parse {
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let count = u64::from_le_bytes(c.array("record count")?);
    let spr = u32::from_le_bytes(c.array("samples per record")?);
    let available = (data.len() as u64 - HEADER_BYTES) / record_bytes(spr);
    if count > available {
        return Err(Error::Parse {
            offset: data.len() as u64,
            message: format!("header declares {count} records but only {available} fit"),
        });
    }
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let start = c.pos as u64;
        let modulation = ModulationId(u16::from_le_bytes(c.array("modulation id")?));
        let family = c.take(1, "family")?[0];
        let channel = c.take(1, "channel")?[0];
        let snr_db = i16::from_le_bytes(c.array("snr")?);
        c.take(2, "reserved")?;
        let seed = u64::from_le_bytes(c.array("seed")?);
        match modulation.family() {
            Some(f) if f.id() == family => {}
            _ => {
                return Err(Error::Parse {
                    offset: start,
                    message: format!("modulation id {} with family id {family}", modulation.0),
                })
            }
        }
        if ChannelKind::from_id(channel).is_none() && channel != CHANNEL_UNKNOWN_UPSTREAM {
            return Err(Error::Parse {
                offset: start + 3,
                message: format!("unknown channel id {channel}"),
            });
        }
        let raw = c.take(8 * spr as usize, "samples")?;
        let samples = raw
            .chunks_exact(8)
            .map(|p| {
                num_complex::Complex::new(
                    f32::from_le_bytes(p[..4].try_into().expect("4 bytes")),
                    f32::from_le_bytes(p[4..].try_into().expect("4 bytes")),
                )
            })
            .collect();
        records.push(IqRecord { samples, modulation, family, channel, snr_db, seed });
    }
    if c.pos != data.len() {
        return Err(Error::Parse {
            offset: c.pos as u64,
            message: format!("{} trailing bytes", data.len() - c.pos),
        });
    }
    Ok(Container { samples_per_record: spr, records })
}

pub fn load_container(path: &Path) -> Result<Container> {
    let mut data = Vec::new();
    File::open(path)
        .map(BufReader::new)
        .and_then(|mut r| r.read_to_end(&mut data))
        .map_err(Error::io(format!("reading {}", path.display())))?;
    decode(&data)
}
