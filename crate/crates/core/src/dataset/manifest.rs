//! The `manifest.txt` sidecar: UTF-8 `key=value` lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CellKey, ModulationId, CHANNEL_UNKNOWN_UPSTREAM};
use crate::channel::ChannelKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    /// `native` for generated data; converters name their upstream.
    pub source: String,
    pub record_count: u64,
    pub samples_per_record: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub cells: BTreeMap<CellKey, u64>,
    /// Split name to index file, relative to the manifest.
    pub splits: BTreeMap<String, String>,
    /// Any other keys, preserved in order of key.
    pub extra: BTreeMap<String, String>,
}

pub fn channel_name(id: u8) -> String {
    match ChannelKind::from_id(id) {
        Some(k) => k.name().to_string(),
        None if id == CHANNEL_UNKNOWN_UPSTREAM => "unknown-upstream".to_string(),
        None => format!("channel-{id}"),
    }
}

pub fn channel_id(name: &str) -> Result<u8> {
    if name.trim() == "unknown-upstream" {
        return Ok(CHANNEL_UNKNOWN_UPSTREAM);
    }
    Ok(name.parse::<ChannelKind>()?.id())
}

impl DatasetManifest {
    /// True when every cell holds the same number of records.
    pub fn is_uniform(&self) -> bool {
        let mut counts = self.cells.values();
        match counts.next() {
            Some(first) => counts.all(|c| c == first),
            None => true,
        }
    }

    pub fn cell_total(&self) -> u64 {
        self.cells.values().sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format=HisarIQ");
        let _ = writeln!(s, "source={}", self.source);
        let _ = writeln!(s, "records={}", self.record_count);
        let _ = writeln!(s, "samples_per_record={}", self.samples_per_record);
        let _ = writeln!(s, "master_seed={}", self.master_seed);
        let _ = writeln!(s, "config_hash={}", self.config_hash);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k}={v}");
        }
        for (name, file) in &self.splits {
            let _ = writeln!(s, "split.{name}={file}");
        }
        for (cell, n) in &self.cells {
            let _ = writeln!(
                s,
                "cell={},{},{},{n}",
                cell.modulation.name(),
                cell.snr_db,
                channel_name(cell.channel)
            );
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = DatasetManifest::default();
        let mut offset = 0u64;
        for line in text.split_inclusive('\n') {
            let at = offset;
            offset += line.len() as u64;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { offset: at, message };
            let (key, value) = t
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got '{t}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |what: &str| err(format!("bad {what} '{value}'"));
            match key {
                "format" if value != "HisarIQ" => return Err(err(format!("unknown format '{value}'"))),
                "format" => {}
                "source" => m.source = value.to_string(),
                "records" => m.record_count = value.parse().map_err(|_| num("record count"))?,
                "samples_per_record" => {
                    m.samples_per_record = value.parse().map_err(|_| num("sample count"))?
                }
                "master_seed" => m.master_seed = value.parse().map_err(|_| num("seed"))?,
                "config_hash" => m.config_hash = value.to_string(),
                "cell" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    let [modulation, snr, channel, count] = parts[..] else {
                        return Err(err(format!("cell needs 4 fields, got '{value}'")));
                    };
                    let key = CellKey {
                        modulation: ModulationId::from_name(modulation)
                            .map_err(|e| err(e.to_string()))?,
                        snr_db: snr.parse().map_err(|_| err(format!("bad SNR '{snr}'")))?,
                        channel: channel_id(channel).map_err(|e| err(e.to_string()))?,
                    };
                    let n = count.parse().map_err(|_| err(format!("bad count '{count}'")))?;
                    if m.cells.insert(key, n).is_some() {
                        return Err(err(format!("duplicate cell '{value}'")));
                    }
                }
                k => match k.strip_prefix("split.") {
                    Some(name) => {
                        m.splits.insert(name.to_string(), value.to_string());
                    }
                    None => {
                        m.extra.insert(k.to_string(), value.to_string());
                    }
                },
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(Error::io(format!("writing {}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(Error::io(format!("reading {}", path.display())))?;
        DatasetManifest::parse(&text)
    }
}
