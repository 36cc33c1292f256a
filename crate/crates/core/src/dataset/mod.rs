//! Dataset assembly: record plan, parallel generation, the container and
//! manifest files, and stratified splits.

pub mod container;
pub mod manifest;
pub mod split;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::channel::{add_awgn, apply_channel, draw_channel, ChannelKind, ChannelRealization, ChannelSpec};
use crate::modulation::{Family, ModulationSpec, Variant};
use crate::seed::{self, Stream};
use crate::shaping::ShapingConfig;
use crate::synth::synthesize;
use crate::waveform::DEFAULT_SAMPLES;
use crate::{Error, Result};

pub use container::{load_container, save_container, Container, ContainerWriter};
pub use manifest::DatasetManifest;
pub use split::{split_records, Ratio, SplitRatios, Splits};

pub type C32 = num_complex::Complex<f32>;

pub const CONTAINER_FILE: &str = "dataset.hiq";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CHANNEL_LOG_FILE: &str = "channels.txt";

/// Channel id stored for records whose channel is not known (converted data).
pub const CHANNEL_UNKNOWN_UPSTREAM: u8 = 255;

/// -20, -18, ..., 18 dB.
pub const SNR_GRID: [i16; 20] = {
    let mut g = [0i16; 20];
    let mut i = 0;
    while i < 20 {
        g[i] = -20 + 2 * i as i16;
        i += 1;
    }
    g
};

pub const FULL_SIGNALS_PER_CELL: usize = 300;
pub const DESK_SIGNALS_PER_CELL: usize = 2;

/// Modulation id as stored in the container: 0..=25 follow [`Variant::ALL`],
/// 26..=28 are upstream-only classes found in converted RadioML data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModulationId(pub u16);

const UPSTREAM: [(&str, Family); 3] =
    [("WBFM", Family::Analog), ("GFSK", Family::Fsk), ("CPFSK", Family::Fsk)];

impl ModulationId {
    pub fn variant(self) -> Option<Variant> {
        Variant::from_id(self.0)
    }

    fn upstream(self) -> Option<(&'static str, Family)> {
        (self.0 as usize).checked_sub(Variant::ALL.len()).and_then(|i| UPSTREAM.get(i).copied())
    }

    pub fn family(self) -> Option<Family> {
        self.variant().map(Variant::family).or_else(|| self.upstream().map(|u| u.1))
    }

    pub fn name(self) -> String {
        match (self.variant(), self.upstream()) {
            (Some(v), _) => v.name().to_string(),
            (None, Some(u)) => u.0.to_string(),
            _ => format!("mod-{}", self.0),
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        if let Ok(v) = name.parse::<Variant>() {
            return Ok(v.into());
        }
        let key = name.trim().to_ascii_uppercase();
        UPSTREAM
            .iter()
            .position(|u| u.0 == key)
            .map(|i| ModulationId((Variant::ALL.len() + i) as u16))
            .ok_or_else(|| Error::invalid(format!("unknown modulation '{name}'")))
    }
}

impl From<Variant> for ModulationId {
    fn from(v: Variant) -> Self {
        ModulationId(v.id())
    }
}

/// One stratification cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub modulation: ModulationId,
    pub snr_db: i16,
    pub channel: u8,
}

/// One labelled baseband signal.
#[derive(Debug, Clone, PartialEq)]
pub struct IqRecord {
    pub samples: Vec<C32>,
    pub modulation: ModulationId,
    pub family: u8,
    pub channel: u8,
    pub snr_db: i16,
    pub seed: u64,
}

impl IqRecord {
    pub fn cell(&self) -> CellKey {
        CellKey { modulation: self.modulation, snr_db: self.snr_db, channel: self.channel }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub signals_per_cell: usize,
    pub n_samples: usize,
    pub snr_grid: Vec<i16>,
    pub modulations: Vec<Variant>,
    pub channels: Vec<ChannelKind>,
    pub master_seed: u64,
    pub shaping: ShapingConfig,
    pub rician_k: f64,
    pub nakagami_m: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            signals_per_cell: FULL_SIGNALS_PER_CELL,
            n_samples: DEFAULT_SAMPLES,
            snr_grid: SNR_GRID.to_vec(),
            modulations: Variant::ALL.to_vec(),
            channels: ChannelKind::ALL.to_vec(),
            master_seed: 0,
            shaping: ShapingConfig::default(),
            rician_k: crate::channel::DEFAULT_RICIAN_K,
            nakagami_m: crate::channel::DEFAULT_NAKAGAMI_M,
        }
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list<T>(value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| f(s.trim())).collect()
}

impl GenerationConfig {
    pub fn desk(master_seed: u64) -> Self {
        GenerationConfig { signals_per_cell: DESK_SIGNALS_PER_CELL, master_seed, ..Default::default() }
    }

    pub fn record_count(&self) -> u64 {
        (self.signals_per_cell * self.modulations.len() * self.snr_grid.len() * self.channels.len())
            as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.signals_per_cell == 0 {
            return Err(Error::invalid("signals_per_cell must be at least 1"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples must be positive"));
        }
        if self.modulations.is_empty() || self.snr_grid.is_empty() || self.channels.is_empty() {
            return Err(Error::invalid("modulation, SNR and channel lists must be non-empty"));
        }
        let mut s = self.snr_grid.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.snr_grid.len() {
            return Err(Error::invalid("SNR grid has duplicates"));
        }
        self.shaping.validate()?;
        // exercise the channel parameter checks once
        let mut spec = ChannelSpec::new(ChannelKind::Rician, 4, 0);
        spec.rician_k = self.rician_k;
        spec.nakagami_m = self.nakagami_m;
        spec.validate()
    }

    /// Sets one `key=value` pair; returns `false` for keys this config does
    /// not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let bad = |what: &str| Error::invalid(format!("bad {what} '{value}'"));
        match key {
            "signals_per_cell" => self.signals_per_cell = value.parse().map_err(|_| bad(key))?,
            "samples" => self.n_samples = value.parse().map_err(|_| bad(key))?,
            "snr" => {
                self.snr_grid = parse_list(value, |s| s.parse().map_err(|_| bad("SNR")))?;
            }
            "modulations" => self.modulations = parse_list(value, str::parse)?,
            "channels" => self.channels = parse_list(value, str::parse)?,
            "master_seed" | "seed" => self.master_seed = value.parse().map_err(|_| bad(key))?,
            "oversampling" => self.shaping.oversampling = value.parse().map_err(|_| bad(key))?,
            "rolloff" => self.shaping.rolloff = value.parse().map_err(|_| bad(key))?,
            "span" => self.shaping.span = value.parse().map_err(|_| bad(key))?,
            "rician_k" => self.rician_k = value.parse().map_err(|_| bad(key))?,
            "nakagami_m" => self.nakagami_m = value.parse().map_err(|_| bad(key))?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Canonical text form; the config hash is taken over these bytes.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "signals_per_cell={}", self.signals_per_cell);
        let _ = writeln!(s, "samples={}", self.n_samples);
        let _ = writeln!(s, "snr={}", join(&self.snr_grid));
        let _ = writeln!(s, "modulations={}", join(&self.modulations));
        let _ = writeln!(s, "channels={}", join(&self.channels));
        let _ = writeln!(s, "master_seed={}", self.master_seed);
        let _ = writeln!(s, "oversampling={}", self.shaping.oversampling);
        let _ = writeln!(s, "rolloff={}", self.shaping.rolloff);
        let _ = writeln!(s, "span={}", self.shaping.span);
        let _ = writeln!(s, "rician_k={}", self.rician_k);
        let _ = writeln!(s, "nakagami_m={}", self.nakagami_m);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = GenerationConfig::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected key=value, got '{line}'")))?;
            if !cfg.set(k.trim(), v.trim())? {
                return Err(Error::invalid(format!("unknown generation key '{}'", k.trim())));
            }
        }
        Ok(cfg)
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }

    /// What record `index` will contain.
    pub fn plan(&self, index: u64) -> Result<RecordPlan> {
        if index >= self.record_count() {
            return Err(Error::invalid(format!("record {index} outside dataset")));
        }
        let k = self.channels.len() as u64;
        let per_cell_block = self.signals_per_cell as u64 * k;
        let block = index / per_cell_block;
        let j = index % per_cell_block;
        let s = self.snr_grid.len() as u64;
        let variant = self.modulations[(block / s) as usize];
        let snr_db = self.snr_grid[(block % s) as usize];
        let channel = self.channels[(j % k) as usize];
        // fading records alternate 4 and 6 taps within each channel kind
        let n_taps = if (j / k) % 2 == 0 { 4 } else { 6 };
        Ok(RecordPlan {
            index,
            variant,
            snr_db,
            channel,
            n_taps,
            seed: seed::derive(self.master_seed, index),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordPlan {
    pub index: u64,
    pub variant: Variant,
    pub snr_db: i16,
    pub channel: ChannelKind,
    pub n_taps: usize,
    pub seed: u64,
}

/// Clean synthesis, channel, then AWGN referenced to the post-channel power.
pub fn synthesize_record(
    cfg: &GenerationConfig,
    plan: &RecordPlan,
) -> Result<(IqRecord, ChannelRealization)> {
    let spec = ModulationSpec::new(plan.variant);
    let clean = synthesize(&spec, &cfg.shaping, cfg.n_samples, plan.seed)?;
    let mut chan = ChannelSpec::new(plan.channel, plan.n_taps, seed::stream(plan.seed, Stream::Channel));
    chan.rician_k = cfg.rician_k;
    chan.nakagami_m = cfg.nakagami_m;
    let realization = draw_channel(&chan)?;
    let faded = apply_channel(&clean, &realization)?;
    let noisy = add_awgn(&faded, plan.snr_db as f64, seed::stream(plan.seed, Stream::Noise))?;
    let record = IqRecord {
        samples: noisy.samples().iter().map(|z| C32::new(z.re as f32, z.im as f32)).collect(),
        modulation: plan.variant.into(),
        family: plan.variant.family().id(),
        channel: plan.channel.id(),
        snr_db: plan.snr_db,
        seed: plan.seed,
    };
    Ok((record, realization))
}

/// Receives generated records in index order.
pub trait RecordSink {
    fn begin(&mut self, _cfg: &GenerationConfig) -> Result<()> {
        Ok(())
    }
    fn accept(&mut self, index: u64, record: IqRecord, channel: &ChannelRealization) -> Result<()>;
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Keeps everything in memory.
#[derive(Debug, Default)]
pub struct VecSink {
    pub records: Vec<IqRecord>,
    pub channels: Vec<ChannelRealization>,
}

impl RecordSink for VecSink {
    fn accept(&mut self, _: u64, record: IqRecord, channel: &ChannelRealization) -> Result<()> {
        self.records.push(record);
        self.channels.push(channel.clone());
        Ok(())
    }
}

/// Discards samples, counting records per cell.
#[derive(Debug, Default)]
pub struct CountingSink {
    pub count: u64,
    pub cells: BTreeMap<CellKey, u64>,
}

impl RecordSink for CountingSink {
    fn accept(&mut self, _: u64, record: IqRecord, _: &ChannelRealization) -> Result<()> {
        self.count += 1;
        *self.cells.entry(record.cell()).or_default() += 1;
        Ok(())
    }
}

pub fn channel_log_line(index: u64, r: &ChannelRealization) -> String {
    let mut s = format!("{index}\t{}\t{}\t", r.kind, r.seed);
    for (i, h) in r.taps.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:e}:{:e}", h.re, h.im);
    }
    s
}

/// Writes `dataset.hiq` and `channels.txt` into a directory.
pub struct DirectorySink {
    dir: PathBuf,
    writer: Option<ContainerWriter<BufWriter<File>>>,
    log: Option<BufWriter<File>>,
}

impl DirectorySink {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(Error::io(format!("creating {}", dir.display())))?;
        Ok(DirectorySink { dir: dir.to_path_buf(), writer: None, log: None })
    }
}

impl RecordSink for DirectorySink {
    fn begin(&mut self, cfg: &GenerationConfig) -> Result<()> {
        let path = self.dir.join(CONTAINER_FILE);
        let f = File::create(&path).map_err(Error::io(format!("creating {}", path.display())))?;
        self.writer = Some(ContainerWriter::new(BufWriter::new(f), cfg.record_count(), cfg.n_samples as u32)?);
        let path = self.dir.join(CHANNEL_LOG_FILE);
        let f = File::create(&path).map_err(Error::io(format!("creating {}", path.display())))?;
        let mut log = BufWriter::new(f);
        writeln!(log, "# index\tkind\tseed\ttaps (re:im)").map_err(Error::io("writing channel log"))?;
        self.log = Some(log);
        Ok(())
    }

    fn accept(&mut self, index: u64, record: IqRecord, channel: &ChannelRealization) -> Result<()> {
        let (Some(w), Some(log)) = (self.writer.as_mut(), self.log.as_mut()) else {
            return Err(Error::invalid("sink used before begin"));
        };
        w.write(&record)?;
        writeln!(log, "{}", channel_log_line(index, channel)).map_err(Error::io("writing channel log"))
    }

    fn finish(&mut self) -> Result<()> {
        if let Some(w) = self.writer.take() {
            w.finish()?;
        }
        if let Some(mut log) = self.log.take() {
            log.flush().map_err(Error::io("flushing channel log"))?;
        }
        Ok(())
    }
}

const CHUNK: u64 = 1024;

/// Generates every record of `cfg` into `sink`. Records are synthesized in
/// parallel on the current rayon pool and delivered in index order.
pub fn generate_dataset(cfg: &GenerationConfig, sink: &mut dyn RecordSink) -> Result<DatasetManifest> {
    cfg.validate()?;
    let total = cfg.record_count();
    let mut cells: BTreeMap<CellKey, u64> = BTreeMap::new();
    sink.begin(cfg)?;
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        let batch: Vec<(IqRecord, ChannelRealization)> = (start..end)
            .into_par_iter()
            .map(|i| synthesize_record(cfg, &cfg.plan(i)?))
            .collect::<Result<_>>()?;
        for (i, (record, channel)) in (start..end).zip(batch) {
            *cells.entry(record.cell()).or_default() += 1;
            sink.accept(i, record, &channel)?;
        }
        start = end;
    }
    sink.finish()?;
    Ok(native_manifest(cfg, cells))
}

fn native_manifest(cfg: &GenerationConfig, cells: BTreeMap<CellKey, u64>) -> DatasetManifest {
    let mut extra = BTreeMap::new();
    extra.insert("signals_per_cell".into(), cfg.signals_per_cell.to_string());
    extra.insert("static_channel".into(), "flat".into());
    extra.insert("snr_reference".into(), "post-channel".into());
    extra.insert("channel_log".into(), CHANNEL_LOG_FILE.into());
    DatasetManifest {
        source: "native".into(),
        record_count: cfg.record_count(),
        samples_per_record: cfg.n_samples as u32,
        config_hash: cfg.hash(),
        master_seed: cfg.master_seed,
        cells,
        splits: BTreeMap::new(),
        extra,
    }
}

/// Generates into `dir` (container, channel log, manifest).
pub fn generate_to_dir(cfg: &GenerationConfig, dir: &Path) -> Result<DatasetManifest> {
    let mut sink = DirectorySink::new(dir)?;
    let manifest = generate_dataset(cfg, &mut sink)?;
    manifest.save(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// A dataset directory loaded into memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub container: Container,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest = DatasetManifest::load(&dir.join(MANIFEST_FILE))?;
        let container = load_container(&dir.join(CONTAINER_FILE))?;
        if container.records.len() as u64 != manifest.record_count {
            return Err(Error::Parse {
                offset: 0,
                message: format!(
                    "manifest lists {} records, container holds {}",
                    manifest.record_count,
                    container.records.len()
                ),
            });
        }
        Ok(Dataset { dir: dir.to_path_buf(), manifest, container })
    }

    pub fn records(&self) -> &[IqRecord] {
        &self.container.records
    }

    pub fn cells(&self) -> Vec<CellKey> {
        self.records().iter().map(IqRecord::cell).collect()
    }

    /// Record indices of a named split.
    pub fn split(&self, name: &str) -> Result<Vec<u64>> {
        let file = self
            .manifest
            .splits
            .get(name)
            .ok_or_else(|| Error::invalid(format!("dataset has no '{name}' split; run split first")))?;
        let ids = split::read_index_file(&self.dir.join(file))?;
        if let Some(bad) = ids.iter().find(|&&i| i >= self.manifest.record_count) {
            return Err(Error::invalid(format!("split '{name}' references record {bad}")));
        }
        Ok(ids)
    }

    pub fn select(&self, ids: &[u64]) -> Vec<&IqRecord> {
        ids.iter().map(|&i| &self.container.records[i as usize]).collect()
    }

    /// Splits, writes `train.idx`/`val.idx`/`test.idx` and updates the manifest.
    pub fn write_splits(&mut self, ratios: &SplitRatios, seed: u64) -> Result<Splits> {
        let splits = split_records(&self.cells(), ratios, seed)?;
        for (name, ids) in splits.parts() {
            let file = format!("{name}.idx");
            split::write_index_file(&self.dir.join(&file), ids)?;
            self.manifest.splits.insert(name.to_string(), file);
        }
        self.manifest.extra.insert("split_ratios".into(), ratios.to_string());
        self.manifest.extra.insert("split_seed".into(), seed.to_string());
        self.manifest.save(&self.dir.join(MANIFEST_FILE))?;
        Ok(splits)
    }
}
