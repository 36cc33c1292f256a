//! The CNN family classifier: construction, training with early stopping,
//! prediction and checkpoints.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use amc_nn::loss::{argmax, softmax_cross_entropy};
use amc_nn::{
    checkpoint, Adam, AdamConfig, Conv2d, Dense, Dropout, Flatten, GaussianNoise, MaxPoolWidth,
    Mode, NnError, Pass, Real, Sequential, ShapeRow, Tensor,
};
use rand::seq::SliceRandom;

use crate::dataset::{sha256_hex, IqRecord, ModulationId};
use crate::modulation::Family;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    Family,
    Variant,
}

impl LabelMode {
    pub fn name(self) -> &'static str {
        match self {
            LabelMode::Family => "family",
            LabelMode::Variant => "variant",
        }
    }
}

impl FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "family" | "families" => Ok(LabelMode::Family),
            "variant" | "variants" | "type" => Ok(LabelMode::Variant),
            _ => Err(Error::invalid(format!("unknown label mode '{s}' (family|variant)"))),
        }
    }
}

/// Maps records to class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    mode: LabelMode,
    /// Family ids (family mode) or modulation ids (variant mode), by class.
    ids: Vec<u16>,
    names: Vec<String>,
}

impl LabelMap {
    pub fn families() -> Self {
        LabelMap {
            mode: LabelMode::Family,
            ids: Family::ALL.iter().map(|f| f.id() as u16).collect(),
            names: Family::ALL.iter().map(|f| f.name().to_string()).collect(),
        }
    }

    /// One class per distinct modulation id, in id order.
    pub fn variants(ids: impl IntoIterator<Item = ModulationId>) -> Result<Self> {
        let mut ids: Vec<ModulationId> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.iter().any(|m| m.family().is_none()) {
            return Err(Error::invalid("unknown modulation id in label set"));
        }
        Ok(LabelMap {
            mode: LabelMode::Variant,
            names: ids.iter().map(|m| m.name()).collect(),
            ids: ids.into_iter().map(|m| m.0).collect(),
        })
    }

    pub fn for_records<'a>(mode: LabelMode, records: impl IntoIterator<Item = &'a IqRecord>) -> Result<Self> {
        match mode {
            LabelMode::Family => Ok(LabelMap::families()),
            LabelMode::Variant => LabelMap::variants(records.into_iter().map(|r| r.modulation)),
        }
    }

    pub fn mode(&self) -> LabelMode {
        self.mode
    }

    pub fn classes(&self) -> usize {
        self.ids.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> &[u16] {
        &self.ids
    }

    pub fn label(&self, r: &IqRecord) -> Result<usize> {
        let key = match self.mode {
            LabelMode::Family => r.family as u16,
            LabelMode::Variant => r.modulation.0,
        };
        self.ids.iter().position(|&i| i == key).ok_or_else(|| {
            Error::invalid(format!("{} is not in the {} label set", r.modulation.name(), self.mode.name()))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Samples per record (width of the 2-row input).
    pub input_len: usize,
    pub filters: [usize; 4],
    pub kernel: (usize, usize),
    pub dense_units: usize,
    pub classes: usize,
    pub dropout: f64,
    pub noise_layer: bool,
    pub seed: u64,
}

impl ModelConfig {
    /// 2x1024 input, five family classes, noise layer on.
    pub fn hisarmod() -> Self {
        ModelConfig {
            input_len: 1024,
            filters: [256, 128, 64, 64],
            kernel: (2, 3),
            dense_units: 128,
            classes: 5,
            dropout: 0.5,
            noise_layer: true,
            seed: 0,
        }
    }

    /// 2x128 input, ten classes, no noise layer.
    pub fn radioml() -> Self {
        ModelConfig { input_len: 128, classes: 10, noise_layer: false, ..Self::hisarmod() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid("at least two classes are required"));
        }
        if self.filters.windows(2).any(|w| w[1] > w[0]) || self.filters.contains(&0) {
            return Err(Error::invalid(format!(
                "filter schedule {:?} must be positive and non-increasing",
                self.filters
            )));
        }
        if self.input_len == 0 || self.input_len % 16 != 0 {
            return Err(Error::invalid(format!(
                "input length {} must be a positive multiple of 16 (four width-halving pools)",
                self.input_len
            )));
        }
        if self.dense_units == 0 {
            return Err(Error::invalid("dense layer needs at least one unit"));
        }
        Ok(())
    }

    pub fn flatten_len(&self) -> usize {
        2 * (self.input_len / 16) * self.filters[3]
    }
}

pub struct AmcModel<T: Real> {
    config: ModelConfig,
    net: Sequential<T>,
}

impl<T: Real> AmcModel<T> {
    pub fn build(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed::derive(config.seed, 0x1417));
        let mut net = Sequential::new(&[2, config.input_len, 1])?;
        if config.noise_layer {
            net.push(GaussianNoise::default())?;
        }
        let mut cin = 1;
        for (i, &f) in config.filters.iter().enumerate() {
            let n = i + 1;
            net.push(Conv2d::new(format!("Conv{n}"), config.kernel, cin, f, true, &mut rng))?;
            net.push(MaxPoolWidth::new(format!("Max_Pool{n}")))?;
            net.push(Dropout::new(format!("Dropout{n}"), config.dropout)?)?;
            cin = f;
        }
        net.push(Flatten::new())?;
        net.push(Dense::new("Dense1", config.flatten_len(), config.dense_units, true, &mut rng))?;
        net.push(Dense::new("Dense2", config.dense_units, config.classes, false, &mut rng))?;
        Ok(AmcModel { config, net })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn network(&self) -> &Sequential<T> {
        &self.net
    }

    /// Layer names and output dimensions in table form: the trailing unit
    /// channel of the input rows is dropped.
    pub fn shape_table(&self) -> Vec<ShapeRow> {
        self.net
            .shape_trace()
            .into_iter()
            .map(|mut row| {
                let pre_conv = row.name == "Input" || row.name == "Noise Layer";
                if pre_conv && row.shape.len() == 3 && row.shape[2] == 1 {
                    row.shape.pop();
                }
                row
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.net.parameter_count()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.config.input_len {
            return Err(Error::Geometry {
                expected: format!("2x{}", self.config.input_len),
                found: format!("2x{len}"),
            });
        }
        Ok(())
    }

    /// Eval-mode class probabilities, one row per input.
    pub fn predict_tensor(&mut self, input: &Tensor<T>) -> Result<Vec<Vec<f64>>> {
        let mut rng = seed::rng(0);
        let mut pass = Pass { mode: Mode::Eval, rng: &mut rng, snr_db: None };
        let logits = self.net.forward(input, &mut pass)?;
        let c = self.config.classes;
        logits
            .data()
            .chunks_exact(c)
            .map(|row| {
                let p = amc_nn::activation::softmax(row)?;
                Ok(p.into_iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
            })
            .collect()
    }

    /// Probabilities and argmax labels for `records`, `batch` at a time.
    pub fn predict(&mut self, records: &[&IqRecord], batch: usize) -> Result<Vec<Prediction>> {
        if batch == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        let mut out = Vec::with_capacity(records.len());
        for chunk in records.chunks(batch) {
            for r in chunk {
                self.check_len(r.samples.len())?;
            }
            let x = records_to_tensor::<T>(chunk, self.config.input_len)?;
            out.extend(self.predict_tensor(&x)?.into_iter().map(|probs| Prediction {
                label: argmax(&probs),
                probs,
            }));
        }
        Ok(out)
    }

    fn set_input(&mut self, set: &LabeledSet, ids: &[usize]) -> Result<(Tensor<T>, Vec<usize>, Vec<f64>)> {
        let per = 2 * set.len;
        let mut data = Vec::with_capacity(ids.len() * per);
        for &i in ids {
            data.extend(set.inputs[i * per..(i + 1) * per].iter().map(|&v| T::from_f64_lossy(v as f64)));
        }
        let x = Tensor::from_vec(&[ids.len(), 2, set.len, 1], data)?;
        Ok((x, ids.iter().map(|&i| set.labels[i]).collect(), ids.iter().map(|&i| set.snr_db[i]).collect()))
    }

    /// Mean loss and accuracy in eval mode.
    pub fn evaluate(&mut self, set: &LabeledSet, batch: usize) -> Result<(f64, f64)> {
        self.check_len(set.len)?;
        if set.is_empty() {
            return Err(Error::invalid("evaluation set is empty"));
        }
        let mut total = 0.0;
        let mut correct = 0;
        let all: Vec<usize> = (0..set.size()).collect();
        for ids in all.chunks(batch.max(1)) {
            let (x, labels, _) = self.set_input(set, ids)?;
            let mut rng = seed::rng(0);
            let mut pass = Pass { mode: Mode::Eval, rng: &mut rng, snr_db: None };
            let logits = self.net.forward(&x, &mut pass)?;
            if !logits.all_finite() {
                return Ok((f64::NAN, 0.0));
            }
            let bl = softmax_cross_entropy(&logits, &labels)?;
            total += bl.loss.to_f64().unwrap_or(f64::NAN) * ids.len() as f64;
            correct += bl.correct;
        }
        Ok((total / set.size() as f64, correct as f64 / set.size() as f64))
    }

    /// Named parameters cast to `f32` for the checkpoint file.
    pub fn named_params(&self) -> Vec<(String, Tensor<f32>)> {
        self.net.named_params().into_iter().map(|(n, t)| (n, t.cast::<f32>())).collect()
    }

    pub fn load_params(&mut self, entries: &[(String, Tensor<f32>)]) -> Result<()> {
        let cast: Vec<(String, Tensor<T>)> = entries.iter().map(|(n, t)| (n.clone(), t.cast::<T>())).collect();
        self.net.load_named(&cast)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub label: usize,
}

/// `[n, 2, len, 1]` with row 0 = I and row 1 = Q.
pub fn records_to_tensor<T: Real>(records: &[&IqRecord], len: usize) -> Result<Tensor<T>> {
    let mut data = Vec::with_capacity(records.len() * 2 * len);
    for r in records {
        if r.samples.len() != len {
            return Err(Error::Geometry { expected: format!("2x{len}"), found: format!("2x{}", r.samples.len()) });
        }
        data.extend(r.samples.iter().map(|s| T::from_f64_lossy(s.re as f64)));
        data.extend(r.samples.iter().map(|s| T::from_f64_lossy(s.im as f64)));
    }
    Ok(Tensor::from_vec(&[records.len(), 2, len, 1], data)?)
}

/// Inputs, labels and SNRs packed for training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledSet {
    pub len: usize,
    /// `size * 2 * len` values, I row then Q row per record.
    pub inputs: Vec<f32>,
    pub labels: Vec<usize>,
    pub snr_db: Vec<f64>,
}

impl LabeledSet {
    pub fn from_records(records: &[&IqRecord], labels: &LabelMap) -> Result<Self> {
        let len = records.first().map_or(0, |r| r.samples.len());
        let mut set = LabeledSet { len, ..Default::default() };
        for r in records {
            if r.samples.len() != len {
                return Err(Error::Geometry { expected: format!("2x{len}"), found: format!("2x{}", r.samples.len()) });
            }
            set.inputs.extend(r.samples.iter().map(|s| s.re));
            set.inputs.extend(r.samples.iter().map(|s| s.im));
            set.labels.push(labels.label(r)?);
            set.snr_db.push(r.snr_db as f64);
        }
        Ok(set)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            batch_size: 256,
            max_epochs: 100,
            patience: 5,
            min_delta: 1e-4,
            learning_rate: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Patience-based stopping on validation loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_delta: f64,
    pub best: f64,
    pub counter: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopping { patience, min_delta, best: f64::INFINITY, counter: 0 }
    }

    /// Records an epoch's validation loss; returns `(improved, stop)`.
    pub fn update(&mut self, val_loss: f64) -> (bool, bool) {
        if val_loss < self.best - self.min_delta {
            self.best = val_loss;
            self.counter = 0;
            (true, false)
        } else {
            self.counter += 1;
            (false, self.counter >= self.patience)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub epoch: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopping: EarlyStopping,
    pub history: Vec<EpochStats>,
    pub optimizer_steps: u64,
    /// Stopped by patience (not by the epoch budget or the observer).
    pub stopped_early: bool,
}

/// Mini-batch ADAM with early stopping. The model ends up holding the weights
/// of the epoch with the lowest validation loss. `observer` sees every epoch
/// and may end training.
pub fn train<T: Real>(
    model: &mut AmcModel<T>,
    train_set: &LabeledSet,
    val_set: &LabeledSet,
    opts: &TrainOptions,
    observer: &mut dyn FnMut(&EpochStats) -> Control,
) -> Result<TrainState> {
    model.check_len(train_set.len)?;
    model.check_len(val_set.len)?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    if opts.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let classes = model.config.classes;
    if let Some(&bad) = train_set.labels.iter().chain(&val_set.labels).find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} outside {classes} classes")));
    }
    let mut adam = Adam::<T>::new(AdamConfig { learning_rate: opts.learning_rate, ..Default::default() })?;
    let mut state = TrainState {
        epoch: 0,
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopping: EarlyStopping::new(opts.patience, opts.min_delta),
        history: Vec::new(),
        optimizer_steps: 0,
        stopped_early: false,
    };
    let mut best = model.net.snapshot();
    let mut order: Vec<usize> = (0..train_set.size()).collect();
    for epoch in 1..=opts.max_epochs {
        let diverged = |message: String| Error::Training { epoch, message };
        order.shuffle(&mut seed::rng(seed::derive(opts.seed, 2 * epoch as u64)));
        let mut rng = seed::rng(seed::derive(opts.seed, 2 * epoch as u64 + 1));
        let (mut loss_sum, mut correct) = (0.0, 0);
        for ids in order.chunks(opts.batch_size) {
            let (x, labels, snr) = model.set_input(train_set, ids)?;
            let mut pass = Pass { mode: Mode::Train, rng: &mut rng, snr_db: Some(&snr) };
            let logits = model.net.forward(&x, &mut pass)?;
            if !logits.all_finite() {
                return Err(diverged("non-finite logits".into()));
            }
            let bl = softmax_cross_entropy(&logits, &labels)?;
            let loss = bl.loss.to_f64().unwrap_or(f64::NAN);
            if !loss.is_finite() {
                return Err(diverged(format!("training loss {loss}")));
            }
            loss_sum += loss * ids.len() as f64;
            correct += bl.correct;
            model.net.zero_grads();
            model.net.backward(&bl.grad)?;
            adam.step(model.net.params_mut()).map_err(|e| match e {
                NnError::NonFinite(m) => diverged(m),
                other => other.into(),
            })?;
        }
        let (val_loss, val_acc) = model.evaluate(val_set, opts.batch_size)?;
        if !val_loss.is_finite() {
            return Err(diverged(format!("validation loss {val_loss}")));
        }
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / train_set.size() as f64,
            train_acc: correct as f64 / train_set.size() as f64,
            val_loss,
            val_acc,
        };
        state.epoch = epoch;
        state.history.push(stats);
        state.optimizer_steps = adam.steps();
        let (improved, stop) = state.stopping.update(val_loss);
        if improved {
            state.best_val_loss = val_loss;
            state.best_epoch = epoch;
            best = model.net.snapshot();
        }
        if observer(&stats) == Control::Stop {
            break;
        }
        if stop {
            state.stopped_early = true;
            break;
        }
    }
    model.net.restore(&best)?;
    Ok(state)
}

/// `epoch train_loss val_loss val_acc` rows, tab separated.
pub fn format_history(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch\ttrain_loss\tval_loss\tval_acc\n");
    for h in history {
        let _ = writeln!(s, "{}\t{:.6}\t{:.6}\t{:.4}", h.epoch, h.train_loss, h.val_loss, h.val_acc);
    }
    s
}

/// Path of the `key=value` sidecar describing a checkpoint.
pub fn meta_path(checkpoint: &Path) -> PathBuf {
    let mut p = checkpoint.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

/// Writes the weights (`HIQW`) and the `.meta` sidecar.
pub fn save_model<T: Real>(path: &Path, model: &AmcModel<T>, labels: &LabelMap) -> Result<()> {
    let params = model.named_params();
    let refs: Vec<(String, &Tensor<f32>)> = params.iter().map(|(n, t)| (n.clone(), t)).collect();
    checkpoint::save(path, &refs)?;
    let c = &model.config;
    let mut meta = BTreeMap::new();
    meta.insert("input_len", c.input_len.to_string());
    meta.insert("filters", c.filters.map(|f| f.to_string()).join(","));
    meta.insert("kernel", format!("{}x{}", c.kernel.0, c.kernel.1));
    meta.insert("dense_units", c.dense_units.to_string());
    meta.insert("classes", c.classes.to_string());
    meta.insert("dropout", c.dropout.to_string());
    meta.insert("noise_layer", c.noise_layer.to_string());
    meta.insert("label_mode", labels.mode().name().to_string());
    meta.insert("class_ids", labels.ids().iter().map(u16::to_string).collect::<Vec<_>>().join(","));
    meta.insert("class_names", labels.names().join(","));
    let text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    let mp = meta_path(path);
    fs::write(&mp, text).map_err(Error::io(format!("writing {}", mp.display())))
}

fn parse_meta(text: &str) -> Result<(ModelConfig, LabelMap)> {
    let kv: BTreeMap<&str, &str> = text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim(), v.trim()))
        .collect();
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| Error::invalid(format!("checkpoint metadata lacks '{k}'")));
    let num = |k: &str| -> Result<usize> {
        get(k)?.parse().map_err(|_| Error::invalid(format!("bad '{k}' in checkpoint metadata")))
    };
    let filters: Vec<usize> = get("filters")?
        .split(',')
        .map(|f| f.parse().map_err(|_| Error::invalid("bad filter list in checkpoint metadata")))
        .collect::<Result<_>>()?;
    let filters: [usize; 4] =
        filters.try_into().map_err(|_| Error::invalid("checkpoint metadata needs four filter counts"))?;
    let (kh, kw) = get("kernel")?
        .split_once('x')
        .ok_or_else(|| Error::invalid("bad kernel in checkpoint metadata"))?;
    let kernel = (
        kh.parse().map_err(|_| Error::invalid("bad kernel height"))?,
        kw.parse().map_err(|_| Error::invalid("bad kernel width"))?,
    );
    let config = ModelConfig {
        input_len: num("input_len")?,
        filters,
        kernel,
        dense_units: num("dense_units")?,
        classes: num("classes")?,
        dropout: get("dropout")?.parse().map_err(|_| Error::invalid("bad dropout"))?,
        noise_layer: get("noise_layer")? == "true",
        seed: 0,
    };
    let mode: LabelMode = get("label_mode")?.parse()?;
    let ids: Vec<u16> = get("class_ids")?
        .split(',')
        .map(|i| i.parse().map_err(|_| Error::invalid("bad class id")))
        .collect::<Result<_>>()?;
    let labels = match mode {
        LabelMode::Family => LabelMap::families(),
        LabelMode::Variant => LabelMap::variants(ids.iter().map(|&i| ModulationId(i)))?,
    };
    if labels.ids() != ids || labels.classes() != config.classes {
        return Err(Error::invalid("checkpoint class list does not match its label mode"));
    }
    Ok((config, labels))
}

/// Loads weights and sidecar; the returned hash covers the weight file.
pub fn load_model<T: Real>(path: &Path) -> Result<(AmcModel<T>, LabelMap, String)> {
    let mp = meta_path(path);
    let text = fs::read_to_string(&mp).map_err(Error::io(format!("reading {}", mp.display())))?;
    let (config, labels) = parse_meta(&text)?;
    let bytes = fs::read(path).map_err(Error::io(format!("reading {}", path.display())))?;
    let entries = checkpoint::decode(&bytes)?;
    let mut model = AmcModel::build(config)?;
    model.load_params(&entries)?;
    Ok((model, labels, sha256_hex(&bytes)))
}
