//! Accuracy-vs-SNR and per-SNR confusion matrices.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use amc_nn::loss::argmax;
use amc_nn::Real;

use crate::dataset::IqRecord;
use crate::model::{AmcModel, LabelMap};
use crate::{Error, Result};

/// Anything that turns records into class probabilities.
pub trait Classifier {
    fn input_len(&self) -> usize;
    fn class_count(&self) -> usize;
    fn classify(&mut self, records: &[&IqRecord]) -> Result<Vec<Vec<f64>>>;
}

impl<T: Real> Classifier for AmcModel<T> {
    fn input_len(&self) -> usize {
        self.config().input_len
    }

    fn class_count(&self) -> usize {
        self.config().classes
    }

    fn classify(&mut self, records: &[&IqRecord]) -> Result<Vec<Vec<f64>>> {
        Ok(self.predict(records, 64)?.into_iter().map(|p| p.probs).collect())
    }
}

fn check_labels(truth: &[usize], pred: &[usize], n: usize) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::invalid(format!(
            "{} true labels but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if let Some(bad) = truth.iter().chain(pred).find(|&&l| l >= n) {
        return Err(Error::invalid(format!("label {bad} outside {n} classes")));
    }
    Ok(())
}

/// Counts with rows = true class, columns = predicted class.
pub fn confusion_matrix(truth: &[usize], pred: &[usize], n: usize) -> Result<Vec<Vec<u64>>> {
    check_labels(truth, pred, n)?;
    let mut m = vec![vec![0u64; n]; n];
    for (&t, &p) in truth.iter().zip(pred) {
        m[t][p] += 1;
    }
    Ok(m)
}

/// Fraction correct per SNR bin; bins without records do not appear.
pub fn accuracy_by_snr(snr_db: &[i16], truth: &[usize], pred: &[usize]) -> Result<BTreeMap<i16, f64>> {
    if truth.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    if snr_db.len() != truth.len() || pred.len() != truth.len() {
        return Err(Error::invalid("SNR, truth and prediction lists differ in length"));
    }
    let mut bins: BTreeMap<i16, (u64, u64)> = BTreeMap::new();
    for ((&s, &t), &p) in snr_db.iter().zip(truth).zip(pred) {
        let e = bins.entry(s).or_default();
        e.0 += (t == p) as u64;
        e.1 += 1;
    }
    Ok(bins.into_iter().map(|(s, (c, n))| (s, c as f64 / n as f64)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Comma-separated blocks; parseable.
    Structured,
    /// Aligned table for reading.
    Table,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "structured" | "csv" | "structured-text" => Ok(ReportFormat::Structured),
            "table" | "text" | "text-table" => Ok(ReportFormat::Table),
            _ => Err(Error::invalid(format!("unknown report format '{s}'"))),
        }
    }
}

/// Per-SNR confusion counts plus provenance. Accuracies are derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub dataset_hash: String,
    pub model_hash: String,
    pub label_mode: String,
    pub class_names: Vec<String>,
    pub confusion: BTreeMap<i16, Vec<Vec<u64>>>,
}

impl EvalReport {
    pub fn new(class_names: Vec<String>, label_mode: impl Into<String>) -> Self {
        EvalReport {
            dataset_hash: String::new(),
            model_hash: String::new(),
            label_mode: label_mode.into(),
            class_names,
            confusion: BTreeMap::new(),
        }
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn add(&mut self, snr_db: &[i16], truth: &[usize], pred: &[usize]) -> Result<()> {
        check_labels(truth, pred, self.classes())?;
        if snr_db.len() != truth.len() {
            return Err(Error::invalid("SNR and label lists differ in length"));
        }
        let n = self.classes();
        for ((&s, &t), &p) in snr_db.iter().zip(truth).zip(pred) {
            self.confusion.entry(s).or_insert_with(|| vec![vec![0; n]; n])[t][p] += 1;
        }
        Ok(())
    }

    /// Adds another report's counts; class lists must agree.
    pub fn merge(&mut self, other: &EvalReport) -> Result<()> {
        if other.class_names != self.class_names {
            return Err(Error::invalid("cannot merge reports over different classes"));
        }
        let n = self.classes();
        for (&snr, m) in &other.confusion {
            let mine = self.confusion.entry(snr).or_insert_with(|| vec![vec![0; n]; n]);
            for (row, orow) in mine.iter_mut().zip(m) {
                for (a, b) in row.iter_mut().zip(orow) {
                    *a += b;
                }
            }
        }
        Ok(())
    }

    pub fn support(&self, snr_db: i16) -> Option<Vec<u64>> {
        self.confusion.get(&snr_db).map(|m| m.iter().map(|r| r.iter().sum()).collect())
    }

    fn trace_total(m: &[Vec<u64>]) -> (u64, u64) {
        let trace = (0..m.len()).map(|i| m[i][i]).sum();
        let total = m.iter().flatten().sum();
        (trace, total)
    }

    pub fn accuracy(&self, snr_db: i16) -> Option<f64> {
        let (t, n) = Self::trace_total(self.confusion.get(&snr_db)?);
        (n > 0).then(|| t as f64 / n as f64)
    }

    pub fn accuracy_by_snr(&self) -> BTreeMap<i16, f64> {
        self.confusion.keys().filter_map(|&s| Some((s, self.accuracy(s)?))).collect()
    }

    pub fn total(&self) -> u64 {
        self.confusion.values().map(|m| Self::trace_total(m).1).sum()
    }

    pub fn overall_accuracy(&self) -> Option<f64> {
        let (t, n) = self
            .confusion
            .values()
            .map(|m| Self::trace_total(m))
            .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        (n > 0).then(|| t as f64 / n as f64)
    }

    /// Mean accuracy over the SNR bins in `[lo, hi]` that have records.
    pub fn mean_accuracy_between(&self, lo: i16, hi: i16) -> Option<f64> {
        let acc: Vec<f64> = self.accuracy_by_snr().range(lo..=hi).map(|(_, &a)| a).collect();
        (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64)
    }

    pub fn emit(&self, format: ReportFormat, percent: bool) -> String {
        match format {
            ReportFormat::Structured => self.to_structured(),
            ReportFormat::Table => self.to_table(percent),
        }
    }

    fn header(&self, s: &mut String) {
        let _ = writeln!(s, "# amc evaluation report");
        let _ = writeln!(s, "# dataset_hash={}", self.dataset_hash);
        let _ = writeln!(s, "# model_hash={}", self.model_hash);
        let _ = writeln!(s, "# label_mode={}", self.label_mode);
        let _ = writeln!(s, "# classes={}", self.class_names.join(","));
    }

    pub fn to_structured(&self) -> String {
        let mut s = String::new();
        self.header(&mut s);
        s.push_str("[accuracy]\nsnr_db,accuracy,support\n");
        for (&snr, m) in &self.confusion {
            let (t, n) = Self::trace_total(m);
            let acc = if n > 0 { t as f64 / n as f64 } else { 0.0 };
            let _ = writeln!(s, "{snr},{acc:.6},{n}");
        }
        for (&snr, m) in &self.confusion {
            let _ = writeln!(s, "[confusion snr_db={snr}]");
            let _ = writeln!(s, "true\\pred,{}", self.class_names.join(","));
            for (name, row) in self.class_names.iter().zip(m) {
                let cells: Vec<String> = row.iter().map(u64::to_string).collect();
                let _ = writeln!(s, "{name},{}", cells.join(","));
            }
        }
        s
    }

    pub fn to_table(&self, percent: bool) -> String {
        let mut s = String::new();
        self.header(&mut s);
        let _ = writeln!(s, "\n{:>8}  {:>9}  {:>8}", "snr_db", "accuracy", "support");
        for (&snr, m) in &self.confusion {
            let (t, n) = Self::trace_total(m);
            let acc = if n > 0 { t as f64 / n as f64 } else { 0.0 };
            let _ = writeln!(s, "{snr:>8}  {acc:>9.4}  {n:>8}");
        }
        if let Some(acc) = self.overall_accuracy() {
            let _ = writeln!(s, "{:>8}  {acc:>9.4}  {:>8}", "overall", self.total());
        }
        let width = self.class_names.iter().map(String::len).max().unwrap_or(4).max(7);
        for (&snr, m) in &self.confusion {
            let _ = writeln!(s, "\nconfusion at {snr} dB (rows true, columns predicted{})", if percent { ", %" } else { "" });
            let _ = write!(s, "{:>width$}", "");
            for name in &self.class_names {
                let _ = write!(s, " {name:>width$}");
            }
            s.push('\n');
            for (name, row) in self.class_names.iter().zip(m) {
                let _ = write!(s, "{name:>width$}");
                let total: u64 = row.iter().sum();
                for &c in row {
                    if percent {
                        let pct = if total > 0 { 100.0 * c as f64 / total as f64 } else { 0.0 };
                        let _ = write!(s, " {pct:>width$.1}");
                    } else {
                        let _ = write!(s, " {c:>width$}");
                    }
                }
                s.push('\n');
            }
        }
        s
    }

    /// Parses the structured form back into counts.
    pub fn parse(text: &str) -> Result<Self> {
        let mut report = EvalReport::new(Vec::new(), "");
        let mut current: Option<(i16, Vec<Vec<u64>>)> = None;
        let mut in_accuracy = false;
        let mut offset = 0u64;
        let finish = |cur: Option<(i16, Vec<Vec<u64>>)>, report: &mut EvalReport| {
            if let Some((snr, m)) = cur {
                report.confusion.insert(snr, m);
            }
        };
        for line in text.split_inclusive('\n') {
            let at = offset;
            offset += line.len() as u64;
            let t = line.trim();
            let err = |message: String| Error::Parse { offset: at, message };
            if t.is_empty() {
                continue;
            }
            if let Some(h) = t.strip_prefix('#') {
                if let Some((k, v)) = h.trim().split_once('=') {
                    match k.trim() {
                        "dataset_hash" => report.dataset_hash = v.trim().into(),
                        "model_hash" => report.model_hash = v.trim().into(),
                        "label_mode" => report.label_mode = v.trim().into(),
                        "classes" => {
                            report.class_names = v.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect()
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if t == "[accuracy]" {
                in_accuracy = true;
                continue;
            }
            if let Some(rest) = t.strip_prefix("[confusion snr_db=").and_then(|r| r.strip_suffix(']')) {
                in_accuracy = false;
                finish(current.take(), &mut report);
                let snr = rest.parse().map_err(|_| err(format!("bad SNR '{rest}'")))?;
                current = Some((snr, Vec::new()));
                continue;
            }
            if in_accuracy || t.starts_with("true\\pred") {
                continue;
            }
            let (snr, rows) = current.as_mut().ok_or_else(|| err(format!("unexpected line '{t}'")))?;
            let mut fields = t.split(',');
            let name = fields.next().unwrap_or_default().trim();
            let expected = report.class_names.get(rows.len());
            if expected.map(String::as_str) != Some(name) {
                return Err(err(format!("row '{name}' does not match class list at {snr} dB")));
            }
            let row: Vec<u64> = fields
                .map(|f| f.trim().parse().map_err(|_| err(format!("bad count '{f}'"))))
                .collect::<Result<_>>()?;
            if row.len() != report.class_names.len() {
                return Err(err(format!("row '{name}' has {} counts", row.len())));
            }
            rows.push(row);
        }
        finish(current.take(), &mut report);
        let n = report.class_names.len();
        if let Some((snr, _)) = report.confusion.iter().find(|(_, m)| m.len() != n) {
            return Err(Error::Parse { offset, message: format!("confusion at {snr} dB is incomplete") });
        }
        Ok(report)
    }

    pub fn write(&self, path: &Path, format: ReportFormat, percent: bool) -> Result<()> {
        fs::write(path, self.emit(format, percent)).map_err(Error::io(format!("writing {}", path.display())))
    }
}

/// Classifies `records` in batches and tallies a report.
pub fn evaluate(
    classifier: &mut dyn Classifier,
    records: &[&IqRecord],
    labels: &LabelMap,
    batch: usize,
) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::invalid("no records to evaluate"));
    }
    if classifier.class_count() != labels.classes() {
        return Err(Error::invalid(format!(
            "classifier has {} outputs, label set has {} classes",
            classifier.class_count(),
            labels.classes()
        )));
    }
    if let Some(r) = records.iter().find(|r| r.samples.len() != classifier.input_len()) {
        return Err(Error::Geometry {
            expected: format!("2x{}", classifier.input_len()),
            found: format!("2x{}", r.samples.len()),
        });
    }
    let mut report = EvalReport::new(labels.names().to_vec(), labels.mode().name());
    for chunk in records.chunks(batch.max(1)) {
        let probs = classifier.classify(chunk)?;
        let pred: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
        let truth: Vec<usize> = chunk.iter().map(|r| labels.label(r)).collect::<Result<_>>()?;
        let snr: Vec<i16> = chunk.iter().map(|r| r.snr_db).collect();
        report.add(&snr, &truth, &pred)?;
    }
    Ok(report)
}
