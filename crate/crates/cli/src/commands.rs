use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use amc_core::dataset::manifest::channel_name;
use amc_core::dataset::{generate_to_dir, load_container, Dataset, DatasetManifest, IqRecord, SplitRatios, CONTAINER_FILE};
use amc_core::eval::{evaluate, ReportFormat};
use amc_core::model::{
    format_history, load_model, save_model, train as fit, AmcModel, Control, LabelMap, LabeledSet, ModelConfig,
};
use amc_core::shaping::{rc_taps, ShapingConfig};
use amc_nn::Real;

use crate::config::{generate_plan, train_plan, TrainPlan};
use crate::{ClassifyArgs, EvalArgs, Failure, GenerateArgs, InspectArgs, NumericMode, SplitArgs, TapsArgs, TrainArgs};

type Outcome = Result<(), Failure>;

fn io_failure(what: &str, path: &Path, e: std::io::Error) -> Failure {
    Failure { code: 3, message: format!("{what} {}: {e}", path.display()) }
}

/// Records per modulation (rows) and channel (columns).
fn census_table(m: &DatasetManifest) -> String {
    let mut channels: Vec<u8> = m.cells.keys().map(|c| c.channel).collect();
    channels.sort_unstable();
    channels.dedup();
    let mut rows: BTreeMap<u16, BTreeMap<u8, u64>> = BTreeMap::new();
    for (cell, &n) in &m.cells {
        *rows.entry(cell.modulation.0).or_default().entry(cell.channel).or_default() += n;
    }
    let mut s = format!("{:<10}", "modulation");
    for &c in &channels {
        let _ = write!(s, " {:>10}", channel_name(c));
    }
    let _ = writeln!(s, " {:>10}", "total");
    for (&id, per) in &rows {
        let _ = write!(s, "{:<10}", amc_core::dataset::ModulationId(id).name());
        for c in &channels {
            let _ = write!(s, " {:>10}", per.get(c).copied().unwrap_or(0));
        }
        let _ = writeln!(s, " {:>10}", per.values().sum::<u64>());
    }
    let snrs: std::collections::BTreeSet<i16> = m.cells.keys().map(|c| c.snr_db).collect();
    let _ = writeln!(
        s,
        "{} records, {} cells, {} SNR levels, {} per cell",
        m.record_count,
        m.cells.len(),
        snrs.len(),
        if m.is_uniform() { m.cells.values().next().map_or("0".to_string(), u64::to_string) } else { "varying".into() }
    );
    s
}

pub fn generate(args: GenerateArgs) -> Outcome {
    let plan = generate_plan(&args)?;
    fs::create_dir_all(&plan.out).map_err(|e| io_failure("creating", &plan.out, e))?;
    let manifest = generate_to_dir(&plan.config, &plan.out)?;
    print!("{}", census_table(&manifest));
    println!("config_hash={}", manifest.config_hash);
    Ok(())
}

pub fn split(args: SplitArgs) -> Outcome {
    let ratios: SplitRatios = args.ratios.parse()?;
    let mut ds = Dataset::open(&args.dataset)?;
    let splits = ds.write_splits(&ratios, args.seed)?;
    for (name, ids) in splits.parts() {
        println!("{name}\t{}", ids.len());
    }
    Ok(())
}

fn history_path(checkpoint: &Path) -> PathBuf {
    let mut p = checkpoint.as_os_str().to_owned();
    p.push(".history.tsv");
    PathBuf::from(p)
}

fn run_training<T: Real>(ds: &Dataset, plan: &TrainPlan, out: &Path) -> Outcome {
    let labels = LabelMap::for_records(plan.labels, ds.records())?;
    let train_ids = ds.split("train")?;
    let val_ids = ds.split("val")?;
    let train_set = LabeledSet::from_records(&ds.select(&train_ids), &labels)?;
    let val_set = LabeledSet::from_records(&ds.select(&val_ids), &labels)?;
    let config = ModelConfig {
        input_len: ds.manifest.samples_per_record as usize,
        filters: plan.filters,
        classes: labels.classes(),
        dropout: plan.dropout,
        // the noise layer is only meaningful with the native SNR labels
        noise_layer: ds.manifest.source == "native",
        seed: plan.options.seed,
        ..ModelConfig::hisarmod()
    };
    let mut model = AmcModel::<T>::build(config)?;
    eprintln!(
        "training {} parameters on {} records, validating on {}",
        model.parameter_count(),
        train_set.size(),
        val_set.size()
    );
    let state = fit(&mut model, &train_set, &val_set, &plan.options, &mut |s| {
        eprintln!(
            "epoch {:>3}  loss {:.5}  acc {:.4}  val_loss {:.5}  val_acc {:.4}",
            s.epoch, s.train_loss, s.train_acc, s.val_loss, s.val_acc
        );
        Control::Continue
    })?;
    save_model(out, &model, &labels)?;
    let hp = history_path(out);
    fs::write(&hp, format_history(&state.history)).map_err(|e| io_failure("writing", &hp, e))?;
    println!(
        "best epoch {} (val_loss {:.6}) of {}{}; checkpoint {}",
        state.best_epoch,
        state.best_val_loss,
        state.epoch,
        if state.stopped_early { ", stopped early" } else { "" },
        out.display()
    );
    Ok(())
}

pub fn train(args: TrainArgs) -> Outcome {
    let plan = train_plan(&args)?;
    let ds = Dataset::open(&args.dataset)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_failure("creating", dir, e))?;
    }
    match plan.mode {
        NumericMode::Reference => run_training::<f64>(&ds, &plan, &args.out),
        NumericMode::Fast => run_training::<f32>(&ds, &plan, &args.out),
    }
}

fn run_eval<T: Real>(args: &EvalArgs, format: ReportFormat) -> Outcome {
    let (mut model, labels, model_hash) = load_model::<T>(&args.model)?;
    let ds = Dataset::open(&args.dataset)?;
    let records: Vec<&IqRecord> = if ds.manifest.splits.contains_key(&args.split) {
        ds.select(&ds.split(&args.split)?)
    } else {
        ds.records().iter().collect()
    };
    let mut report = evaluate(&mut model, &records, &labels, 64)?;
    report.dataset_hash = ds.manifest.config_hash.clone();
    report.model_hash = model_hash;
    report.write(&args.report, format, args.percent)?;
    print!("{}", report.to_table(args.percent));
    Ok(())
}

pub fn eval(args: EvalArgs) -> Outcome {
    let format: ReportFormat = args.format.parse()?;
    match args.mode {
        NumericMode::Reference => run_eval::<f64>(&args, format),
        NumericMode::Fast => run_eval::<f32>(&args, format),
    }
}

fn run_classify<T: Real>(args: &ClassifyArgs) -> Outcome {
    let (mut model, labels, _) = load_model::<T>(&args.model)?;
    let path = if args.input.is_dir() { args.input.join(CONTAINER_FILE) } else { args.input.clone() };
    let container = load_container(&path)?;
    let refs: Vec<&IqRecord> = container.records.iter().collect();
    let mut out = String::new();
    for (i, p) in model.predict(&refs, 64)?.into_iter().enumerate() {
        let probs: Vec<String> = p.probs.iter().map(|v| format!("{v:.9}")).collect();
        let _ = writeln!(out, "{i}\t{}\t{}", labels.names()[p.label], probs.join(" "));
    }
    print!("{out}");
    Ok(())
}

pub fn classify(args: ClassifyArgs) -> Outcome {
    match args.mode {
        NumericMode::Reference => run_classify::<f64>(&args),
        NumericMode::Fast => run_classify::<f32>(&args),
    }
}

pub fn inspect(args: InspectArgs) -> Outcome {
    if let Some(path) = &args.model {
        let (model, labels, hash) = load_model::<f32>(path)?;
        for row in model.shape_table() {
            let dims: Vec<String> = row.shape.iter().map(usize::to_string).collect();
            println!("{:<12} {}", row.name, dims.join("x"));
        }
        println!("parameters {}", model.parameter_count());
        println!("labels {} ({})", labels.mode().name(), labels.names().join(", "));
        println!("sha256 {hash}");
        return Ok(());
    }
    let dir = args.dataset.as_ref().ok_or_else(|| Failure::usage("inspect needs --dataset or --model"))?;
    let ds = Dataset::open(dir)?;
    let m = &ds.manifest;
    println!("source {}", m.source);
    println!("samples_per_record {}", m.samples_per_record);
    println!("master_seed {}", m.master_seed);
    for name in m.splits.keys() {
        println!("split {name} {}", ds.split(name)?.len());
    }
    print!("{}", census_table(m));
    println!("config_hash={}", m.config_hash);
    Ok(())
}

pub fn taps(args: TapsArgs) -> Outcome {
    let cfg = ShapingConfig { oversampling: args.oversampling, rolloff: args.rolloff, span: args.span };
    let mut out = String::new();
    for t in rc_taps(&cfg)? {
        let _ = writeln!(out, "{t:.16e}");
    }
    print!("{out}");
    Ok(())
}
