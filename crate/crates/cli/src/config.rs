//! `key=value` config files. Flags given on the command line win.

use std::fs;
use std::path::{Path, PathBuf};

use amc_core::dataset::GenerationConfig;
use amc_core::model::{LabelMode, ModelConfig, TrainOptions};

use crate::{Failure, GenerateArgs, NumericMode, TrainArgs};

fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure { code: 3, message: format!("reading {}: {e}", path.display()) })?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Failure {
            code: 3,
            message: format!("{}:{}: expected key=value", path.display(), n + 1),
        })?;
        pairs.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(pairs)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Failure> {
    value.parse().map_err(|_| Failure::usage(format!("bad value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, Failure> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Failure::usage(format!("bad value '{value}' for {key}"))),
    }
}

/// Everything `generate` needs once file and flags are merged.
#[derive(Debug)]
pub struct GeneratePlan {
    pub config: GenerationConfig,
    pub out: PathBuf,
}

pub fn generate_plan(args: &GenerateArgs) -> Result<GeneratePlan, Failure> {
    let mut cfg = GenerationConfig::default();
    let mut seed = None;
    let mut desk = false;
    if let Some(path) = &args.config {
        for (k, v) in read_pairs(path)? {
            match k.as_str() {
                "seed" | "master_seed" => seed = Some(parse(&k, &v)?),
                "desk_scale" => desk = parse_bool(&k, &v)?,
                // the output directory always comes from --out
                "out" => {}
                _ => {
                    if !cfg.set(&k, &v)? {
                        return Err(Failure::usage(format!("unknown generation key '{k}'")));
                    }
                }
            }
        }
    }
    cfg.master_seed = args.seed.or(seed).ok_or_else(|| Failure::usage("generate needs --seed"))?;
    if args.desk_scale || desk {
        cfg.signals_per_cell = amc_core::dataset::DESK_SIGNALS_PER_CELL;
    }
    cfg.validate()?;
    Ok(GeneratePlan { config: cfg, out: args.out.clone() })
}

/// Merged training settings.
#[derive(Debug, Clone)]
pub struct TrainPlan {
    pub labels: LabelMode,
    pub options: TrainOptions,
    pub filters: [usize; 4],
    pub dropout: f64,
    pub mode: NumericMode,
}

fn parse_filters(value: &str) -> Result<[usize; 4], Failure> {
    let v: Vec<usize> = value
        .split(',')
        .map(|f| parse("filters", f.trim()))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| Failure::usage("--filters needs four comma-separated counts"))
}

fn parse_mode(value: &str) -> Result<NumericMode, Failure> {
    match value {
        "reference" => Ok(NumericMode::Reference),
        "fast" => Ok(NumericMode::Fast),
        _ => Err(Failure::usage(format!("mode must be reference or fast, got '{value}'"))),
    }
}

pub fn train_plan(args: &TrainArgs) -> Result<TrainPlan, Failure> {
    let mut plan = TrainPlan {
        labels: LabelMode::Family,
        options: TrainOptions::default(),
        filters: ModelConfig::hisarmod().filters,
        dropout: ModelConfig::hisarmod().dropout,
        mode: NumericMode::Reference,
    };
    let mut seed = None;
    if let Some(path) = &args.config {
        for (k, v) in read_pairs(path)? {
            match k.as_str() {
                "seed" => seed = Some(parse(&k, &v)?),
                "labels" => plan.labels = v.parse()?,
                "epochs" => plan.options.max_epochs = parse(&k, &v)?,
                "batch" => plan.options.batch_size = parse(&k, &v)?,
                "lr" => plan.options.learning_rate = parse(&k, &v)?,
                "patience" => plan.options.patience = parse(&k, &v)?,
                "min_delta" => plan.options.min_delta = parse(&k, &v)?,
                "filters" => plan.filters = parse_filters(&v)?,
                "dropout" => plan.dropout = parse(&k, &v)?,
                "mode" => plan.mode = parse_mode(&v)?,
                "dataset" | "out" => {}
                _ => return Err(Failure::usage(format!("unknown training key '{k}'"))),
            }
        }
    }
    if let Some(v) = &args.labels {
        plan.labels = v.parse()?;
    }
    let o = &mut plan.options;
    o.max_epochs = args.epochs.unwrap_or(o.max_epochs);
    o.batch_size = args.batch.unwrap_or(o.batch_size);
    o.learning_rate = args.lr.unwrap_or(o.learning_rate);
    o.patience = args.patience.unwrap_or(o.patience);
    o.min_delta = args.min_delta.unwrap_or(o.min_delta);
    o.seed = args.seed.or(seed).ok_or_else(|| Failure::usage("train needs --seed"))?;
    if let Some(f) = &args.filters {
        plan.filters = parse_filters(f)?;
    }
    plan.dropout = args.dropout.unwrap_or(plan.dropout);
    plan.mode = args.mode.unwrap_or(plan.mode);
    if o.max_epochs == 0 || o.batch_size == 0 {
        return Err(Failure::usage("epochs and batch must be positive"));
    }
    if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
        return Err(Failure::usage("learning rate must be positive"));
    }
    if !(0.0..1.0).contains(&plan.dropout) {
        return Err(Failure::usage("dropout must lie in [0, 1)"));
    }
    Ok(plan)
}
