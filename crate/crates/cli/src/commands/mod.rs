//! Subcommands and the dataset, model and metric plumbing they share.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use dreammap::dreamer::{AcquisitionConfig, SelectionRule};
use dreammap::grid::SCALE_FACTORS;
use dreammap::io::{load_pair, save_pair};
use dreammap::synth::{make_dataset, SynthConfig};
use dreammap::world_model::{load_model, save_model, train, Architecture, EpochStats, ModelError, TrainConfig, WorldModel};
use dreammap::{mae, rmse, EnvironmentPair, GridMap, MeasurementState, Split};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::config::FileConfig;
use crate::error::CliError;

pub mod eval;
pub mod run;
pub mod sweep;
pub mod synth;
pub mod train;

pub const MANIFEST: &str = "manifest.json";
pub const MODEL_FILE: &str = "model.dmwm";
pub const LOSS_TRACE: &str = "loss_trace.csv";
pub const KERNEL_FILE: &str = "kernel.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    WorldModel,
    GpSamePoints,
    GpRandomPoints,
    EmptyCopy,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::WorldModel, Method::GpSamePoints, Method::GpRandomPoints, Method::EmptyCopy];

    pub fn name(self) -> &'static str {
        match self {
            Method::WorldModel => "world_model",
            Method::GpSamePoints => "gp_same_points",
            Method::GpRandomPoints => "gp_random_points",
            Method::EmptyCopy => "empty_copy",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub split: Split,
    pub seed: u64,
    pub shape: [usize; 2],
}

/// Everything needed to regenerate a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scale: usize,
    pub n_train: usize,
    pub n_eval: usize,
    pub synth: SynthConfig,
    pub pairs: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub train: Vec<EnvironmentPair>,
    pub eval: Vec<EnvironmentPair>,
}

impl Dataset {
    pub fn shape(&self) -> (usize, usize) {
        self.train[0].shape()
    }

    pub fn eval_pair(&self) -> &EnvironmentPair {
        &self.eval[0]
    }
}

pub fn check_scale(scale: usize) -> Result<(), CliError> {
    if SCALE_FACTORS.contains(&scale) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("scale must be one of {SCALE_FACTORS:?}, got {scale}")))
    }
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Generates the dataset and writes `pair_NNN.json` files plus the manifest into `dir`.
pub fn synthesize(dir: &Path, synth: &SynthConfig, n_train: usize, n_eval: usize, scale: usize) -> Result<Dataset, CliError> {
    check_scale(scale)?;
    if n_train == 0 || n_eval == 0 {
        return Err(CliError::Usage("need at least one train and one eval pair".into()));
    }
    let pairs = make_dataset(synth, n_train, n_eval, scale)?;
    create_dir(dir)?;
    let mut entries = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        let file = format!("pair_{i:03}.json");
        save_pair(pair, dir.join(&file))?;
        let (h, w) = pair.shape();
        entries.push(ManifestEntry {
            file,
            split: pair.meta.split.unwrap_or(Split::Train),
            seed: pair.meta.seed,
            shape: [h, w],
        });
    }
    let manifest = Manifest {
        scale,
        n_train,
        n_eval,
        synth: synth.clone(),
        pairs: entries,
    };
    write_json(&manifest, &dir.join(MANIFEST))?;
    let (train, eval): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|p| p.meta.split != Some(Split::Eval));
    Ok(Dataset { manifest, train, eval })
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, CliError> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for entry in &manifest.pairs {
        let pair = load_pair(dir.join(&entry.file))?;
        match entry.split {
            Split::Train => train.push(pair),
            Split::Eval => eval.push(pair),
        }
    }
    if train.is_empty() || eval.is_empty() {
        return Err(CliError::Data(format!("{} needs at least one train and one eval pair", dir.display())));
    }
    let shape = train[0].shape();
    if let Some(p) = train.iter().chain(&eval).find(|p| p.shape() != shape) {
        return Err(CliError::Data(format!("mixed pair shapes {shape:?} and {:?}", p.shape())));
    }
    Ok(Dataset { manifest, train, eval })
}

/// Training hyperparameters, shared by `train` and `sweep`.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub kl_weight: Option<f64>,
    #[arg(long)]
    pub episodes_per_epoch: Option<usize>,
    #[arg(long)]
    pub max_sequence_len: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

impl TrainFlags {
    pub fn resolve(&self, file: &FileConfig, seed: u64) -> Result<TrainConfig, CliError> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            learning_rate: self.learning_rate.or(file.learning_rate).unwrap_or(d.learning_rate),
            kl_weight: self.kl_weight.or(file.kl_weight).unwrap_or(d.kl_weight),
            epochs: self.epochs.or(file.epochs).unwrap_or(d.epochs),
            episodes_per_epoch: self.episodes_per_epoch.or(file.episodes_per_epoch).unwrap_or(d.episodes_per_epoch),
            max_sequence_len: self.max_sequence_len.or(file.max_sequence_len).unwrap_or(d.max_sequence_len),
            batch_size: self.batch_size.or(file.batch_size).unwrap_or(d.batch_size),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Acquisition settings, shared by `run` and `sweep`.
#[derive(Debug, Clone, Default, Args)]
pub struct AcqFlags {
    /// Candidate pool size `P`.
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Dream samples `K` per candidate.
    #[arg(long)]
    pub dream_samples: Option<usize>,
    /// argmin_variance, argmax_variance or random.
    #[arg(long)]
    pub rule: Option<String>,
    /// Cap on the cells used to fit the GP kernel.
    #[arg(long)]
    pub gp_max_points: Option<usize>,
}

impl AcqFlags {
    pub fn resolve(&self, file: &FileConfig, budget: usize, seed: u64) -> Result<AcquisitionConfig, CliError> {
        let d = AcquisitionConfig::default();
        let rule = match self.rule.as_ref().or(file.rule.as_ref()) {
            Some(s) => SelectionRule::parse(s).ok_or_else(|| CliError::Usage(format!("unknown selection rule {s:?}")))?,
            None => d.selection_rule,
        };
        let cfg = AcquisitionConfig {
            pool_size: self.pool_size.or(file.pool_size).unwrap_or(d.pool_size),
            dream_samples: self.dream_samples.or(file.dream_samples).unwrap_or(d.dream_samples),
            budget,
            selection_rule: rule,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn gp_max_points(&self, file: &FileConfig) -> usize {
        self.gp_max_points.or(file.gp_max_points).unwrap_or(dreammap::gp::DEFAULT_MAX_POINTS)
    }
}

/// Trains on `data`, writing the model, its sidecar and the loss trace into
/// `dir`. A diverged run still writes the epochs that completed.
pub fn train_and_save(data: &Dataset, cfg: &TrainConfig, dir: &Path, label: &str) -> Result<WorldModel, CliError> {
    create_dir(dir)?;
    let (h, w) = data.shape();
    let arch = Architecture::standard(h, w);
    let result = train(arch, &data.train, &data.eval, cfg, |s| {
        eprintln!("{label}epoch {:>4}  loss {:>10.5}  holdout rmse {:.5}", s.epoch, s.mean_loss, s.holdout_rmse);
    });
    match result {
        Ok(out) => {
            write_loss_trace(&out.trace, &dir.join(LOSS_TRACE))?;
            let path = dir.join(MODEL_FILE);
            save_model(&out.model, &path)?;
            // Use the stored f32 weights so a later run that reuses the file matches.
            Ok(load_model(&path)?)
        }
        Err(ModelError::Diverged { epoch, last_good, trace }) => {
            write_loss_trace(&trace, &dir.join(LOSS_TRACE))?;
            Err(CliError::Numerical(format!(
                "training diverged at epoch {epoch}; last good epoch {last_good}"
            )))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn write_loss_trace(trace: &[EpochStats], path: &Path) -> Result<(), CliError> {
    // The header is written even when no epoch completed.
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    w.write_record(["epoch", "mean_loss", "holdout_rmse"])?;
    for s in trace {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `n` distinct cells drawn uniformly from the stream for `seed`; prefixes
/// of the result are the draws for smaller budgets.
pub fn random_cells(cells: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut r = dreammap::rng::stream(seed, &[dreammap::rng::tag::GP_POINTS]);
    sample(&mut r, cells, n).into_vec()
}

pub fn state_from_cells(pair: &EnvironmentPair, cells: &[usize]) -> Result<MeasurementState, CliError> {
    let (h, w) = pair.shape();
    let mut s = MeasurementState::new(h, w);
    for &c in cells {
        s.apply_measurement(c, pair.occupied.at(c))?;
    }
    Ok(s)
}

/// RMSE and MAE against the occupied map, both in dBm.
pub fn dbm_metrics(pair: &EnvironmentPair, estimate: &GridMap) -> Result<(f64, f64), CliError> {
    if estimate.shape() != pair.shape() {
        return Err(CliError::Data(format!(
            "map shape {:?} does not match pair shape {:?}",
            estimate.shape(),
            pair.shape()
        )));
    }
    let truth = pair.map_to_dbm(&pair.occupied)?;
    let est = pair.map_to_dbm(estimate)?;
    Ok((rmse(&est, &truth)?, mae(&est, &truth)?))
}

pub fn resolve_path(flag: &Option<PathBuf>, file: &Option<PathBuf>) -> Option<PathBuf> {
    flag.clone().or_else(|| file.clone())
}

pub fn check_model(model: &WorldModel, pair: &EnvironmentPair) -> Result<(), CliError> {
    if model.arch.grid() != pair.shape() {
        return Err(CliError::Data(format!(
            "model grid {:?} does not match pair shape {:?}",
            model.arch.grid(),
            pair.shape()
        )));
    }
    Ok(())
}
