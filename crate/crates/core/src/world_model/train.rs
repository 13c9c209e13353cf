use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::{self, Episode};
use super::{ActionCoord, Architecture, ModelError, Provenance, Weights, WorldModel};
use crate::grid::{make_observation, rmse, EnvironmentPair, GridMap, MeasurementState, Observation, UnitTag};
use crate::nn::Adam;
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub kl_weight: f64,
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub max_sequence_len: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            kl_weight: 1e-3,
            epochs: 200,
            episodes_per_epoch: 50,
            max_sequence_len: 20,
            batch_size: 8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return bad("kl_weight must be non-negative");
        }
        if self.epochs == 0 || self.episodes_per_epoch == 0 {
            return bad("epochs and episodes_per_epoch must be at least 1");
        }
        if self.max_sequence_len == 0 || self.batch_size == 0 {
            return bad("max_sequence_len and batch_size must be at least 1");
        }
        Ok(())
    }

    /// FNV-1a over the canonical JSON form, as 16 hex digits.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub holdout_rmse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: WorldModel,
    pub trace: Vec<EpochStats>,
}

fn check_pairs(arch: &Architecture, pairs: &[EnvironmentPair]) -> Result<(), ModelError> {
    for p in pairs {
        if p.shape() != arch.grid() {
            return Err(ModelError::Shape {
                expected: arch.grid(),
                actual: p.shape(),
            });
        }
        if p.unit() != UnitTag::Normalized {
            return Err(crate::error::MapError::WrongUnit {
                expected: UnitTag::Normalized,
            }
            .into());
        }
    }
    Ok(())
}

/// Samples one training episode: a pair, `L ~ U{1..max_len}` distinct cells
/// measured on its occupied map, and the noise for every step.
pub fn build_episode(arch: &Architecture, pairs: &[EnvironmentPair], max_len: usize, rng: &mut rng::StreamRng) -> Result<Episode, ModelError> {
    let pair = &pairs[rng.random_range(0..pairs.len())];
    let (h, w) = pair.shape();
    let cells = h * w;
    let len = rng.random_range(1..=max_len.min(cells));
    let order = sample(rng, cells, len).into_vec();

    let mut state = MeasurementState::new(h, w);
    let mut obs: Vec<Observation> = Vec::with_capacity(len + 1);
    obs.push(make_observation(&pair.empty, &state)?);
    let mut actions = Vec::with_capacity(len);
    for &cell in &order {
        actions.push(ActionCoord::from_cell(cell, h, w).features());
        state.apply_measurement(cell, pair.occupied.at(cell))?;
        obs.push(make_observation(&pair.empty, &state)?);
    }
    let steps = len + 1;
    let noise = Array2::from_shape_vec((arch.latent_dim, steps), rng::normals(rng, arch.latent_dim * steps)).expect("noise shape");
    let refs: Vec<&Observation> = obs.iter().collect();
    Ok(Episode {
        input: net::pack_observations(arch, &refs),
        target: pair.occupied.values().to_vec(),
        actions,
        noise,
    })
}

/// Mean normalized RMSE over `pairs`, each reconstructed from a fixed seeded
/// set of `min(10, cells)` measurements.
pub fn holdout_rmse(model: &WorldModel, pairs: &[EnvironmentPair], seed: u64) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for (i, pair) in pairs.iter().enumerate() {
        let (h, w) = pair.shape();
        let cells = h * w;
        let mut r = rng::stream(seed, &[tag::HOLDOUT, i as u64]);
        let mut state = MeasurementState::new(h, w);
        for cell in sample(&mut r, cells, cells.min(10)).into_iter() {
            state.apply_measurement(cell, pair.occupied.at(cell))?;
        }
        let recon = model.reconstruct(&make_observation(&pair.empty, &state)?)?;
        let truth = GridMap::unconstrained(h, w, pair.occupied.values().to_vec())?;
        total += rmse(&recon, &truth)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Stateful optimizer loop; [`train`] drives it for `cfg.epochs` epochs.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub model: WorldModel,
    adam: Adam,
}

impl Trainer {
    pub fn new(arch: Architecture, cfg: TrainConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let model = WorldModel::new(arch, cfg.seed);
        let adam = Adam::new(cfg.learning_rate, model.weights.n_params());
        Ok(Trainer { cfg, model, adam })
    }

    /// One epoch of `episodes_per_epoch` episodes in batches of `batch_size`,
    /// one optimizer step per batch. Returns the mean episode loss, measured
    /// with the weights in effect when each episode was evaluated.
    pub fn run_epoch(&mut self, epoch: usize, pairs: &[EnvironmentPair]) -> Result<f64, ModelError> {
        check_pairs(&self.model.arch, pairs)?;
        let arch = self.model.arch;
        let cfg = self.cfg.clone();
        let mut loss_sum = 0.0;
        let mut start = 0;
        while start < cfg.episodes_per_epoch {
            let end = (start + cfg.batch_size).min(cfg.episodes_per_epoch);
            let weights = &self.model.weights;
            let results: Vec<Result<(f64, Weights), ModelError>> = (start..end)
                .into_par_iter()
                .map(|e| {
                    let mut r = rng::stream(cfg.seed, &[tag::EPISODE, epoch as u64, e as u64]);
                    let ep = build_episode(&arch, pairs, cfg.max_sequence_len, &mut r)?;
                    let (loss, grad) = net::episode_loss_and_grad(weights, &arch, &ep, cfg.kl_weight);
                    Ok((loss.total, grad))
                })
                .collect();
            let mut grad = Weights::zeros(&arch);
            let scale = 1.0 / (end - start) as f64;
            for res in results {
                let (loss, g) = res?;
                if !loss.is_finite() {
                    return Err(ModelError::NonFinite("training loss"));
                }
                loss_sum += loss;
                grad.add_scaled(&g, scale);
            }
            if !grad.is_finite() {
                return Err(ModelError::NonFinite("gradient"));
            }
            let grads = grad.tensors();
            self.adam.update(self.model.weights.tensors_mut(), grads);
            if !self.model.weights.is_finite() {
                return Err(ModelError::NonFinite("weights"));
            }
            start = end;
        }
        Ok(loss_sum / cfg.episodes_per_epoch as f64)
    }
}

/// Trains a fresh model on `train_pairs`, tracking RMSE on `holdout`.
/// Epochs in the trace are numbered from 1.
pub fn train(
    arch: Architecture,
    train_pairs: &[EnvironmentPair],
    holdout: &[EnvironmentPair],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutput, ModelError> {
    if train_pairs.is_empty() || holdout.is_empty() {
        return Err(ModelError::Config("need at least one training and one holdout pair".into()));
    }
    check_pairs(&arch, train_pairs)?;
    check_pairs(&arch, holdout)?;
    let mut trainer = Trainer::new(arch, cfg.clone())?;
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let diverged = |trace: Vec<EpochStats>| ModelError::Diverged {
            epoch,
            last_good: epoch - 1,
            trace,
        };
        let mean_loss = match trainer.run_epoch(epoch, train_pairs) {
            Ok(l) => l,
            Err(ModelError::NonFinite(_)) => return Err(diverged(trace)),
            Err(e) => return Err(e),
        };
        let holdout_rmse = match holdout_rmse(&trainer.model, holdout, cfg.seed) {
            Ok(r) if r.is_finite() => r,
            Ok(_) | Err(ModelError::NonFinite(_)) => return Err(diverged(trace)),
            Err(e) => return Err(e),
        };
        let stats = EpochStats {
            epoch,
            mean_loss,
            holdout_rmse,
        };
        on_epoch(&stats);
        trace.push(stats);
    }
    let mut model = trainer.model;
    model.provenance = Provenance {
        config_hash: cfg.hash(),
        epochs_completed: cfg.epochs,
        final_loss: trace.last().map(|s| s.mean_loss),
    };
    Ok(TrainOutput { model, trace })
}
