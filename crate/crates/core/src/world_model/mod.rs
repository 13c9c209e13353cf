//! Conditional convolutional VAE plus action-conditioned latent dynamics.
//!
//! Encoder: four 3x3 convolutions (32, 32, 64, 64 channels) with ReLU and a
//! 2x2 max pool after the second and fourth, a 256-unit fully connected
//! layer, and two linear heads for the latent mean and log-variance.
//!
//! Decoder: linear map to a `64 x H/4 x W/4` volume, then two rounds of
//! nearest x2 upsampling followed by a 3x3 convolution with ReLU, then a
//! linear 1x1 convolution to one channel.
//!
//! Dynamics: the action (normalized row/column) goes through a two-layer
//! ReLU MLP, is concatenated with the latent, and drives one LSTM step whose
//! hidden state feeds two linear heads for the next latent's Gaussian.
//!
//! Inputs are edge-replicated to the next multiple of 4 in each dimension so
//! the two pools divide evenly; decoder output is cropped back.

mod format;
mod net;
mod train;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{FormatError, MapError};
use crate::grid::{GridMap, Observation};
use crate::nn::{Dense, LstmCell};
use crate::rng::{self, tag, StreamRng};

pub use format::{load_model, model_from_bytes, model_to_bytes, save_model, Sidecar, MODEL_MAGIC, MODEL_VERSION};
pub use net::{dynamics_latents, episode_loss, episode_loss_and_grad, episode_loss_frozen, DynamicsLatents, Episode, LossBreakdown};
pub use train::{build_episode, holdout_rmse, train, EpochStats, TrainConfig, TrainOutput, Trainer};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("observation shape {actual:?} does not match model grid {expected:?}")]
    Shape {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("latent vector has length {actual}, expected {expected}")]
    LatentDim { expected: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch} (last good epoch: {last_good})")]
    Diverged {
        epoch: usize,
        last_good: usize,
        trace: Vec<EpochStats>,
    },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Layer sizes and the grid the model is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub grid_h: usize,
    pub grid_w: usize,
    pub in_channels: usize,
    pub enc_channels: [usize; 4],
    pub fc_width: usize,
    pub latent_dim: usize,
    pub dec_channels: [usize; 2],
    pub action_embed: usize,
    pub hidden_dim: usize,
}

impl Architecture {
    /// The full-size network.
    pub fn standard(grid_h: usize, grid_w: usize) -> Self {
        Architecture {
            grid_h,
            grid_w,
            in_channels: 3,
            enc_channels: [32, 32, 64, 64],
            fc_width: 256,
            latent_dim: 64,
            dec_channels: [32, 32],
            action_embed: 32,
            hidden_dim: 128,
        }
    }

    /// Same topology with small widths, for gradient checks.
    pub fn miniature(grid_h: usize, grid_w: usize) -> Self {
        Architecture {
            grid_h,
            grid_w,
            in_channels: 3,
            enc_channels: [3, 4, 4, 5],
            fc_width: 12,
            latent_dim: 8,
            dec_channels: [4, 3],
            action_embed: 6,
            hidden_dim: 16,
        }
    }

    pub fn padded(&self) -> (usize, usize) {
        (self.grid_h.div_ceil(4) * 4, self.grid_w.div_ceil(4) * 4)
    }

    pub fn bottleneck(&self) -> (usize, usize) {
        let (h, w) = self.padded();
        (h / 4, w / 4)
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.grid_h, self.grid_w)
    }

    pub fn cells(&self) -> usize {
        self.grid_h * self.grid_w
    }
}

/// All learnable tensors, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub enc_conv: [Dense; 4],
    pub enc_fc: Dense,
    pub enc_mean: Dense,
    pub enc_logvar: Dense,
    pub dec_fc: Dense,
    pub dec_conv: [Dense; 2],
    pub dec_out: Dense,
    pub act_fc: [Dense; 2],
    pub lstm: LstmCell,
    pub dyn_mean: Dense,
    pub dyn_logvar: Dense,
}

impl Weights {
    fn build(arch: &Architecture, mut dense: impl FnMut(usize, usize) -> Dense, lstm: impl FnOnce(usize, usize) -> LstmCell) -> Self {
        let [c1, c2, c3, c4] = arch.enc_channels;
        let [d1, d2] = arch.dec_channels;
        let (bh, bw) = arch.bottleneck();
        let flat = c4 * bh * bw;
        let latent = arch.latent_dim;
        Weights {
            enc_conv: [
                dense(c1, arch.in_channels * 9),
                dense(c2, c1 * 9),
                dense(c3, c2 * 9),
                dense(c4, c3 * 9),
            ],
            enc_fc: dense(arch.fc_width, flat),
            enc_mean: dense(latent, arch.fc_width),
            enc_logvar: dense(latent, arch.fc_width),
            dec_fc: dense(flat, latent),
            dec_conv: [dense(d1, c4 * 9), dense(d2, d1 * 9)],
            dec_out: dense(1, d2),
            act_fc: [dense(arch.action_embed, 2), dense(arch.action_embed, arch.action_embed)],
            lstm: lstm(latent + arch.action_embed, arch.hidden_dim),
            dyn_mean: dense(latent, arch.hidden_dim),
            dyn_logvar: dense(latent, arch.hidden_dim),
        }
    }

    pub fn zeros(arch: &Architecture) -> Self {
        Weights::build(arch, Dense::zeros, LstmCell::zeros)
    }

    pub fn init(arch: &Architecture, seed: u64) -> Self {
        let mut rng: StreamRng = rng::stream(seed, &[tag::INIT]);
        let mut lstm_rng: StreamRng = rng::stream(seed, &[tag::INIT, 1]);
        let mut w = Weights::build(arch, |o, i| Dense::init(o, i, &mut rng), |i, h| LstmCell::init(i, h, &mut lstm_rng));
        // Start the linear output head at the middle of the normalized range.
        w.dec_out.b.fill(0.5);
        w
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(32);
        for d in self.enc_conv.iter() {
            out.extend(d.tensors());
        }
        out.extend(self.enc_fc.tensors());
        out.extend(self.enc_mean.tensors());
        out.extend(self.enc_logvar.tensors());
        out.extend(self.dec_fc.tensors());
        for d in self.dec_conv.iter() {
            out.extend(d.tensors());
        }
        out.extend(self.dec_out.tensors());
        for d in self.act_fc.iter() {
            out.extend(d.tensors());
        }
        out.extend(self.lstm.tensors());
        out.extend(self.dyn_mean.tensors());
        out.extend(self.dyn_logvar.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(32);
        for d in self.enc_conv.iter_mut() {
            out.extend(d.tensors_mut());
        }
        out.extend(self.enc_fc.tensors_mut());
        out.extend(self.enc_mean.tensors_mut());
        out.extend(self.enc_logvar.tensors_mut());
        out.extend(self.dec_fc.tensors_mut());
        for d in self.dec_conv.iter_mut() {
            out.extend(d.tensors_mut());
        }
        out.extend(self.dec_out.tensors_mut());
        for d in self.act_fc.iter_mut() {
            out.extend(d.tensors_mut());
        }
        out.extend(self.lstm.tensors_mut());
        out.extend(self.dyn_mean.tensors_mut());
        out.extend(self.dyn_logvar.tensors_mut());
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += other * scale`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Weights, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y * scale;
            }
        }
    }

    /// Flat copy of every parameter.
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }
}

/// Where the weights came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub config_hash: String,
    pub epochs_completed: usize,
    pub final_loss: Option<f64>,
}

/// Gaussian latent belief and one reparameterized draw from it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBelief {
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
    pub noise: Vec<f64>,
    pub sample: Vec<f64>,
}

/// Recurrent memory of the dynamics model.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl DynamicsState {
    pub fn zeros(hidden_dim: usize) -> Self {
        DynamicsState {
            hidden: vec![0.0; hidden_dim],
            cell: vec![0.0; hidden_dim],
        }
    }
}

/// A measurement action encoded as normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionCoord {
    pub row_norm: f64,
    pub col_norm: f64,
    pub cell_index: usize,
}

impl ActionCoord {
    /// `row / (H - 1)`, `col / (W - 1)`; a unit-length axis maps to 0.
    pub fn from_cell(cell_index: usize, height: usize, width: usize) -> Self {
        let (r, c) = (cell_index / width, cell_index % width);
        let norm = |v: usize, len: usize| if len > 1 { v as f64 / (len - 1) as f64 } else { 0.0 };
        ActionCoord {
            row_norm: norm(r, height),
            col_norm: norm(c, width),
            cell_index,
        }
    }

    pub fn coords(&self, width: usize) -> (usize, usize) {
        (self.cell_index / width, self.cell_index % width)
    }

    pub fn features(&self) -> [f64; 2] {
        [self.row_norm, self.col_norm]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsOutput {
    pub next_mean: Vec<f64>,
    pub next_log_var: Vec<f64>,
    pub next_state: DynamicsState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub arch: Architecture,
    pub weights: Weights,
    pub provenance: Provenance,
}

impl WorldModel {
    pub fn new(arch: Architecture, seed: u64) -> Self {
        WorldModel {
            arch,
            weights: Weights::init(&arch, seed),
            provenance: Provenance::default(),
        }
    }

    pub fn zeros(arch: Architecture) -> Self {
        WorldModel {
            arch,
            weights: Weights::zeros(&arch),
            provenance: Provenance::default(),
        }
    }

    fn check_obs(&self, obs: &Observation) -> Result<(), ModelError> {
        if obs.shape() != self.arch.grid() {
            return Err(ModelError::Shape {
                expected: self.arch.grid(),
                actual: obs.shape(),
            });
        }
        for ch in obs.channels() {
            if ch.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite("observation"));
            }
        }
        Ok(())
    }

    /// Mean and log-variance for a batch of observations, each `(latent, N)`.
    pub fn encode_batch(&self, obs: &[&Observation]) -> Result<(Array2<f64>, Array2<f64>), ModelError> {
        for o in obs {
            self.check_obs(o)?;
        }
        let input = net::pack_observations(&self.arch, obs);
        let (mean, log_var, _) = net::encoder_forward(&self.weights, &self.arch, input, false);
        Ok((mean, log_var))
    }

    /// Encodes one observation; `noise` is the recorded standard-normal draw.
    pub fn encode(&self, obs: &Observation, noise: &[f64]) -> Result<LatentBelief, ModelError> {
        if noise.len() != self.arch.latent_dim {
            return Err(ModelError::LatentDim {
                expected: self.arch.latent_dim,
                actual: noise.len(),
            });
        }
        let (mean, log_var) = self.encode_batch(&[obs])?;
        let mean: Vec<f64> = mean.column(0).to_vec();
        let log_var: Vec<f64> = log_var.column(0).to_vec();
        let sample = mean
            .iter()
            .zip(&log_var)
            .zip(noise)
            .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
            .collect();
        Ok(LatentBelief {
            mean,
            log_var,
            noise: noise.to_vec(),
            sample,
        })
    }

    pub fn encode_with_rng(&self, obs: &Observation, rng: &mut StreamRng) -> Result<LatentBelief, ModelError> {
        let noise = rng::normals(rng, self.arch.latent_dim);
        self.encode(obs, &noise)
    }

    /// Decodes a batch of latents `(latent, N)` into `N` maps on the model grid.
    pub fn decode_batch(&self, z: &Array2<f64>) -> Result<Vec<GridMap>, ModelError> {
        if z.nrows() != self.arch.latent_dim {
            return Err(ModelError::LatentDim {
                expected: self.arch.latent_dim,
                actual: z.nrows(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("latent"));
        }
        let (out, _) = net::decoder_forward(&self.weights, &self.arch, z, false);
        let (h, w) = self.arch.grid();
        let mut maps = Vec::with_capacity(z.ncols());
        for n in 0..z.ncols() {
            let values = net::crop(&self.arch, &out, n);
            if values.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite("decoder output"));
            }
            maps.push(GridMap::unconstrained(h, w, values)?);
        }
        Ok(maps)
    }

    pub fn decode(&self, z: &[f64]) -> Result<GridMap, ModelError> {
        let col = Array2::from_shape_vec((z.len(), 1), z.to_vec()).expect("column vector");
        Ok(self.decode_batch(&col)?.remove(0))
    }

    /// One step of the latent dynamics from `(z, a, state)`.
    pub fn dynamics_step(&self, z: &[f64], action: &ActionCoord, state: &DynamicsState) -> Result<DynamicsOutput, ModelError> {
        if z.len() != self.arch.latent_dim {
            return Err(ModelError::LatentDim {
                expected: self.arch.latent_dim,
                actual: z.len(),
            });
        }
        let step = net::dynamics_forward(
            &self.weights,
            &Array1::from(z.to_vec()),
            action.features(),
            &Array1::from(state.hidden.clone()),
            &Array1::from(state.cell.clone()),
        );
        Ok(DynamicsOutput {
            next_mean: step.mean.to_vec(),
            next_log_var: step.log_var.to_vec(),
            next_state: DynamicsState {
                hidden: step.lstm.h.to_vec(),
                cell: step.lstm.c.to_vec(),
            },
        })
    }

    /// Point reconstruction: decode of the posterior mean.
    pub fn reconstruct(&self, obs: &Observation) -> Result<GridMap, ModelError> {
        let (mean, _) = self.encode_batch(&[obs])?;
        Ok(self.decode_batch(&mean)?.remove(0))
    }

    pub fn initial_state(&self) -> DynamicsState {
        DynamicsState::zeros(self.arch.hidden_dim)
    }
}

/// `0.5 * sum(exp(lv) + mu^2 - 1 - lv)`.
pub fn kl_to_standard_normal(mean: &[f64], log_var: &[f64]) -> f64 {
    0.5 * mean
        .iter()
        .zip(log_var)
        .map(|(m, lv)| lv.exp() + m * m - 1.0 - lv)
        .sum::<f64>()
}
