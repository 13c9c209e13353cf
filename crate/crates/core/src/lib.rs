//! Active reconstruction of indoor RSSI radio environment maps.
//!
//! A conditional convolutional VAE reconstructs the occupied map from the
//! empty-environment reference plus sparse measurements; an action-conditioned
//! LSTM predicts how the latent belief moves when a cell is measured. The
//! [`dreamer`] samples those predictions to score candidate cells before
//! measuring them. [`gp`] and the empty-map copy are the comparison baselines.

pub mod dreamer;
pub mod error;
pub mod gp;
pub mod grid;
pub mod io;
pub mod nn;
pub mod rng;
pub mod synth;
pub mod world_model;

pub use error::{FormatError, MapError};
pub use grid::{
    bilinear_upscale, mae, make_observation, rmse, EnvironmentPair, GridMap, MeasurementState, Observation, PairMeta,
    Source, Split, UnitTag,
};
