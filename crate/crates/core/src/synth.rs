//! Synthetic empty/occupied RSSI pairs.
//!
//! The empty map follows log-distance path loss from a single access point
//! plus a spatially correlated shadowing field. Occupants subtract Gaussian
//! attenuation bumps; the shadowing field is shared by both maps so the
//! occupancy is the only difference within a pair.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::MapError;
use crate::grid::{bilinear_upscale, check_scale, EnvironmentPair, GridMap, PairMeta, Source, Split, UnitTag};
use crate::rng::{self, tag};

/// Minimum distance (cells) used in the path-loss term.
pub const MIN_DISTANCE: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub base_h: usize,
    pub base_w: usize,
    /// Access point position in cell coordinates (row, col); cell centers sit on integers.
    pub ap_location: (f64, f64),
    pub tx_ref_dbm: f64,
    pub path_loss_exp: f64,
    pub shadowing_sigma_dbm: f64,
    pub correlation_len_cells: f64,
    pub n_occupants: usize,
    pub occupant_atten_db: f64,
    pub occupant_radius_cells: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            base_h: 9,
            base_w: 11,
            ap_location: (2.0, 3.0),
            tx_ref_dbm: -30.0,
            path_loss_exp: 2.2,
            shadowing_sigma_dbm: 2.0,
            correlation_len_cells: 1.5,
            n_occupants: 8,
            occupant_atten_db: 6.0,
            occupant_radius_cells: 1.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: &str| Err(SynthError::Config(m.to_string()));
        if self.base_h < 2 || self.base_w < 2 {
            return fail("base dimensions must be at least 2");
        }
        let (r, c) = self.ap_location;
        if !(0.0..=(self.base_h - 1) as f64).contains(&r) || !(0.0..=(self.base_w - 1) as f64).contains(&c) {
            return fail("ap_location must lie inside the grid");
        }
        if !self.tx_ref_dbm.is_finite() {
            return fail("tx_ref_dbm must be finite");
        }
        if !(self.path_loss_exp > 0.0 && self.path_loss_exp.is_finite()) {
            return fail("path_loss_exp must be positive");
        }
        if !(self.shadowing_sigma_dbm >= 0.0 && self.shadowing_sigma_dbm.is_finite()) {
            return fail("shadowing_sigma_dbm must be non-negative");
        }
        if !(self.correlation_len_cells > 0.0 && self.correlation_len_cells.is_finite()) {
            return fail("correlation_len_cells must be positive");
        }
        if !(self.occupant_atten_db >= 0.0 && self.occupant_atten_db.is_finite()) {
            return fail("occupant_atten_db must be non-negative");
        }
        if !(self.occupant_radius_cells > 0.0 && self.occupant_radius_cells.is_finite()) {
            return fail("occupant_radius_cells must be positive");
        }
        Ok(())
    }
}

/// Occupant centers (row, col) drawn for `occupancy_seed`, uniformly over
/// interior cells with a one-cell margin.
pub fn occupant_centers(config: &SynthConfig, occupancy_seed: u64) -> Vec<(usize, usize)> {
    let mut rng = rng::stream(occupancy_seed, &[tag::OCCUPANTS]);
    let (h, w) = (config.base_h, config.base_w);
    let rows = if h > 2 { 1..h - 1 } else { 0..h };
    let cols = if w > 2 { 1..w - 1 } else { 0..w };
    (0..config.n_occupants)
        .map(|_| (rng.random_range(rows.clone()), rng.random_range(cols.clone())))
        .collect()
}

/// Attenuation (dB, non-negative) of all occupants at every cell.
pub fn occupancy_field(config: &SynthConfig, centers: &[(usize, usize)]) -> Vec<f64> {
    let (h, w) = (config.base_h, config.base_w);
    let two_r2 = 2.0 * config.occupant_radius_cells * config.occupant_radius_cells;
    let mut field = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for &(orow, ocol) in centers {
                let dr = r as f64 - orow as f64;
                let dc = c as f64 - ocol as f64;
                acc += config.occupant_atten_db * (-(dr * dr + dc * dc) / two_r2).exp();
            }
            field[r * w + c] = acc;
        }
    }
    field
}

/// Zero-mean shadowing field with sample standard deviation `shadowing_sigma_dbm`.
pub fn shadowing_field(config: &SynthConfig, room_seed: u64) -> Vec<f64> {
    let (h, w) = (config.base_h, config.base_w);
    if config.shadowing_sigma_dbm == 0.0 {
        return vec![0.0; h * w];
    }
    let mut rng = rng::stream(room_seed, &[tag::SHADOWING]);
    let white = rng::normals(&mut rng, h * w);
    let sigma = config.correlation_len_cells;
    let radius = (3.0 * sigma).ceil() as isize;
    let mut filtered = vec![0.0; h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let (mut acc, mut norm) = (0.0, 0.0);
            for dr in -radius..=radius {
                for dc in -radius..=radius {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        continue;
                    }
                    let k = (-((dr * dr + dc * dc) as f64) / (2.0 * sigma * sigma)).exp();
                    acc += k * white[rr as usize * w + cc as usize];
                    norm += k;
                }
            }
            filtered[r as usize * w + c as usize] = acc / norm;
        }
    }
    let n = filtered.len() as f64;
    let mean = filtered.iter().sum::<f64>() / n;
    let var = filtered.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let scale = if var > 0.0 { config.shadowing_sigma_dbm / var.sqrt() } else { 0.0 };
    filtered.iter().map(|v| (v - mean) * scale).collect()
}

/// Path loss plus shadowing, without occupants.
pub fn empty_field(config: &SynthConfig, room_seed: u64) -> Vec<f64> {
    let (h, w) = (config.base_h, config.base_w);
    let shadow = shadowing_field(config, room_seed);
    let (ar, ac) = config.ap_location;
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let d = ((r as f64 - ar).powi(2) + (c as f64 - ac).powi(2)).sqrt();
            let pl = config.tx_ref_dbm - 10.0 * config.path_loss_exp * d.max(MIN_DISTANCE).log10();
            out.push(pl + shadow[r * w + c]);
        }
    }
    out
}

/// Generates one pair in dBm. The room (shadowing) and the occupancy are
/// seeded independently so a dataset can hold several occupancies of one room.
pub fn synth_pair_in_room(config: &SynthConfig, room_seed: u64, occupancy_seed: u64) -> Result<EnvironmentPair, SynthError> {
    config.validate()?;
    let (h, w) = (config.base_h, config.base_w);
    let empty = empty_field(config, room_seed);
    let bumps = occupancy_field(config, &occupant_centers(config, occupancy_seed));
    let occupied: Vec<f64> = empty.iter().zip(&bumps).map(|(e, b)| e - b).collect();
    let meta = PairMeta {
        source: Source::Synthetic,
        seed: occupancy_seed,
        scale: 1,
        dbm_min: None,
        dbm_max: None,
        split: None,
    };
    Ok(EnvironmentPair::new(
        GridMap::new(h, w, empty, UnitTag::Dbm)?,
        GridMap::new(h, w, occupied, UnitTag::Dbm)?,
        meta,
    )?)
}

pub fn synth_pair(config: &SynthConfig) -> Result<EnvironmentPair, SynthError> {
    synth_pair_in_room(config, config.seed, config.seed)
}

/// Affine map of both maps to `[0, 1]` using their joint dBm range.
pub fn normalize_pair(pair: &EnvironmentPair) -> Result<EnvironmentPair, MapError> {
    if pair.unit() != UnitTag::Dbm {
        return Err(MapError::WrongUnit { expected: UnitTag::Dbm });
    }
    let lo = pair.empty.min().min(pair.occupied.min());
    let hi = pair.empty.max().max(pair.occupied.max());
    if !(hi > lo) {
        return Err(MapError::DegenerateRange(lo));
    }
    let span = hi - lo;
    let norm = |v: f64| ((v - lo) / span).clamp(0.0, 1.0);
    let mut meta = pair.meta.clone();
    meta.dbm_min = Some(lo);
    meta.dbm_max = Some(hi);
    EnvironmentPair::new(
        pair.empty.map_values(UnitTag::Normalized, norm)?,
        pair.occupied.map_values(UnitTag::Normalized, norm)?,
        meta,
    )
}

pub fn denormalize_pair(pair: &EnvironmentPair) -> Result<EnvironmentPair, MapError> {
    if pair.unit() != UnitTag::Normalized {
        return Err(MapError::WrongUnit {
            expected: UnitTag::Normalized,
        });
    }
    let mut meta = pair.meta.clone();
    let empty = pair.map_to_dbm(&pair.empty)?;
    let occupied = pair.map_to_dbm(&pair.occupied)?;
    meta.dbm_min = None;
    meta.dbm_max = None;
    EnvironmentPair::new(empty, occupied, meta)
}

/// Per-pair occupancy seed inside a dataset.
pub fn pair_seed(root: u64, index: usize) -> u64 {
    rng::derive_seed(root, &[tag::PAIR, index as u64])
}

/// `n_train + n_eval` occupancies of one synthetic room, upscaled by `scale`
/// and normalized per pair. Train pairs come first.
pub fn make_dataset(config: &SynthConfig, n_train: usize, n_eval: usize, scale: usize) -> Result<Vec<EnvironmentPair>, SynthError> {
    if n_train == 0 || n_eval == 0 {
        return Err(SynthError::Config("n_train and n_eval must be at least 1".into()));
    }
    check_scale(scale)?;
    config.validate()?;
    (0..n_train + n_eval)
        .map(|i| {
            let raw = synth_pair_in_room(config, config.seed, pair_seed(config.seed, i))?;
            let mut meta = raw.meta.clone();
            meta.scale = scale;
            meta.split = Some(if i < n_train { Split::Train } else { Split::Eval });
            let up = EnvironmentPair::new(bilinear_upscale(&raw.empty, scale)?, bilinear_upscale(&raw.occupied, scale)?, meta)?;
            Ok(normalize_pair(&up)?)
        })
        .collect()
}
