//! Grid data model shared by every other module.
//!
//! Cells are addressed by a single row-major index `i = r * W + c`. The same
//! order is used for masks, candidate pools and tie-breaking.

use serde::{Deserialize, Serialize};

use crate::error::MapError;

/// Unit carried by every value of a [`GridMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnitTag {
    #[serde(rename = "dbm")]
    Dbm,
    #[serde(rename = "norm")]
    Normalized,
}

impl UnitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitTag::Dbm => "dbm",
            UnitTag::Normalized => "norm",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "dbm" => Some(UnitTag::Dbm),
            "norm" => Some(UnitTag::Normalized),
            _ => None,
        }
    }
}

/// Dense `H x W` field of RSSI values stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    unit: UnitTag,
}

impl GridMap {
    /// Builds a map after checking shape, finiteness and (for normalized maps) range.
    pub fn new(height: usize, width: usize, values: Vec<f64>, unit: UnitTag) -> Result<Self, MapError> {
        if height == 0 || width == 0 {
            return Err(MapError::EmptyGrid { height, width });
        }
        if values.len() != height * width {
            return Err(MapError::ValueCount {
                expected: height * width,
                actual: values.len(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(MapError::NonFinite { index, value });
            }
            if unit == UnitTag::Normalized && !(0.0..=1.0).contains(&value) {
                return Err(MapError::OutOfUnitRange { index, value });
            }
        }
        Ok(GridMap {
            height,
            width,
            values,
            unit,
        })
    }

    /// Builds a normalized-unit map without the `[0, 1]` range check.
    ///
    /// Decoder outputs come from a linear head and may stray outside the unit
    /// interval; they are still expressed in normalized units.
    pub fn unconstrained(height: usize, width: usize, values: Vec<f64>) -> Result<Self, MapError> {
        // Validate shape and finiteness as a dBm map, then retag.
        let mut map = GridMap::new(height, width, values, UnitTag::Dbm)?;
        map.unit = UnitTag::Normalized;
        Ok(map)
    }

    pub fn filled(height: usize, width: usize, value: f64, unit: UnitTag) -> Result<Self, MapError> {
        GridMap::new(height, width, vec![value; height * width], unit)
    }

    pub fn zeros(height: usize, width: usize, unit: UnitTag) -> Result<Self, MapError> {
        GridMap::filled(height, width, 0.0, unit)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        unit: UnitTag,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, MapError> {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        GridMap::new(height, width, values, unit)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn unit(&self) -> UnitTag {
        self.unit
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.width + c]
    }

    pub fn at(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn index_of(&self, r: usize, c: usize) -> usize {
        r * self.width + c
    }

    pub fn coords_of(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }

    /// Applies `f` to every value, keeping shape. The result is re-validated for `unit`.
    pub fn map_values(&self, unit: UnitTag, f: impl Fn(f64) -> f64) -> Result<GridMap, MapError> {
        GridMap::new(self.height, self.width, self.values.iter().map(|&v| f(v)).collect(), unit)
    }

    fn check_comparable(&self, other: &GridMap) -> Result<(), MapError> {
        if self.shape() != other.shape() {
            return Err(MapError::ShapeMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        if self.unit != other.unit {
            return Err(MapError::UnitMismatch);
        }
        Ok(())
    }
}

/// Root-mean-square error over the whole grid.
pub fn rmse(estimate: &GridMap, truth: &GridMap) -> Result<f64, MapError> {
    estimate.check_comparable(truth)?;
    let sum: f64 = estimate
        .values
        .iter()
        .zip(&truth.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / estimate.len() as f64).sqrt())
}

/// Mean absolute error over the whole grid.
pub fn mae(estimate: &GridMap, truth: &GridMap) -> Result<f64, MapError> {
    estimate.check_comparable(truth)?;
    let sum: f64 = estimate
        .values
        .iter()
        .zip(&truth.values)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / estimate.len() as f64)
}

/// Upscale factors accepted by [`bilinear_upscale`].
pub const SCALE_FACTORS: [usize; 5] = [1, 2, 4, 8, 16];

pub fn check_scale(factor: usize) -> Result<(), MapError> {
    if SCALE_FACTORS.contains(&factor) {
        Ok(())
    } else {
        Err(MapError::UnsupportedScale(factor))
    }
}

/// Align-corners bilinear upscaling to `(factor * H, factor * W)`.
///
/// Output sample `o` along an axis reads the source at
/// `o * (in_len - 1) / (out_len - 1)`, so the four corners coincide with the
/// input corners. A length-1 axis is replicated.
pub fn bilinear_upscale(map: &GridMap, factor: usize) -> Result<GridMap, MapError> {
    check_scale(factor)?;
    if factor == 1 {
        return Ok(map.clone());
    }
    let (h, w) = map.shape();
    let (oh, ow) = (h * factor, w * factor);
    let rows: Vec<(usize, usize, f64)> = (0..oh).map(|o| source_taps(o, h, oh)).collect();
    let cols: Vec<(usize, usize, f64)> = (0..ow).map(|o| source_taps(o, w, ow)).collect();
    let mut values = Vec::with_capacity(oh * ow);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            let top = lerp(map.get(r0, c0), map.get(r0, c1), fc);
            let bottom = lerp(map.get(r1, c0), map.get(r1, c1), fc);
            values.push(lerp(top, bottom, fr));
        }
    }
    // Convex combinations of in-range values may round a hair outside [0, 1].
    if map.unit == UnitTag::Normalized {
        for v in &mut values {
            *v = v.clamp(0.0, 1.0);
        }
    }
    GridMap::new(oh, ow, values, map.unit)
}

fn source_taps(out: usize, in_len: usize, out_len: usize) -> (usize, usize, f64) {
    if in_len == 1 {
        return (0, 0, 0.0);
    }
    // Exact rational position keeps lattice points bit-exact.
    let num = out * (in_len - 1);
    let den = out_len - 1;
    let lo = num / den;
    let rem = num % den;
    if rem == 0 {
        (lo, lo, 0.0)
    } else {
        (lo, (lo + 1).min(in_len - 1), rem as f64 / den as f64)
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

/// The evolving `(S_t, V_t, M_t)` triple: visited cells, sparse value map and binary mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementState {
    height: usize,
    width: usize,
    visited: Vec<usize>,
    values: Vec<f64>,
    mask: Vec<f64>,
}

impl MeasurementState {
    /// Empty state for an `H x W` grid (zeros everywhere).
    pub fn new(height: usize, width: usize) -> Self {
        MeasurementState {
            height,
            width,
            visited: Vec::new(),
            values: vec![0.0; height * width],
            mask: vec![0.0; height * width],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    /// Measured cells in acquisition order.
    pub fn visited(&self) -> &[usize] {
        &self.visited
    }

    pub fn is_visited(&self, index: usize) -> bool {
        self.mask.get(index).is_some_and(|&m| m == 1.0)
    }

    pub fn len(&self) -> usize {
        self.visited.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visited.is_empty()
    }

    pub fn value_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn mask_slice(&self) -> &[f64] {
        &self.mask
    }

    /// Unvisited cells in ascending index order.
    pub fn unvisited(&self) -> Vec<usize> {
        (0..self.cells()).filter(|&i| self.mask[i] == 0.0).collect()
    }

    /// Records `value` at `index`.
    pub fn apply_measurement(&mut self, index: usize, value: f64) -> Result<(), MapError> {
        if index >= self.cells() {
            return Err(MapError::OutOfRange {
                index,
                cells: self.cells(),
            });
        }
        if self.mask[index] == 1.0 {
            return Err(MapError::DuplicateMeasurement(index));
        }
        if !value.is_finite() {
            return Err(MapError::NonFinite { index, value });
        }
        self.visited.push(index);
        self.values[index] = value;
        self.mask[index] = 1.0;
        Ok(())
    }

    /// Non-mutating variant of [`MeasurementState::apply_measurement`].
    pub fn with_measurement(&self, index: usize, value: f64) -> Result<Self, MapError> {
        let mut next = self.clone();
        next.apply_measurement(index, value)?;
        Ok(next)
    }

    /// `V_t` as a map in the given unit (zeros at unvisited cells).
    pub fn value_map(&self, unit: UnitTag) -> Result<GridMap, MapError> {
        GridMap::new(self.height, self.width, self.values.clone(), unit)
    }

    pub fn mask_map(&self) -> GridMap {
        GridMap {
            height: self.height,
            width: self.width,
            values: self.mask.clone(),
            unit: UnitTag::Normalized,
        }
    }

    /// Measured `(index, value)` pairs in acquisition order.
    pub fn measurements(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.visited.iter().map(|&i| (i, self.values[i]))
    }
}

/// Model input `x_t = {Z_e, V_t, M_t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    empty_ref: GridMap,
    state: MeasurementState,
}

impl Observation {
    pub fn empty_ref(&self) -> &GridMap {
        &self.empty_ref
    }

    pub fn state(&self) -> &MeasurementState {
        &self.state
    }

    pub fn shape(&self) -> (usize, usize) {
        self.empty_ref.shape()
    }

    /// The three channels, each row-major: empty reference, sparse values, mask.
    pub fn channels(&self) -> [&[f64]; 3] {
        [self.empty_ref.values(), self.state.value_slice(), self.state.mask_slice()]
    }

    pub fn into_parts(self) -> (GridMap, MeasurementState) {
        (self.empty_ref, self.state)
    }
}

pub fn make_observation(empty_ref: &GridMap, state: &MeasurementState) -> Result<Observation, MapError> {
    if empty_ref.shape() != state.shape() {
        return Err(MapError::ShapeMismatch {
            left: empty_ref.shape(),
            right: state.shape(),
        });
    }
    Ok(Observation {
        empty_ref: empty_ref.clone(),
        state: state.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthetic,
    Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

/// Provenance of an [`EnvironmentPair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub source: Source,
    pub seed: u64,
    pub scale: usize,
    pub dbm_min: Option<f64>,
    pub dbm_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// Empty map `Z_e` and occupied map `Z_o` of the same space.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentPair {
    pub empty: GridMap,
    pub occupied: GridMap,
    pub meta: PairMeta,
}

impl EnvironmentPair {
    pub fn new(empty: GridMap, occupied: GridMap, meta: PairMeta) -> Result<Self, MapError> {
        empty.check_comparable(&occupied)?;
        if empty.unit() == UnitTag::Normalized {
            match (meta.dbm_min, meta.dbm_max) {
                (Some(lo), Some(hi)) if lo < hi => {}
                (Some(lo), Some(_)) => return Err(MapError::DegenerateRange(lo)),
                _ => return Err(MapError::MissingBounds),
            }
        }
        Ok(EnvironmentPair { empty, occupied, meta })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.empty.shape()
    }

    pub fn unit(&self) -> UnitTag {
        self.empty.unit()
    }

    /// Converts a normalized-unit value back to dBm using the pair's bounds.
    pub fn to_dbm(&self, value: f64) -> Result<f64, MapError> {
        let (lo, hi) = self.bounds()?;
        Ok(lo + value * (hi - lo))
    }

    pub fn bounds(&self) -> Result<(f64, f64), MapError> {
        match (self.meta.dbm_min, self.meta.dbm_max) {
            (Some(lo), Some(hi)) => Ok((lo, hi)),
            _ => Err(MapError::MissingBounds),
        }
    }

    /// Denormalizes any map expressed in this pair's normalized units.
    pub fn map_to_dbm(&self, map: &GridMap) -> Result<GridMap, MapError> {
        if map.unit() == UnitTag::Dbm {
            return Ok(map.clone());
        }
        let (lo, hi) = self.bounds()?;
        map.map_values(UnitTag::Dbm, |v| lo + v * (hi - lo))
    }
}
