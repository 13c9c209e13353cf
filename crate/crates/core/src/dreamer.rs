//! Dreaming-based sequential measurement control.
//!
//! Each step encodes the current observation, samples a pool of unmeasured
//! candidate cells, imagines `K` next-step latents per candidate through the
//! dynamics model, decodes them, and scores the candidate by the mean
//! per-cell sample variance of the decoded maps. The selected cell is then
//! queried from the environment and the loop repeats.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{FormatError, MapError};
use crate::grid::{make_observation, rmse, EnvironmentPair, GridMap, MeasurementState};
use crate::rng::{self, tag, StreamRng};
use crate::world_model::{ActionCoord, DynamicsState, LatentBelief, ModelError, WorldModel};

#[derive(Debug, Error)]
pub enum DreamError {
    #[error("invalid acquisition config: {0}")]
    Config(String),
    #[error("no unmeasured cells left")]
    NoFreeCells,
    #[error("no candidates to select from")]
    NoCandidates,
    #[error("budget {budget} exceeds the {cells} cells of the grid")]
    BudgetTooLarge { budget: usize, cells: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    ArgminVariance,
    ArgmaxVariance,
    Random,
}

impl SelectionRule {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "argmin_variance" | "argmin" => Some(SelectionRule::ArgminVariance),
            "argmax_variance" | "argmax" => Some(SelectionRule::ArgmaxVariance),
            "random" => Some(SelectionRule::Random),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    pub pool_size: usize,
    pub dream_samples: usize,
    pub budget: usize,
    pub selection_rule: SelectionRule,
    pub seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            pool_size: 40,
            dream_samples: 12,
            budget: 10,
            selection_rule: SelectionRule::ArgminVariance,
            seed: 0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<(), DreamError> {
        if self.pool_size == 0 {
            return Err(DreamError::Config("pool_size must be at least 1".into()));
        }
        if self.dream_samples < 2 {
            return Err(DreamError::Config("dream_samples must be at least 2".into()));
        }
        if self.budget == 0 {
            return Err(DreamError::Config("budget must be at least 1".into()));
        }
        Ok(())
    }
}

/// How candidates are scored; results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Test hook: `ZeroVariance` replaces the predicted latent spread with zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DreamMode {
    #[default]
    Normal,
    ZeroVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub execution: Execution,
    pub dream_mode: DreamMode,
    /// Record the RMSE of the reconstruction after every step.
    pub track_rmse: bool,
}

/// Source of ground-truth measurements.
pub trait Environment {
    fn shape(&self) -> (usize, usize);
    fn query(&mut self, cell: usize) -> f64;
}

/// Answers queries from a map and counts them.
#[derive(Debug, Clone)]
pub struct MapOracle<'a> {
    map: &'a GridMap,
    queries: Vec<usize>,
}

impl<'a> MapOracle<'a> {
    pub fn new(map: &'a GridMap) -> Self {
        MapOracle { map, queries: Vec::new() }
    }

    pub fn query_count(&self) -> usize {
        self.queries.len()
    }

    pub fn queried(&self) -> &[usize] {
        &self.queries
    }
}

impl Environment for MapOracle<'_> {
    fn shape(&self) -> (usize, usize) {
        self.map.shape()
    }

    fn query(&mut self, cell: usize) -> f64 {
        self.queries.push(cell);
        self.map.at(cell)
    }
}

/// One acquisition step as written to the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub t: usize,
    pub action: [usize; 2],
    pub value: f64,
    /// `[row, col, u]` for every candidate, in pool order.
    pub scores: Vec<(usize, usize, f64)>,
    pub rmse_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalRecord {
    pub reconstruction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum TraceLine {
    Step(StepRecord),
    Final(FinalRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionTrace {
    pub steps: Vec<StepRecord>,
    pub state: MeasurementState,
    pub reconstruction: GridMap,
}

impl AcquisitionTrace {
    /// Measurement state after the first `n` steps.
    pub fn state_after(&self, n: usize) -> Result<MeasurementState, MapError> {
        let (h, w) = self.state.shape();
        let mut s = MeasurementState::new(h, w);
        for rec in self.steps.iter().take(n) {
            s.apply_measurement(rec.action[0] * w + rec.action[1], rec.value)?;
        }
        Ok(s)
    }

    pub fn cells(&self) -> Vec<usize> {
        let w = self.state.shape().1;
        self.steps.iter().map(|r| r.action[0] * w + r.action[1]).collect()
    }
}

/// Uniform draw of `min(P, free)` distinct unmeasured cells.
pub fn sample_candidates(state: &MeasurementState, pool_size: usize, rng: &mut StreamRng) -> Result<Vec<ActionCoord>, DreamError> {
    let free = state.unvisited();
    if free.is_empty() {
        return Err(DreamError::NoFreeCells);
    }
    let (h, w) = state.shape();
    let picks = sample(rng, free.len(), pool_size.min(free.len()));
    Ok(picks.into_iter().map(|i| ActionCoord::from_cell(free[i], h, w)).collect())
}

/// Mean over cells of the unbiased per-cell variance across `maps`.
///
/// Deviations are taken from the first map before squaring, so identical
/// maps give exactly zero.
pub fn score_from_maps(maps: &[GridMap]) -> f64 {
    let k = maps.len();
    assert!(k >= 2, "variance needs at least two samples");
    let cells = maps[0].len();
    let base = maps[0].values();
    let mut total = 0.0;
    for p in 0..cells {
        let (mut s, mut ss) = (0.0, 0.0);
        for m in &maps[1..] {
            let d = m.values()[p] - base[p];
            s += d;
            ss += d * d;
        }
        total += ((ss - s * s / k as f64) / (k - 1) as f64).max(0.0);
    }
    total / cells as f64
}

/// Dream score `u(a)` for one candidate. Inputs are borrowed immutably, so
/// the committed belief and recurrent state cannot change.
pub fn score_candidate(
    model: &WorldModel,
    z_t: &LatentBelief,
    state: &DynamicsState,
    action: &ActionCoord,
    k: usize,
    rng: &mut StreamRng,
    mode: DreamMode,
) -> Result<f64, DreamError> {
    if k < 2 {
        return Err(DreamError::Config("dream_samples must be at least 2".into()));
    }
    let step = model.dynamics_step(&z_t.sample, action, state)?;
    let latent = step.next_mean.len();
    let noise = rng::normals(rng, latent * k);
    let mut z = Array2::<f64>::zeros((latent, k));
    for d in 0..latent {
        let std = match mode {
            DreamMode::Normal => (0.5 * step.next_log_var[d]).exp(),
            DreamMode::ZeroVariance => 0.0,
        };
        for j in 0..k {
            z[[d, j]] = step.next_mean[d] + std * noise[j * latent + d];
        }
    }
    let maps = model.decode_batch(&z)?;
    Ok(score_from_maps(&maps))
}

/// Picks from `(candidate, score)` pairs. Ties go to the lowest cell index.
pub fn select_action(scores: &[(ActionCoord, f64)], rule: SelectionRule, rng: &mut StreamRng) -> Result<ActionCoord, DreamError> {
    if scores.is_empty() {
        return Err(DreamError::NoCandidates);
    }
    let better = |a: &(ActionCoord, f64), b: &(ActionCoord, f64)| match rule {
        SelectionRule::ArgminVariance => a.1 < b.1 || (a.1 == b.1 && a.0.cell_index < b.0.cell_index),
        _ => a.1 > b.1 || (a.1 == b.1 && a.0.cell_index < b.0.cell_index),
    };
    if rule == SelectionRule::Random {
        return Ok(scores[rng.random_range(0..scores.len())].0);
    }
    let mut best = &scores[0];
    for s in &scores[1..] {
        if better(s, best) {
            best = s;
        }
    }
    Ok(best.0)
}

/// Runs the full loop on `pair`, querying its occupied map.
pub fn run_acquisition(model: &WorldModel, pair: &EnvironmentPair, cfg: &AcquisitionConfig) -> Result<AcquisitionTrace, DreamError> {
    let mut oracle = MapOracle::new(&pair.occupied);
    run_acquisition_with(model, &pair.empty, &mut oracle, Some(&pair.occupied), cfg, RunOptions::default())
}

/// Runs the loop against an arbitrary environment. `truth` is read only for
/// the optional per-step RMSE.
pub fn run_acquisition_with(
    model: &WorldModel,
    empty: &GridMap,
    env: &mut dyn Environment,
    truth: Option<&GridMap>,
    cfg: &AcquisitionConfig,
    opts: RunOptions,
) -> Result<AcquisitionTrace, DreamError> {
    cfg.validate()?;
    let (h, w) = empty.shape();
    if env.shape() != (h, w) {
        return Err(MapError::ShapeMismatch {
            left: (h, w),
            right: env.shape(),
        }
        .into());
    }
    if cfg.budget > h * w {
        return Err(DreamError::BudgetTooLarge {
            budget: cfg.budget,
            cells: h * w,
        });
    }
    let truth = truth.map(|t| GridMap::unconstrained(h, w, t.values().to_vec())).transpose()?;

    let mut state = MeasurementState::new(h, w);
    let mut dyn_state = model.initial_state();
    let mut steps = Vec::with_capacity(cfg.budget);
    for t in 0..cfg.budget {
        let obs = make_observation(empty, &state)?;
        let z_t = model.encode_with_rng(&obs, &mut rng::stream(cfg.seed, &[tag::ENCODE, t as u64]))?;
        let candidates = sample_candidates(&state, cfg.pool_size, &mut rng::stream(cfg.seed, &[tag::CANDIDATES, t as u64]))?;

        let score = |a: &ActionCoord| -> Result<(ActionCoord, f64), DreamError> {
            let mut r = rng::stream(cfg.seed, &[tag::DREAM, t as u64, a.cell_index as u64]);
            let u = score_candidate(model, &z_t, &dyn_state, a, cfg.dream_samples, &mut r, opts.dream_mode)?;
            Ok((*a, u))
        };
        let scores: Vec<(ActionCoord, f64)> = match opts.execution {
            Execution::Serial => candidates.iter().map(score).collect::<Result<_, _>>()?,
            Execution::Parallel => candidates.par_iter().map(score).collect::<Result<_, _>>()?,
        };

        let chosen = select_action(&scores, cfg.selection_rule, &mut rng::stream(cfg.seed, &[tag::RANDOM_RULE, t as u64]))?;
        let value = env.query(chosen.cell_index);
        state.apply_measurement(chosen.cell_index, value)?;
        dyn_state = model.dynamics_step(&z_t.sample, &chosen, &dyn_state)?.next_state;

        let rmse_after = match (&truth, opts.track_rmse) {
            (Some(t), true) => Some(rmse(&model.reconstruct(&make_observation(empty, &state)?)?, t)?),
            _ => None,
        };
        let (r, c) = chosen.coords(w);
        steps.push(StepRecord {
            t,
            action: [r, c],
            value,
            scores: scores
                .iter()
                .map(|(a, u)| {
                    let (r, c) = a.coords(w);
                    (r, c, *u)
                })
                .collect(),
            rmse_after,
        });
    }
    let reconstruction = model.reconstruct(&make_observation(empty, &state)?)?;
    Ok(AcquisitionTrace {
        steps,
        state,
        reconstruction,
    })
}

/// One JSON object per step, then `{"reconstruction": path}` when given.
pub fn trace_to_jsonl(steps: &[StepRecord], reconstruction: Option<&str>) -> Result<String, FormatError> {
    let mut out = String::new();
    for s in steps {
        out.push_str(&serde_json::to_string(s)?);
        out.push('\n');
    }
    if let Some(path) = reconstruction {
        out.push_str(&serde_json::to_string(&FinalRecord {
            reconstruction: path.to_string(),
        })?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_trace_jsonl(text: &str) -> Result<(Vec<StepRecord>, Option<String>), FormatError> {
    let mut steps = Vec::new();
    let mut last = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if last.is_some() {
            return Err(FormatError::Body {
                line: i + 1,
                message: "record after the final reconstruction record".into(),
            });
        }
        match serde_json::from_str::<TraceLine>(line).map_err(|e| FormatError::Body {
            line: i + 1,
            message: e.to_string(),
        })? {
            TraceLine::Step(s) => steps.push(s),
            TraceLine::Final(f) => last = Some(f.reconstruction),
        }
    }
    Ok((steps, last))
}

pub fn save_trace(steps: &[StepRecord], reconstruction: Option<&str>, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, trace_to_jsonl(steps, reconstruction)?).map_err(|e| FormatError::io(path, e))
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<(Vec<StepRecord>, Option<String>), FormatError> {
    let path = path.as_ref();
    parse_trace_jsonl(&fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_dataset, SynthConfig};
    use crate::world_model::Architecture;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn setup() -> (WorldModel, EnvironmentPair) {
        let pair = make_dataset(&SynthConfig::default(), 1, 1, 1).unwrap().remove(1);
        (WorldModel::new(Architecture::standard(9, 11), 3), pair)
    }

    fn small(rule: SelectionRule, budget: usize, seed: u64) -> AcquisitionConfig {
        AcquisitionConfig {
            pool_size: 6,
            dream_samples: 3,
            budget,
            selection_rule: rule,
            seed,
        }
    }

    #[test]
    fn candidate_pools() {
        let mut r = rng::stream(0, &[]);
        let s = MeasurementState::new(3, 3);
        let all: HashSet<usize> = sample_candidates(&s, 40, &mut r).unwrap().iter().map(|a| a.cell_index).collect();
        assert_eq!(all, (0..9).collect());

        let mut s = MeasurementState::new(3, 3);
        for i in 0..8 {
            s.apply_measurement(i, 0.5).unwrap();
        }
        let one = sample_candidates(&s, 40, &mut r).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].cell_index, 8);
        s.apply_measurement(8, 0.5).unwrap();
        assert!(matches!(sample_candidates(&s, 40, &mut r), Err(DreamError::NoFreeCells)));
    }

    proptest! {
        #[test]
        fn candidates_avoid_measured_cells(seed in 0u64..1000, measured in prop::collection::hash_set(0usize..99, 10)) {
            let mut s = MeasurementState::new(9, 11);
            for &m in &measured {
                s.apply_measurement(m, 0.1).unwrap();
            }
            let c = sample_candidates(&s, 5, &mut rng::stream(seed, &[])).unwrap();
            let picked: HashSet<usize> = c.iter().map(|a| a.cell_index).collect();
            prop_assert_eq!(picked.len(), 5);
            prop_assert!(picked.iter().all(|p| !measured.contains(p) && *p < 99));
        }

        #[test]
        fn argmin_matches_scan(seed in 0u64..500) {
            let mut r = rng::stream(seed, &[]);
            let scores: Vec<(ActionCoord, f64)> = sample(&mut r, 99, 40)
                .into_iter()
                .map(|c| (ActionCoord::from_cell(c, 9, 11), (r.random_range(0..8) as f64) * 0.125))
                .collect();
            let mut lo = (usize::MAX, f64::INFINITY);
            let mut hi = (usize::MAX, f64::NEG_INFINITY);
            for (a, u) in &scores {
                if *u < lo.1 || (*u == lo.1 && a.cell_index < lo.0) { lo = (a.cell_index, *u); }
                if *u > hi.1 || (*u == hi.1 && a.cell_index < hi.0) { hi = (a.cell_index, *u); }
            }
            prop_assert_eq!(select_action(&scores, SelectionRule::ArgminVariance, &mut r).unwrap().cell_index, lo.0);
            prop_assert_eq!(select_action(&scores, SelectionRule::ArgmaxVariance, &mut r).unwrap().cell_index, hi.0);
        }

        #[test]
        fn score_is_non_negative(vals in prop::collection::vec(-3.0f64..3.0, 12)) {
            let maps: Vec<GridMap> = vals.chunks(4).map(|c| GridMap::unconstrained(2, 2, c.to_vec()).unwrap()).collect();
            prop_assert!(score_from_maps(&maps) >= 0.0);
        }
    }

    #[test]
    fn selection_examples() {
        let mut r = rng::stream(0, &[]);
        let s = [(ActionCoord::from_cell(3, 9, 11), 0.5), (ActionCoord::from_cell(7, 9, 11), 0.2)];
        assert_eq!(select_action(&s, SelectionRule::ArgminVariance, &mut r).unwrap().cell_index, 7);
        assert_eq!(select_action(&s, SelectionRule::ArgmaxVariance, &mut r).unwrap().cell_index, 3);
        let tie = [(ActionCoord::from_cell(9, 9, 11), 0.1), (ActionCoord::from_cell(2, 9, 11), 0.1)];
        assert_eq!(select_action(&tie, SelectionRule::ArgminVariance, &mut r).unwrap().cell_index, 2);
        assert!(matches!(select_action(&[], SelectionRule::Random, &mut r), Err(DreamError::NoCandidates)));
    }

    #[test]
    fn two_sample_variance_closed_form() {
        let d = 0.3;
        let a = GridMap::unconstrained(3, 3, vec![0.2; 9]).unwrap();
        let mut v = vec![0.2; 9];
        v[4] += d;
        let b = GridMap::unconstrained(3, 3, v).unwrap();
        let u = score_from_maps(&[a.clone(), b]);
        assert!((u - d * d / (2.0 * 9.0)).abs() < 1e-15);
        assert_eq!(score_from_maps(&[a.clone(), a.clone(), a]), 0.0);
    }

    #[test]
    fn scoring_is_pure_and_repeatable() {
        let (m, pair) = setup();
        let obs = make_observation(&pair.empty, &MeasurementState::new(9, 11)).unwrap();
        let z = m.encode_with_rng(&obs, &mut rng::stream(1, &[])).unwrap();
        let st = m.initial_state();
        let a = ActionCoord::from_cell(17, 9, 11);
        let u1 = score_candidate(&m, &z, &st, &a, 4, &mut rng::stream(5, &[]), DreamMode::Normal).unwrap();
        let u2 = score_candidate(&m, &z, &st, &a, 4, &mut rng::stream(5, &[]), DreamMode::Normal).unwrap();
        assert_eq!(u1, u2);
        assert!(u1 > 0.0);
        let zero = score_candidate(&m, &z, &st, &a, 4, &mut rng::stream(5, &[]), DreamMode::ZeroVariance).unwrap();
        assert_eq!(zero, 0.0);
        assert!(score_candidate(&m, &z, &st, &a, 1, &mut rng::stream(5, &[]), DreamMode::Normal).is_err());
    }

    #[test]
    fn single_step_budget() {
        let (m, pair) = setup();
        let mut oracle = MapOracle::new(&pair.occupied);
        let tr = run_acquisition_with(&m, &pair.empty, &mut oracle, None, &small(SelectionRule::ArgminVariance, 1, 0), RunOptions::default()).unwrap();
        assert_eq!(oracle.query_count(), 1);
        assert_eq!(tr.steps.len(), 1);
        assert_eq!(tr.reconstruction.shape(), (9, 11));
    }

    #[test]
    fn random_rule_is_deterministic() {
        let (m, pair) = setup();
        let cfg = small(SelectionRule::Random, 6, 42);
        let a = run_acquisition(&m, &pair, &cfg).unwrap();
        let b = run_acquisition(&m, &pair, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let (m, pair) = setup();
        let cfg = small(SelectionRule::ArgminVariance, 5, 9);
        let run = |execution| {
            let mut o = MapOracle::new(&pair.occupied);
            let opts = RunOptions {
                execution,
                track_rmse: true,
                ..RunOptions::default()
            };
            run_acquisition_with(&m, &pair.empty, &mut o, Some(&pair.occupied), &cfg, opts).unwrap()
        };
        let s = run(Execution::Serial);
        assert_eq!(s, run(Execution::Parallel));
        assert!(s.steps.iter().all(|r| r.rmse_after.is_some()));
    }

    #[test]
    fn exhaustive_budget_replays_truth() {
        let cfg = SynthConfig {
            base_h: 3,
            base_w: 4,
            ap_location: (1.0, 1.0),
            n_occupants: 1,
            ..SynthConfig::default()
        };
        let pair = make_dataset(&cfg, 1, 1, 1).unwrap().remove(0);
        let m = WorldModel::new(Architecture::miniature(3, 4), 0);
        let tr = run_acquisition(&m, &pair, &small(SelectionRule::ArgminVariance, 12, 1)).unwrap();
        assert!(tr.state.mask_slice().iter().all(|&v| v == 1.0));
        assert_eq!(tr.state.value_slice(), pair.occupied.values());
        let cells: HashSet<usize> = tr.cells().into_iter().collect();
        assert_eq!(cells.len(), 12);
        assert_eq!(tr.state_after(12).unwrap(), tr.state);
        let over = AcquisitionConfig { budget: 13, ..small(SelectionRule::Random, 13, 1) };
        assert!(matches!(run_acquisition(&m, &pair, &over), Err(DreamError::BudgetTooLarge { .. })));
    }

    #[test]
    fn trace_jsonl_round_trip() {
        let (m, pair) = setup();
        let mut o = MapOracle::new(&pair.occupied);
        let opts = RunOptions {
            track_rmse: true,
            ..RunOptions::default()
        };
        let tr = run_acquisition_with(&m, &pair.empty, &mut o, Some(&pair.occupied), &small(SelectionRule::ArgmaxVariance, 3, 2), opts).unwrap();
        let text = trace_to_jsonl(&tr.steps, Some("recon.remap")).unwrap();
        assert_eq!(text.lines().count(), 4);
        let (steps, last) = parse_trace_jsonl(&text).unwrap();
        assert_eq!(steps, tr.steps);
        assert_eq!(last.as_deref(), Some("recon.remap"));
        assert_eq!(trace_to_jsonl(&steps, last.as_deref()).unwrap(), text);
        assert!(parse_trace_jsonl("{\"t\": 0}\n").is_err());
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("{\"t\":0,\"action\":["));
    }

    #[test]
    fn config_validation() {
        assert!(AcquisitionConfig::default().validate().is_ok());
        assert!(AcquisitionConfig { dream_samples: 1, ..Default::default() }.validate().is_err());
        assert!(AcquisitionConfig { pool_size: 0, ..Default::default() }.validate().is_err());
        assert!(AcquisitionConfig { budget: 0, ..Default::default() }.validate().is_err());
        assert_eq!(SelectionRule::parse("argmin_variance"), Some(SelectionRule::ArgminVariance));
        assert_eq!(SelectionRule::parse("bogus"), None);
    }
}
