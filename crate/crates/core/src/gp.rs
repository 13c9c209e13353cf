//! Comparison methods: empty-map copy and Gaussian-process reconstruction.
//!
//! The GP uses a stationary kernel `const + RBF + white noise`, fitted by
//! maximizing the log marginal likelihood on the (mean-centered) empty map,
//! and is then conditioned on occupied-map residuals against the empty map.
//! Cross-covariances use the noise-free part of the kernel, so the reported
//! variance is that of the underlying field.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::MapError;
use crate::grid::{EnvironmentPair, GridMap, MeasurementState, UnitTag};
use crate::rng::{self, tag};

pub const DEFAULT_MAX_POINTS: usize = 1024;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;
const GRID_STEPS: usize = 5;
const REFINE_ROUNDS: usize = 3;
const GOLDEN_ITERS: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum GpError {
    #[error("Cholesky factorization failed even with jitter {0:e}")]
    Cholesky(f64),
    #[error("invalid kernel parameters: {0}")]
    Params(String),
    #[error("max_points must be at least 16, got {0}")]
    TooFewPoints(usize),
    #[error("at least one measurement is required")]
    NoMeasurements,
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub const_var: f64,
    pub rbf_var: f64,
    pub rbf_len: f64,
    pub noise_var: f64,
}

impl KernelParams {
    pub fn validate(&self) -> Result<(), GpError> {
        let all_finite = [self.const_var, self.rbf_var, self.rbf_len, self.noise_var]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || self.const_var < 0.0 || self.rbf_var <= 0.0 || self.rbf_len <= 0.0 || self.noise_var <= 0.0 {
            return Err(GpError::Params(format!("{self:?}")));
        }
        Ok(())
    }

    /// Noise-free covariance between two cells.
    pub fn signal(&self, p: (f64, f64), q: (f64, f64)) -> f64 {
        let d2 = (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2);
        self.const_var + self.rbf_var * (-d2 / (2.0 * self.rbf_len * self.rbf_len)).exp()
    }

    pub fn prior_variance(&self) -> f64 {
        self.const_var + self.rbf_var + self.noise_var
    }
}

/// `k(p, q) = const + rbf * exp(-|p - q|^2 / (2 len^2)) + noise * [p == q]`.
pub fn kernel_eval(params: &KernelParams, p: (f64, f64), q: (f64, f64)) -> f64 {
    let white = if p == q { params.noise_var } else { 0.0 };
    params.signal(p, q) + white
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpPosterior {
    pub mean: GridMap,
    pub variance: GridMap,
}

/// Returns the empty map unchanged, whatever the budget.
pub fn empty_copy(pair: &EnvironmentPair) -> GridMap {
    pair.empty.clone()
}

fn coords(index: usize, width: usize) -> (f64, f64) {
    ((index / width) as f64, (index % width) as f64)
}

fn gram(params: &KernelParams, points: &[(f64, f64)]) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| kernel_eval(params, points[i], points[j]))
}

/// Cholesky with escalating diagonal jitter.
pub fn robust_cholesky(mut k: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, GpError> {
    if let Some(ch) = Cholesky::new(k.clone()) {
        return Ok(ch);
    }
    let mut jitter = JITTER_START;
    let mut added = 0.0;
    while jitter <= JITTER_MAX * (1.0 + 1e-12) {
        let n = k.nrows();
        for i in 0..n {
            k[(i, i)] += jitter - added;
        }
        added = jitter;
        if let Some(ch) = Cholesky::new(k.clone()) {
            return Ok(ch);
        }
        jitter *= 10.0;
    }
    Err(GpError::Cholesky(JITTER_MAX))
}

/// Log marginal likelihood of zero-mean targets `y` at `points`.
pub fn log_marginal_likelihood(params: &KernelParams, points: &[(f64, f64)], y: &[f64]) -> Result<f64, GpError> {
    let chol = robust_cholesky(gram(params, points))?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    let n = y.len() as f64;
    Ok(-0.5 * yv.dot(&alpha) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

/// Result of a kernel fit, including every grid candidate that was scored.
#[derive(Debug, Clone)]
pub struct KernelFit {
    pub params: KernelParams,
    pub log_likelihood: f64,
    pub grid: Vec<(KernelParams, f64)>,
}

/// Maximizes the empty-map log marginal likelihood over `(rbf_var, rbf_len, noise_var)`.
pub fn fit_kernel(empty: &GridMap, max_points: usize) -> Result<KernelParams, GpError> {
    fit_kernel_detailed(empty, max_points, 0).map(|f| f.params)
}

/// Like [`fit_kernel`], with the subsampling seed exposed and the search record returned.
///
/// A 5x5x5 log-spaced grid seeds a few rounds of coordinate-wise
/// golden-section refinement in log space. `const_var` stays 0: the constant
/// level is carried by the empty-map mean function.
pub fn fit_kernel_detailed(empty: &GridMap, max_points: usize, seed: u64) -> Result<KernelFit, GpError> {
    if max_points < 16 {
        return Err(GpError::TooFewPoints(max_points));
    }
    let (h, w) = empty.shape();
    let cells = h * w;
    let picked: Vec<usize> = if cells > max_points {
        let mut rng = rng::stream(seed, &[tag::SUBSAMPLE]);
        let mut idx = sample(&mut rng, cells, max_points).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..cells).collect()
    };
    let points: Vec<(f64, f64)> = picked.iter().map(|&i| coords(i, w)).collect();
    let raw: Vec<f64> = picked.iter().map(|&i| empty.at(i)).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let y: Vec<f64> = raw.iter().map(|v| v - mean).collect();
    let var_y = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).max(1e-12);

    let bounds = [
        ((1e-2 * var_y).ln(), (1e1 * var_y).ln()),
        (0.5f64.ln(), (h.max(w) as f64).max(0.5).ln()),
        ((1e-4 * var_y).ln(), var_y.ln()),
    ];
    let make = |theta: [f64; 3]| KernelParams {
        const_var: 0.0,
        rbf_var: theta[0].exp(),
        rbf_len: theta[1].exp(),
        noise_var: theta[2].exp(),
    };
    let objective = |theta: [f64; 3]| -> f64 {
        log_marginal_likelihood(&make(theta), &points, &y).unwrap_or(f64::NEG_INFINITY)
    };

    let axis = |d: usize, k: usize| {
        let (lo, hi) = bounds[d];
        lo + (hi - lo) * k as f64 / (GRID_STEPS - 1) as f64
    };
    let mut thetas = Vec::with_capacity(GRID_STEPS.pow(3));
    for a in 0..GRID_STEPS {
        for b in 0..GRID_STEPS {
            for c in 0..GRID_STEPS {
                thetas.push([axis(0, a), axis(1, b), axis(2, c)]);
            }
        }
    }
    let scores: Vec<f64> = thetas.par_iter().map(|&t| objective(t)).collect();
    let mut best_i = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best_i] {
            best_i = i;
        }
    }
    if !scores[best_i].is_finite() {
        return Err(GpError::Cholesky(JITTER_MAX));
    }
    let mut best = thetas[best_i];
    let mut best_score = scores[best_i];
    let step: [f64; 3] = std::array::from_fn(|d| (bounds[d].1 - bounds[d].0) / (GRID_STEPS - 1) as f64);

    for _ in 0..REFINE_ROUNDS {
        for d in 0..3 {
            let lo = (best[d] - step[d]).max(bounds[d].0);
            let hi = (best[d] + step[d]).min(bounds[d].1);
            let (arg, score) = golden_section(lo, hi, |x| {
                let mut t = best;
                t[d] = x;
                objective(t)
            });
            if score > best_score {
                best[d] = arg;
                best_score = score;
            }
        }
    }

    Ok(KernelFit {
        params: make(best),
        log_likelihood: best_score,
        grid: thetas.iter().zip(&scores).map(|(&t, &s)| (make(t), s)).collect(),
    })
}

fn golden_section(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_ITERS {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Posterior over the full grid given the measured cells of `state`.
///
/// The empty map is the prior mean; the GP models `Z_o - Z_e`.
pub fn gp_reconstruct(params: &KernelParams, empty: &GridMap, state: &MeasurementState) -> Result<GpPosterior, GpError> {
    params.validate()?;
    if empty.shape() != state.shape() {
        return Err(MapError::ShapeMismatch {
            left: empty.shape(),
            right: state.shape(),
        }
        .into());
    }
    if state.is_empty() {
        return Err(GpError::NoMeasurements);
    }
    let (h, w) = empty.shape();
    let obs: Vec<(usize, f64)> = state.measurements().collect();
    let points: Vec<(f64, f64)> = obs.iter().map(|&(i, _)| coords(i, w)).collect();
    let residual = DVector::from_iterator(obs.len(), obs.iter().map(|&(i, v)| v - empty.at(i)));
    let chol = robust_cholesky(gram(params, &points))?;
    let alpha = chol.solve(&residual);

    let cells = h * w;
    let cross = DMatrix::from_fn(obs.len(), cells, |j, q| params.signal(points[j], coords(q, w)));
    let mean_res = cross.tr_mul(&alpha);
    let v = chol.l().solve_lower_triangular(&cross).ok_or(GpError::Cholesky(JITTER_MAX))?;
    let prior = params.const_var + params.rbf_var;
    let mean: Vec<f64> = (0..cells).map(|q| empty.at(q) + mean_res[q]).collect();
    let variance: Vec<f64> = (0..cells)
        .map(|q| (prior - v.column(q).norm_squared()).max(0.0))
        .collect();
    Ok(GpPosterior {
        mean: GridMap::new(h, w, mean, UnitTag::Dbm).map(|m| retag(m, empty.unit()))?,
        variance: GridMap::new(h, w, variance, UnitTag::Dbm)?,
    })
}

fn retag(map: GridMap, unit: UnitTag) -> GridMap {
    if unit == UnitTag::Dbm {
        return map;
    }
    // Posterior means in normalized units may leave [0, 1].
    let (h, w) = map.shape();
    GridMap::unconstrained(h, w, map.into_values()).expect("finite values")
}
