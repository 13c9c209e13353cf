use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use dreammap::dreamer::{run_acquisition, AcquisitionConfig, AcquisitionTrace};
use dreammap::gp::{empty_copy, fit_kernel, gp_reconstruct, KernelParams};
use dreammap::rng::derive_seed;
use dreammap::synth::SynthConfig;
use dreammap::world_model::{load_model, TrainConfig, WorldModel};
use dreammap::{make_observation, EnvironmentPair, GridMap};
use rayon::prelude::*;
use serde::Serialize;

use super::{
    check_model, check_scale, create_dir, dbm_metrics, load_dataset, random_cells, state_from_cells, synthesize,
    train_and_save, write_json, AcqFlags, Dataset, Method, TrainFlags, KERNEL_FILE, MANIFEST, MODEL_FILE,
};
use crate::error::CliError;
use crate::Context;

pub const RESULTS: &str = "results.csv";
pub const DEFAULT_BUDGETS: [usize; 6] = [1, 2, 5, 10, 15, 20];
pub const DEFAULT_SCALES: [usize; 3] = [1, 2, 4];

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// Comma-separated scale factors.
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<usize>>,
    /// Comma-separated measurement budgets.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    /// Comma-separated subset of world_model, gp_same_points, gp_random_points, empty_copy.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Repetitions per (scale, budget, method).
    #[arg(long)]
    pub reps: Option<usize>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub acq: AcqFlags,
}

/// One results row; `rep` is the repetition index or `mean`/`std` for summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scale: usize,
    pub budget: usize,
    pub method: String,
    pub rep: String,
    pub rmse: f64,
    pub mae: f64,
    pub seconds: f64,
}

/// Resolved sweep settings, recorded in `sweep.json` for reruns.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub scales: Vec<usize>,
    pub budgets: Vec<usize>,
    pub methods: Vec<&'static str>,
    pub repetitions: usize,
    pub train: TrainConfig,
    pub acquisition: AcquisitionConfig,
    pub gp_max_points: usize,
    pub rep_seeds: Vec<(usize, usize, u64)>,
}

pub fn rep_seed(root: u64, scale: usize, rep: usize) -> u64 {
    derive_seed(root, &[scale as u64, rep as u64])
}

pub struct Cell {
    pub budget: usize,
    pub method: Method,
    pub rmse: f64,
    pub mae: f64,
    pub seconds: f64,
}

struct ScaleSetup {
    data: Dataset,
    model: WorldModel,
    kernel: KernelParams,
}

fn prepare_scale(dir: &Path, ctx: &Context, scale: usize, train: &TrainConfig, gp_max_points: usize) -> Result<ScaleSetup, CliError> {
    let data_dir = dir.join("data");
    let data = if data_dir.join(MANIFEST).exists() {
        load_dataset(&data_dir)?
    } else {
        let cfg = SynthConfig {
            seed: ctx.seed,
            ..SynthConfig::default()
        };
        synthesize(&data_dir, &cfg, 3, 1, scale)?
    };
    let model_path = dir.join(MODEL_FILE);
    let model = if model_path.exists() {
        load_model(&model_path)?
    } else {
        train_and_save(&data, train, dir, &format!("[scale {scale}] "))?
    };
    check_model(&model, data.eval_pair())?;
    let kernel = fit_kernel(&data.eval_pair().empty, gp_max_points)?;
    write_json(&kernel, &dir.join(KERNEL_FILE))?;
    Ok(ScaleSetup { data, model, kernel })
}

/// Every budget of one repetition, taken as prefixes of one max-budget run.
fn run_rep(
    setup: &ScaleSetup,
    pair: &EnvironmentPair,
    acq: &AcquisitionConfig,
    budgets: &[usize],
    methods: &[Method],
) -> Result<Vec<Cell>, CliError> {
    let max_budget = *budgets.iter().max().expect("budgets validated non-empty");
    let (h, w) = pair.shape();
    let needs_trace = methods.iter().any(|m| matches!(m, Method::WorldModel | Method::GpSamePoints));
    let mut trace: Option<(AcquisitionTrace, f64)> = None;
    if needs_trace {
        let start = Instant::now();
        let cfg = AcquisitionConfig {
            budget: max_budget,
            ..acq.clone()
        };
        let t = run_acquisition(&setup.model, pair, &cfg)?;
        trace = Some((t, start.elapsed().as_secs_f64()));
    }
    let random = random_cells(h * w, max_budget, acq.seed);

    let mut cells = Vec::new();
    for &budget in budgets {
        for &method in methods {
            let start = Instant::now();
            // The shared acquisition run is charged to each budget by step count.
            let mut shared = 0.0;
            let map: GridMap = match method {
                Method::WorldModel => {
                    let (t, secs) = trace.as_ref().expect("trace computed");
                    shared = secs * budget as f64 / max_budget as f64;
                    let state = t.state_after(budget)?;
                    setup.model.reconstruct(&make_observation(&pair.empty, &state)?)?
                }
                Method::GpSamePoints => {
                    let state = trace.as_ref().expect("trace computed").0.state_after(budget)?;
                    gp_reconstruct(&setup.kernel, &pair.empty, &state)?.mean
                }
                Method::GpRandomPoints => {
                    let state = state_from_cells(pair, &random[..budget])?;
                    gp_reconstruct(&setup.kernel, &pair.empty, &state)?.mean
                }
                Method::EmptyCopy => empty_copy(pair),
            };
            let (rmse, mae) = dbm_metrics(pair, &map)?;
            cells.push(Cell {
                budget,
                method,
                rmse,
                mae,
                seconds: start.elapsed().as_secs_f64() + shared,
            });
        }
    }
    Ok(cells)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-repetition rows for one scale, each (budget, method) group followed
/// by its `mean` and `std` rows.
pub fn scale_rows(scale: usize, budgets: &[usize], methods: &[Method], reps: &[Vec<Cell>]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for &budget in budgets {
        for &method in methods {
            let row = |rep: String, rmse, mae, seconds| ResultRow {
                scale,
                budget,
                method: method.name().into(),
                rep,
                rmse,
                mae,
                seconds,
            };
            let group: Vec<(usize, &Cell)> = reps
                .iter()
                .enumerate()
                .flat_map(|(rep, cells)| cells.iter().filter(|c| c.budget == budget && c.method == method).map(move |c| (rep, c)))
                .collect();
            for &(rep, c) in &group {
                rows.push(row(rep.to_string(), c.rmse, c.mae, c.seconds));
            }
            let (rm, rs) = mean_std(&group.iter().map(|g| g.1.rmse).collect::<Vec<_>>());
            let (mm, ms) = mean_std(&group.iter().map(|g| g.1.mae).collect::<Vec<_>>());
            let (sm, ss) = mean_std(&group.iter().map(|g| g.1.seconds).collect::<Vec<_>>());
            rows.push(row("mean".into(), rm, mm, sm));
            rows.push(row("std".into(), rs, ms, ss));
        }
    }
    rows
}

pub fn cmd_sweep(ctx: &Context, args: &SweepArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let scales = args.scales.clone().or_else(|| f.scales.clone()).unwrap_or_else(|| DEFAULT_SCALES.to_vec());
    let budgets = args.budgets.clone().or_else(|| f.budgets.clone()).unwrap_or_else(|| DEFAULT_BUDGETS.to_vec());
    let methods: Vec<Method> = match args.methods.clone().or_else(|| f.methods.clone()) {
        Some(names) => names.iter().map(|s| Method::parse(s.trim())).collect::<Result<_, _>>()?,
        None => Method::ALL.to_vec(),
    };
    let reps = args.reps.or(f.reps).unwrap_or(3);
    if scales.is_empty() || budgets.is_empty() || methods.is_empty() {
        return Err(CliError::Usage("scales, budgets and methods must be non-empty".into()));
    }
    if reps == 0 {
        return Err(CliError::Usage("reps must be at least 1".into()));
    }
    if budgets.contains(&0) {
        return Err(CliError::Usage("budgets must be at least 1".into()));
    }
    for &s in &scales {
        check_scale(s)?;
        let d = SynthConfig::default();
        let cells = d.base_h * s * d.base_w * s;
        if let Some(&b) = budgets.iter().find(|&&b| b > cells) {
            return Err(CliError::Usage(format!("budget {b} exceeds the {cells} cells at scale {s}")));
        }
    }
    let train = args.train.resolve(f, ctx.seed)?;
    let acq = args.acq.resolve(f, *budgets.iter().max().expect("non-empty"), ctx.seed)?;
    let gp_max_points = args.acq.gp_max_points(f);
    ctx.ensure_out()?;

    let spec = ExperimentSpec {
        seed: ctx.seed,
        scales: scales.clone(),
        budgets: budgets.clone(),
        methods: methods.iter().map(|m| m.name()).collect(),
        repetitions: reps,
        train: train.clone(),
        acquisition: acq.clone(),
        gp_max_points,
        rep_seeds: scales
            .iter()
            .flat_map(|&s| (0..reps).map(move |r| (s, r, rep_seed(ctx.seed, s, r))))
            .collect(),
    };
    write_json(&spec, &ctx.out.join("sweep.json"))?;

    let mut rows = Vec::new();
    for &scale in &scales {
        let dir: PathBuf = ctx.out.join(format!("scale_{scale}"));
        create_dir(&dir)?;
        let setup = prepare_scale(&dir, ctx, scale, &train, gp_max_points)?;
        let pair = setup.data.eval_pair();
        let per_rep: Vec<Vec<Cell>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let cfg = AcquisitionConfig {
                    seed: rep_seed(ctx.seed, scale, rep),
                    ..acq.clone()
                };
                run_rep(&setup, pair, &cfg, &budgets, &methods)
            })
            .collect::<Result<_, CliError>>()?;
        rows.extend(scale_rows(scale, &budgets, &methods, &per_rep));
        eprintln!("scale {scale} done");
    }

    let path = ctx.out.join(RESULTS);
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    for r in rows.iter().filter(|r| r.rep == "mean") {
        println!("scale {:>2}  N {:>3}  {:<18} rmse {:>8.4}  mae {:>8.4}", r.scale, r.budget, r.method, r.rmse, r.mae);
    }
    println!("wrote {}", path.display());
    Ok(())
}
