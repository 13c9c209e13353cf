use std::path::PathBuf;

use clap::Args;
use dreammap::dreamer::{run_acquisition_with, save_trace, MapOracle, RunOptions};
use dreammap::gp::{fit_kernel, gp_reconstruct, KernelParams};
use dreammap::io::{load_pair, save_map};
use dreammap::synth::SynthConfig;
use dreammap::world_model::load_model;
use dreammap::{EnvironmentPair, GridMap};
use serde::Serialize;

use super::{
    check_model, check_scale, dbm_metrics, load_dataset, random_cells, resolve_path, state_from_cells, synthesize, write_json,
    AcqFlags, Method, KERNEL_FILE,
};
use crate::error::CliError;
use crate::pgm::export_heatmap;
use crate::Context;

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Pair JSON to run on.
    #[arg(long)]
    pub pair: Option<PathBuf>,
    /// Dataset directory; its first eval pair is used when `--pair` is absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Synthesize a dataset at this scale when neither `--pair` nor `--data` is given.
    #[arg(long)]
    pub scale: Option<usize>,
    /// Measurement budget `N`.
    #[arg(long)]
    pub budget: Option<usize>,
    #[command(flatten)]
    pub acq: AcqFlags,
}

#[derive(Debug, Serialize)]
pub struct MethodResult {
    pub method: &'static str,
    pub rmse: f64,
    pub mae: f64,
    pub map: String,
    pub cells: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub shape: [usize; 2],
    pub budget: usize,
    pub query_count: usize,
    pub kernel: KernelParams,
    pub methods: Vec<MethodResult>,
}

fn pick_pair(ctx: &Context, args: &RunArgs) -> Result<EnvironmentPair, CliError> {
    if let Some(p) = resolve_path(&args.pair, &ctx.file.pair) {
        return Ok(load_pair(p)?);
    }
    if let Some(d) = resolve_path(&args.data, &ctx.file.data) {
        return Ok(load_dataset(&d)?.eval_pair().clone());
    }
    let Some(scale) = args.scale.or(ctx.file.scale) else {
        return Err(CliError::Usage("run needs --pair, --data or --scale".into()));
    };
    check_scale(scale)?;
    let cfg = SynthConfig {
        seed: ctx.seed,
        ..SynthConfig::default()
    };
    Ok(synthesize(&ctx.out.join("data"), &cfg, 3, 1, scale)?.eval_pair().clone())
}

pub fn cmd_run(ctx: &Context, args: &RunArgs) -> Result<(), CliError> {
    let model_path = resolve_path(&args.model, &ctx.file.model).ok_or_else(|| CliError::Usage("run needs --model".into()))?;
    let budget = args.budget.or(ctx.file.budget).unwrap_or(10);
    let acq = args.acq.resolve(&ctx.file, budget, ctx.seed)?;
    ctx.ensure_out()?;
    let pair = pick_pair(ctx, args)?;
    let model = load_model(&model_path)?;
    check_model(&model, &pair)?;
    let (h, w) = pair.shape();

    let mut oracle = MapOracle::new(&pair.occupied);
    let opts = RunOptions {
        track_rmse: true,
        ..RunOptions::default()
    };
    let trace = run_acquisition_with(&model, &pair.empty, &mut oracle, Some(&pair.occupied), &acq, opts)?;
    let query_count = oracle.query_count();
    let chosen = trace.cells();

    let kernel = fit_kernel(&pair.empty, args.acq.gp_max_points(&ctx.file))?;
    write_json(&kernel, &ctx.out.join(KERNEL_FILE))?;
    let random = random_cells(h * w, budget, ctx.seed);

    let mut methods = Vec::new();
    for method in Method::ALL {
        let (map, cells): (GridMap, Vec<usize>) = match method {
            Method::WorldModel => (trace.reconstruction.clone(), chosen.clone()),
            Method::GpSamePoints => (gp_reconstruct(&kernel, &pair.empty, &trace.state)?.mean, chosen.clone()),
            Method::GpRandomPoints => {
                let state = state_from_cells(&pair, &random)?;
                (gp_reconstruct(&kernel, &pair.empty, &state)?.mean, random.clone())
            }
            Method::EmptyCopy => (dreammap::gp::empty_copy(&pair), Vec::new()),
        };
        let name = format!("{}.remap", method.name());
        save_map(&map, ctx.out.join(&name))?;
        export_heatmap(&map, &cells, &ctx.out.join(format!("{}.pgm", method.name())))?;
        let (rmse, mae) = dbm_metrics(&pair, &map)?;
        println!("{:<18} rmse {rmse:>8.4} dBm  mae {mae:>8.4} dBm", method.name());
        methods.push(MethodResult {
            method: method.name(),
            rmse,
            mae,
            map: name,
            cells,
        });
    }
    export_heatmap(&pair.occupied, &chosen, &ctx.out.join("occupied.pgm"))?;
    save_trace(&trace.steps, Some("world_model.remap"), ctx.out.join("trace.jsonl"))?;
    let report = RunReport {
        seed: ctx.seed,
        shape: [h, w],
        budget,
        query_count,
        kernel,
        methods,
    };
    write_json(&report, &ctx.out.join("run.json"))?;
    println!("{query_count} queries on {h}x{w}; outputs in {}", ctx.out.display());
    Ok(())
}
