use std::path::PathBuf;

use clap::Args;
use dreammap::io::{load_map, load_pair};
use serde::Serialize;

use super::{dbm_metrics, resolve_path};
use crate::error::CliError;
use crate::Context;

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    /// Pair whose occupied map is the ground truth.
    #[arg(long)]
    pub pair: Option<PathBuf>,
    /// REMAP reconstructions to score.
    #[arg(required = true)]
    pub maps: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
struct EvalRow {
    map: String,
    rmse: f64,
    mae: f64,
}

/// Writes `eval.csv` with RMSE and MAE (dBm) of every map against the pair.
pub fn cmd_eval(ctx: &Context, args: &EvalArgs) -> Result<(), CliError> {
    let pair_path = resolve_path(&args.pair, &ctx.file.pair).ok_or_else(|| CliError::Usage("eval needs --pair".into()))?;
    let pair = load_pair(&pair_path)?;
    let mut rows = Vec::with_capacity(args.maps.len());
    for p in &args.maps {
        let (rmse, mae) = dbm_metrics(&pair, &load_map(p)?)?;
        println!("{:<40} rmse {rmse:>8.4} dBm  mae {mae:>8.4} dBm", p.display());
        rows.push(EvalRow {
            map: p.display().to_string(),
            rmse,
            mae,
        });
    }
    ctx.ensure_out()?;
    let path = ctx.out.join("eval.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}
