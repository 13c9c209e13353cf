use std::path::PathBuf;

use clap::Args;

use super::{load_dataset, resolve_path, train_and_save, TrainFlags, LOSS_TRACE, MODEL_FILE};
use crate::error::CliError;
use crate::Context;

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `synth`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

pub fn cmd_train(ctx: &Context, args: &TrainArgs) -> Result<(), CliError> {
    let dir = resolve_path(&args.data, &ctx.file.data).ok_or_else(|| CliError::Usage("train needs --data".into()))?;
    let cfg = args.train.resolve(&ctx.file, ctx.seed)?;
    let data = load_dataset(&dir)?;
    let model = train_and_save(&data, &cfg, &ctx.out, "")?;
    println!(
        "wrote {} ({} parameters) and {} to {}",
        MODEL_FILE,
        model.weights.n_params(),
        LOSS_TRACE,
        ctx.out.display()
    );
    Ok(())
}
