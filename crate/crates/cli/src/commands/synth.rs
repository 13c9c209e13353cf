use clap::Args;
use dreammap::synth::SynthConfig;

use super::synthesize;
use crate::error::CliError;
use crate::Context;

#[derive(Debug, Clone, Default, Args)]
pub struct SynthArgs {
    /// Bilinear upscaling factor: 1, 2, 4, 8 or 16.
    #[arg(long)]
    pub scale: Option<usize>,
    /// Number of training pairs.
    #[arg(long)]
    pub train: Option<usize>,
    /// Number of held-out pairs.
    #[arg(long)]
    pub eval: Option<usize>,
    /// Occupants per occupied map.
    #[arg(long)]
    pub occupants: Option<usize>,
}

pub fn cmd_synth(ctx: &Context, args: &SynthArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let scale = args.scale.or(f.scale).unwrap_or(1);
    let n_train = args.train.or(f.train).unwrap_or(3);
    let n_eval = args.eval.or(f.eval).unwrap_or(1);
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        n_occupants: args.occupants.or(f.occupants).unwrap_or(d.n_occupants),
        seed: ctx.seed,
        ..d
    };
    let data = synthesize(&ctx.out, &cfg, n_train, n_eval, scale)?;
    let (h, w) = data.shape();
    println!("wrote {} pairs of {h}x{w} to {}", data.manifest.pairs.len(), ctx.out.display());
    Ok(())
}
