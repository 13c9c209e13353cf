//! Forward and backward passes for the world model.

use ndarray::{s, Array1, Array2};

use super::{Architecture, Weights};
use crate::grid::Observation;
use crate::nn::{
    conv3_backward, conv3_forward, flatten, maxpool2_backward, maxpool2_forward, relu_backward, relu_inplace, relu_vec,
    unflatten, upsample2_backward, upsample2_forward, LstmStep, Maps,
};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Edge-replicates each observation to the padded grid: `(3, N * Hp * Wp)`.
pub(crate) fn pack_observations(arch: &Architecture, obs: &[&Observation]) -> Maps {
    let (h, w) = arch.grid();
    let (hp, wp) = arch.padded();
    let n = obs.len();
    let plane = hp * wp;
    let mut data = Array2::<f64>::zeros((3, n * plane));
    for (s, o) in obs.iter().enumerate() {
        for (ch, values) in o.channels().iter().enumerate() {
            let mut row = data.slice_mut(s![ch, s * plane..(s + 1) * plane]);
            for y in 0..hp {
                let sy = y.min(h - 1);
                for x in 0..wp {
                    row[y * wp + x] = values[sy * w + x.min(w - 1)];
                }
            }
        }
    }
    Maps { data, n, h: hp, w: wp }
}

/// Values of sample `n` inside the unpadded grid, row-major.
pub(crate) fn crop(arch: &Architecture, out: &Array2<f64>, n: usize) -> Vec<f64> {
    let (h, w) = arch.grid();
    let (hp, wp) = arch.padded();
    let base = n * hp * wp;
    let row = out.row(0);
    let mut values = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            values.push(row[base + y * wp + x]);
        }
    }
    values
}

pub(crate) struct EncoderCache {
    input: Maps,
    cols: Vec<Array2<f64>>,
    acts: Vec<Array2<f64>>,
    pool_args: [Vec<u32>; 2],
    flat: Array2<f64>,
    fc: Array2<f64>,
}

/// Returns `(mean, log_var)` as `(latent, N)`.
pub(crate) fn encoder_forward(w: &Weights, arch: &Architecture, input: Maps, keep: bool) -> (Array2<f64>, Array2<f64>, Option<EncoderCache>) {
    let mut cols = Vec::with_capacity(4);
    let mut acts = Vec::with_capacity(4);

    let (mut a1, c1) = conv3_forward(&w.enc_conv[0], &input);
    relu_inplace(&mut a1.data);
    let (mut a2, c2) = conv3_forward(&w.enc_conv[1], &a1);
    relu_inplace(&mut a2.data);
    let (p1, arg1) = maxpool2_forward(&a2);
    let (mut a3, c3) = conv3_forward(&w.enc_conv[2], &p1);
    relu_inplace(&mut a3.data);
    let (mut a4, c4) = conv3_forward(&w.enc_conv[3], &a3);
    relu_inplace(&mut a4.data);
    let (p2, arg2) = maxpool2_forward(&a4);
    let flat = flatten(&p2);
    let mut fc = w.enc_fc.forward(&flat);
    relu_inplace(&mut fc);
    let mean = w.enc_mean.forward(&fc);
    let log_var = w.enc_logvar.forward(&fc);
    debug_assert_eq!(mean.nrows(), arch.latent_dim);

    let cache = keep.then(|| {
        cols.extend([c1, c2, c3, c4]);
        acts.extend([a1.data, a2.data, a3.data, a4.data]);
        EncoderCache {
            input,
            cols,
            acts,
            pool_args: [arg1, arg2],
            flat,
            fc,
        }
    });
    (mean, log_var, cache)
}

pub(crate) fn encoder_backward(w: &Weights, arch: &Architecture, cache: &EncoderCache, dmean: &Array2<f64>, dlog_var: &Array2<f64>, g: &mut Weights) {
    let n = cache.input.n;
    let (hp, wp) = arch.padded();
    let (h2, w2) = (hp / 2, wp / 2);
    let (bh, bw) = arch.bottleneck();
    let [c1, c2, c3, c4] = arch.enc_channels;

    let mut dfc = w.enc_mean.backward(&cache.fc, dmean, &mut g.enc_mean, true).unwrap();
    dfc += &w.enc_logvar.backward(&cache.fc, dlog_var, &mut g.enc_logvar, true).unwrap();
    relu_backward(&mut dfc, &cache.fc);
    let dflat = w.enc_fc.backward(&cache.flat, &dfc, &mut g.enc_fc, true).unwrap();
    let dp2 = unflatten(&dflat, c4, bh, bw);
    let mut da4 = maxpool2_backward(&dp2.data, &cache.pool_args[1], (c4, n * h2 * w2));
    relu_backward(&mut da4, &cache.acts[3]);
    let mut da3 = conv3_backward(&w.enc_conv[3], &cache.cols[3], c3, (n, h2, w2), &da4, &mut g.enc_conv[3], true).unwrap();
    relu_backward(&mut da3, &cache.acts[2]);
    let dp1 = conv3_backward(&w.enc_conv[2], &cache.cols[2], c2, (n, h2, w2), &da3, &mut g.enc_conv[2], true).unwrap();
    let mut da2 = maxpool2_backward(&dp1, &cache.pool_args[0], (c2, n * hp * wp));
    relu_backward(&mut da2, &cache.acts[1]);
    let mut da1 = conv3_backward(&w.enc_conv[1], &cache.cols[1], c1, (n, hp, wp), &da2, &mut g.enc_conv[1], true).unwrap();
    relu_backward(&mut da1, &cache.acts[0]);
    conv3_backward(&w.enc_conv[0], &cache.cols[0], arch.in_channels, (n, hp, wp), &da1, &mut g.enc_conv[0], false);
}

pub(crate) struct DecoderCache {
    z: Array2<f64>,
    cols: [Array2<f64>; 2],
    act1: Array2<f64>,
    act2: Array2<f64>,
}

/// Decodes `(latent, N)` to the padded output `(1, N * Hp * Wp)`.
pub(crate) fn decoder_forward(w: &Weights, arch: &Architecture, z: &Array2<f64>, keep: bool) -> (Array2<f64>, Option<DecoderCache>) {
    let (bh, bw) = arch.bottleneck();
    let c4 = arch.enc_channels[3];
    let volume = w.dec_fc.forward(z);
    let m0 = unflatten(&volume, c4, bh, bw);
    let u1 = upsample2_forward(&m0);
    let (mut a1, cols1) = conv3_forward(&w.dec_conv[0], &u1);
    relu_inplace(&mut a1.data);
    let u2 = upsample2_forward(&a1);
    let (mut a2, cols2) = conv3_forward(&w.dec_conv[1], &u2);
    relu_inplace(&mut a2.data);
    let out = w.dec_out.forward(&a2.data);
    let cache = keep.then(|| DecoderCache {
        z: z.clone(),
        cols: [cols1, cols2],
        act1: a1.data,
        act2: a2.data,
    });
    (out, cache)
}

/// Returns `dL/dz` as `(latent, N)`.
pub(crate) fn decoder_backward(w: &Weights, arch: &Architecture, cache: &DecoderCache, dout: &Array2<f64>, g: &mut Weights) -> Array2<f64> {
    let n = cache.z.ncols();
    let (bh, bw) = arch.bottleneck();
    let (h1, w1) = (bh * 2, bw * 2);
    let (hp, wp) = arch.padded();
    let c4 = arch.enc_channels[3];
    let [d1, _] = arch.dec_channels;

    let mut da2 = w.dec_out.backward(&cache.act2, dout, &mut g.dec_out, true).unwrap();
    relu_backward(&mut da2, &cache.act2);
    let du2 = conv3_backward(&w.dec_conv[1], &cache.cols[1], d1, (n, hp, wp), &da2, &mut g.dec_conv[1], true).unwrap();
    let mut da1 = upsample2_backward(&du2, d1, n, h1, w1);
    relu_backward(&mut da1, &cache.act1);
    let du1 = conv3_backward(&w.dec_conv[0], &cache.cols[0], c4, (n, h1, w1), &da1, &mut g.dec_conv[0], true).unwrap();
    let dm0 = upsample2_backward(&du1, c4, n, bh, bw);
    let dvolume = flatten(&Maps { data: dm0, n, h: bh, w: bw });
    w.dec_fc.backward(&cache.z, &dvolume, &mut g.dec_fc, true).unwrap()
}

pub(crate) struct DynamicsForward {
    action: Array1<f64>,
    e1: Array1<f64>,
    e2: Array1<f64>,
    pub(crate) lstm: LstmStep,
    pub(crate) mean: Array1<f64>,
    pub(crate) log_var: Array1<f64>,
}

pub(crate) fn dynamics_forward(w: &Weights, z: &Array1<f64>, action: [f64; 2], h: &Array1<f64>, c: &Array1<f64>) -> DynamicsForward {
    let action = Array1::from(action.to_vec());
    let e1 = relu_vec(w.act_fc[0].forward_vec(&action));
    let e2 = relu_vec(w.act_fc[1].forward_vec(&e1));
    let mut x = Array1::<f64>::zeros(z.len() + e2.len());
    x.slice_mut(s![..z.len()]).assign(z);
    x.slice_mut(s![z.len()..]).assign(&e2);
    let lstm = w.lstm.forward(&x, h, c);
    let mean = w.dyn_mean.forward_vec(&lstm.h);
    let log_var = w.dyn_logvar.forward_vec(&lstm.h);
    DynamicsForward {
        action,
        e1,
        e2,
        lstm,
        mean,
        log_var,
    }
}

/// One training sequence: observations `x_0..x_L`, the actions between them,
/// the occupied target and the reparameterization noise for every step.
#[derive(Debug, Clone)]
pub struct Episode {
    pub input: Maps,
    pub target: Vec<f64>,
    pub actions: Vec<[f64; 2]>,
    pub noise: Array2<f64>,
}

impl Episode {
    pub fn steps(&self) -> usize {
        self.input.n
    }
}

/// Loss terms averaged over the `L + 1` steps of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
    pub dynamics: f64,
}

pub fn episode_loss(w: &Weights, arch: &Architecture, ep: &Episode, kl_weight: f64) -> LossBreakdown {
    run_episode(w, arch, ep, kl_weight, None, false).0
}

/// Latents the dynamics loss consumes, all treated as constants.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsLatents {
    /// Reparameterized encoder samples `z_t`, the dynamics inputs.
    pub inputs: Array2<f64>,
    /// Encoder means, the dynamics targets.
    pub targets: Array2<f64>,
}

pub fn dynamics_latents(w: &Weights, arch: &Architecture, ep: &Episode) -> DynamicsLatents {
    let (mean, log_var, _) = encoder_forward(w, arch, ep.input.clone(), false);
    let inputs = &mean + &(log_var.mapv(|lv| (0.5 * lv).exp()) * &ep.noise);
    DynamicsLatents { inputs, targets: mean }
}

/// The episode loss with the dynamics inputs and targets held at `frozen`
/// instead of being recomputed from `w`. Its derivative at the weights that
/// produced `frozen` is the training gradient.
pub fn episode_loss_frozen(w: &Weights, arch: &Architecture, ep: &Episode, kl_weight: f64, frozen: &DynamicsLatents) -> LossBreakdown {
    run_episode(w, arch, ep, kl_weight, Some(frozen), false).0
}

pub fn episode_loss_and_grad(w: &Weights, arch: &Architecture, ep: &Episode, kl_weight: f64) -> (LossBreakdown, Weights) {
    let (loss, grad) = run_episode(w, arch, ep, kl_weight, None, true);
    (loss, grad.expect("gradient requested"))
}

/// Per step: `MSE(decode(z_t), Z_o) + kl_weight * KL(q(z_t|x_t) || N(0, I))`
/// plus, for `t < L`, the diagonal-Gaussian NLL (mean over latent dims) of
/// the encoder mean of `x_{t+1}` under the dynamics prediction from
/// `(z_t, a_t)`. The episode loss is the mean over steps. The dynamics term
/// sees both `z_t` and its target through a stop-gradient, so it trains only
/// the action MLP, the LSTM and the dynamics heads.
fn run_episode(
    w: &Weights,
    arch: &Architecture,
    ep: &Episode,
    kl_weight: f64,
    frozen: Option<&DynamicsLatents>,
    want_grad: bool,
) -> (LossBreakdown, Option<Weights>) {
    let steps = ep.steps();
    let latent = arch.latent_dim;
    let (h, wd) = arch.grid();
    let (hp, wp) = arch.padded();
    let cells = (h * wd) as f64;
    let inv_steps = 1.0 / steps as f64;
    debug_assert_eq!(ep.actions.len() + 1, steps);

    let (mean, log_var, enc_cache) = encoder_forward(w, arch, ep.input.clone(), want_grad);
    let std = log_var.mapv(|lv| (0.5 * lv).exp());
    let z = &mean + &(&std * &ep.noise);
    let (dyn_inputs, targets) = match frozen {
        Some(f) => (&f.inputs, &f.targets),
        None => (&z, &mean),
    };
    let (out, dec_cache) = decoder_forward(w, arch, &z, want_grad);

    let mut dout = want_grad.then(|| Array2::<f64>::zeros(out.raw_dim()));
    let mut recon = 0.0;
    let row = out.row(0);
    for t in 0..steps {
        let base = t * hp * wp;
        for y in 0..h {
            for x in 0..wd {
                let d = row[base + y * wp + x] - ep.target[y * wd + x];
                recon += d * d / cells;
                if let Some(g) = dout.as_mut() {
                    g[[0, base + y * wp + x]] = 2.0 * d / cells * inv_steps;
                }
            }
        }
    }

    let mut kl = 0.0;
    for (m, lv) in mean.iter().zip(log_var.iter()) {
        kl += 0.5 * (lv.exp() + m * m - 1.0 - lv);
    }

    let mut dyn_steps = Vec::with_capacity(steps.saturating_sub(1));
    let mut hidden = Array1::<f64>::zeros(arch.hidden_dim);
    let mut cell = Array1::<f64>::zeros(arch.hidden_dim);
    let mut nll = 0.0;
    for (t, a) in ep.actions.iter().enumerate() {
        let zt = dyn_inputs.column(t).to_owned();
        let f = dynamics_forward(w, &zt, *a, &hidden, &cell);
        let target = targets.column(t + 1);
        for d in 0..latent {
            let diff = target[d] - f.mean[d];
            nll += 0.5 * (diff * diff * (-f.log_var[d]).exp() + f.log_var[d] + LN_2PI) / latent as f64;
        }
        hidden = f.lstm.h.clone();
        cell = f.lstm.c.clone();
        dyn_steps.push(f);
    }

    let total = (recon + kl_weight * kl + nll) * inv_steps;
    let loss = LossBreakdown {
        total,
        recon: recon * inv_steps,
        kl: kl * inv_steps,
        dynamics: nll * inv_steps,
    };
    if !want_grad {
        return (loss, None);
    }

    let mut g = Weights::zeros(arch);
    let dz = decoder_backward(w, arch, dec_cache.as_ref().unwrap(), dout.as_ref().unwrap(), &mut g);

    let mut dh_next = Array1::<f64>::zeros(arch.hidden_dim);
    let mut dc_next = Array1::<f64>::zeros(arch.hidden_dim);
    for (t, f) in dyn_steps.iter().enumerate().rev() {
        let target = targets.column(t + 1);
        let scale = inv_steps / latent as f64;
        let mut dm = Array1::<f64>::zeros(latent);
        let mut dlv = Array1::<f64>::zeros(latent);
        for d in 0..latent {
            let diff = target[d] - f.mean[d];
            let prec = (-f.log_var[d]).exp();
            dm[d] = -diff * prec * scale;
            dlv[d] = 0.5 * (1.0 - diff * diff * prec) * scale;
        }
        let mut dh = dh_next.clone();
        dh += &w.dyn_mean.backward_vec(&f.lstm.h, &dm, &mut g.dyn_mean);
        dh += &w.dyn_logvar.backward_vec(&f.lstm.h, &dlv, &mut g.dyn_logvar);
        // The latent part of dx is dropped: the dynamics inputs are constants.
        let (dx, dh_prev, dc_prev) = w.lstm.backward(&f.lstm, &dh, &dc_next, &mut g.lstm);
        dh_next = dh_prev;
        dc_next = dc_prev;
        let mut de2 = dx.slice(s![latent..]).to_owned();
        relu_backward(&mut de2, &f.e2);
        let mut de1 = w.act_fc[1].backward_vec(&f.e1, &de2, &mut g.act_fc[1]);
        relu_backward(&mut de1, &f.e1);
        w.act_fc[0].backward_vec(&f.action, &de1, &mut g.act_fc[0]);
    }

    // z = mean + exp(lv / 2) * eps, plus the KL term on (mean, lv).
    let mut dmean = dz.clone();
    dmean.scaled_add(kl_weight * inv_steps, &mean);
    let mut dlog_var = &dz * &ep.noise * &std * 0.5;
    dlog_var.scaled_add(0.5 * kl_weight * inv_steps, &log_var.mapv(|lv| lv.exp() - 1.0));
    encoder_backward(w, arch, enc_cache.as_ref().unwrap(), &dmean, &dlog_var, &mut g);
    (loss, Some(g))
}
