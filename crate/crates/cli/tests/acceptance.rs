//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::hash::{Hash, Hasher};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dreammap::dreamer::{
    load_trace, run_acquisition, run_acquisition_with, sample_candidates, save_trace, score_candidate, trace_to_jsonl,
    AcquisitionConfig, DreamMode, Execution, MapOracle, RunOptions, SelectionRule,
};
use dreammap::gp::{fit_kernel, gp_reconstruct, kernel_eval, KernelParams};
use dreammap::io::{load_map, load_pair, map_to_string, save_map, save_pair};
use dreammap::rng::{self, tag};
use dreammap::synth::{make_dataset, SynthConfig};
use dreammap::world_model::{
    build_episode, dynamics_latents, episode_loss_and_grad, episode_loss_frozen, load_model, model_to_bytes, save_model,
    train, Architecture, TrainConfig, Weights, WorldModel,
};
use dreammap::{mae, make_observation, rmse, EnvironmentPair, GridMap, MeasurementState, UnitTag};
use dreammap_cli::commands::dbm_metrics;
use rand::Rng;

const METRIC_TOL: f64 = 1e-12;
const GP_TOL: f64 = 1e-8;
const GP_VISITED_SLACK: f64 = 1e-8;
const GP_MONOTONE_SLACK: f64 = 1e-10;
const GRAD_STEP: f64 = 1e-4;
const GRAD_REL_TOL: f64 = 1e-3;
const GRAD_ABS_FLOOR: f64 = 1e-10;
const GRAD_MIN_FRACTION: f64 = 0.99;
const RMSE_DRIFT: f64 = 0.25;
const FEW_SHOT_WINS: usize = 4;
const MAP_VALUE_TOL: f64 = 1e-9;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run_criterion(id: usize, name: &str, limit_secs: f64, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    };
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match result {
        Ok(d) if secs <= limit_secs => (true, d),
        Ok(d) => (false, format!("{d}; runtime {secs:.1} s over the {limit_secs} s limit")),
        Err(e) => (false, e),
    };
    println!("{} [{id}] {name}: {detail} ({secs:.2} s)", if pass { "PASS" } else { "FAIL" });
    pass
}

fn random_map(r: &mut rng::StreamRng, h: usize, w: usize) -> GridMap {
    let v = (0..h * w).map(|_| r.random_range(-90.0..-20.0)).collect();
    GridMap::new(h, w, v, UnitTag::Dbm).unwrap()
}

fn c1_metrics() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..200u64 {
        let mut r = rng::stream(i, &[1]);
        let (h, w) = (r.random_range(1..=12), r.random_range(1..=12));
        let (a, b) = (random_map(&mut r, h, w), random_map(&mut r, h, w));
        let (mut sq, mut ab) = (0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let d = a.get(y, x) - b.get(y, x);
                sq += d * d;
                ab += d.abs();
            }
        }
        let n = (h * w) as f64;
        let (o_rmse, o_mae) = ((sq / n).sqrt(), ab / n);
        worst = worst.max((rmse(&a, &b).unwrap() - o_rmse).abs()).max((mae(&a, &b).unwrap() - o_mae).abs());
    }
    ensure(worst <= METRIC_TOL, || format!("max deviation {worst:e} > {METRIC_TOL:e}"))?;
    Ok(format!("200 pairs, max deviation {worst:.1e}"))
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for row in 0..n {
            if row != col {
                let f = a[row][col];
                for j in 0..n {
                    a[row][j] -= f * a[col][j];
                    inv[row][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

fn gp_oracle(p: &KernelParams, empty: &GridMap, obs: &[(usize, f64)]) -> (Vec<f64>, Vec<f64>) {
    let w = empty.width();
    let at = |i: usize| ((i / w) as f64, (i % w) as f64);
    let n = obs.len();
    let k: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| kernel_eval(p, at(obs[a].0), at(obs[b].0))).collect()).collect();
    let kinv = invert(k);
    let resid: Vec<f64> = obs.iter().map(|&(i, v)| v - empty.at(i)).collect();
    let mut mean = Vec::with_capacity(empty.len());
    let mut var = Vec::with_capacity(empty.len());
    for q in 0..empty.len() {
        let ks: Vec<f64> = obs.iter().map(|&(i, _)| p.signal(at(i), at(q))).collect();
        let mut m = 0.0;
        let mut quad = 0.0;
        for a in 0..n {
            for b in 0..n {
                m += ks[a] * kinv[a][b] * resid[b];
                quad += ks[a] * kinv[a][b] * ks[b];
            }
        }
        mean.push(empty.at(q) + m);
        var.push(p.const_var + p.rbf_var - quad);
    }
    (mean, var)
}

fn c2_gp() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let mut r = rng::stream(i, &[2]);
        let (h, w) = (r.random_range(1..=10), r.random_range(1..=10));
        let params = KernelParams {
            const_var: r.random_range(0.0..1.0),
            rbf_var: r.random_range(0.1..4.0),
            rbf_len: r.random_range(0.5..4.0),
            noise_var: r.random_range(0.01..0.5),
        };
        let empty = random_map(&mut r, h, w);
        let m = r.random_range(1..=12usize.min(h * w));
        let cells = rand::seq::index::sample(&mut r, h * w, m).into_vec();
        let mut state = MeasurementState::new(h, w);
        let mut prev_var: Option<Vec<f64>> = None;
        for (j, &c) in cells.iter().enumerate() {
            state.apply_measurement(c, empty.at(c) + r.random_range(-8.0..2.0)).unwrap();
            let post = gp_reconstruct(&params, &empty, &state).map_err(|e| format!("instance {i}: {e}"))?;
            let obs: Vec<(usize, f64)> = state.measurements().collect();
            let (om, ov) = gp_oracle(&params, &empty, &obs);
            for q in 0..h * w {
                worst = worst.max((post.mean.at(q) - om[q]).abs()).max((post.variance.at(q) - ov[q].max(0.0)).abs());
            }
            for &(v, _) in &obs {
                let pv = post.variance.at(v);
                ensure(pv <= params.noise_var + GP_VISITED_SLACK, || {
                    format!("instance {i}: visited variance {pv} > noise {}", params.noise_var)
                })?;
            }
            if let Some(prev) = &prev_var {
                for q in 0..h * w {
                    ensure(post.variance.at(q) <= prev[q] + GP_MONOTONE_SLACK, || {
                        format!("instance {i}: variance grew at cell {q} after measurement {j}")
                    })?;
                }
            }
            prev_var = Some(post.variance.values().to_vec());
        }
    }
    ensure(worst <= GP_TOL, || format!("max deviation {worst:e} > {GP_TOL:e}"))?;
    Ok(format!("50 instances, every prefix; max mean/variance deviation {worst:.1e}"))
}

fn flat_slot(w: &mut Weights, mut k: usize) -> &mut f64 {
    for t in w.tensors_mut() {
        if k < t.len() {
            return &mut t[k];
        }
        k -= t.len();
    }
    panic!("parameter index out of range")
}

fn c3_gradient() -> Check {
    let cfg = SynthConfig {
        base_h: 5,
        base_w: 5,
        ap_location: (1.0, 1.0),
        n_occupants: 2,
        ..SynthConfig::default()
    };
    let pairs = make_dataset(&cfg, 1, 1, 1).unwrap();
    let arch = Architecture::miniature(5, 5);
    ensure(arch.latent_dim == 8 && arch.hidden_dim == 16, || "miniature dims changed".into())?;
    let kl = 0.5;
    let mut report = Vec::new();
    for seed in 0..5u64 {
        let mut w = Weights::init(&arch, seed);
        // Push the log-variance heads off zero so every loss term is exercised.
        for v in w.enc_logvar.b.iter_mut() {
            *v -= 0.5;
        }
        let ep = build_episode(&arch, &pairs, 6, &mut rng::stream(seed, &[tag::EPISODE])).unwrap();
        let (_, grad) = episode_loss_and_grad(&w, &arch, &ep, kl);
        let grad = grad.to_flat();
        let frozen = dynamics_latents(&w, &arch, &ep);
        let n = w.n_params();
        let mut ok = 0;
        for k in 0..n {
            let orig = *flat_slot(&mut w, k);
            *flat_slot(&mut w, k) = orig + GRAD_STEP;
            let lp = episode_loss_frozen(&w, &arch, &ep, kl, &frozen).total;
            *flat_slot(&mut w, k) = orig - GRAD_STEP;
            let lm = episode_loss_frozen(&w, &arch, &ep, kl, &frozen).total;
            *flat_slot(&mut w, k) = orig;
            let num = (lp - lm) / (2.0 * GRAD_STEP);
            let err = (grad[k] - num).abs();
            if err <= GRAD_REL_TOL * grad[k].abs().max(num.abs()) || err < GRAD_ABS_FLOOR {
                ok += 1;
            }
        }
        let frac = ok as f64 / n as f64;
        ensure(frac >= GRAD_MIN_FRACTION, || format!("seed {seed}: only {ok}/{n} parameters within tolerance"))?;
        report.push(format!("{:.2}%", 100.0 * frac));
    }
    Ok(format!("5 seeds, fraction within tolerance {}", report.join(" ")))
}

fn state_hash(state: &MeasurementState, dyn_hidden: &[f64], dyn_cell: &[f64], z: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    state.visited().hash(&mut h);
    for v in state.value_slice().iter().chain(state.mask_slice()).chain(dyn_hidden).chain(dyn_cell).chain(z) {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

fn c4_contract() -> Check {
    let mut setups = BTreeMap::new();
    for scale in [1usize, 2] {
        let pair = make_dataset(&SynthConfig::default(), 1, 1, scale).unwrap().remove(1);
        let (h, w) = pair.shape();
        setups.insert(scale, (WorldModel::new(Architecture::standard(h, w), 100 + scale as u64), pair));
    }
    let mut total_queries = 0;
    for i in 0..100usize {
        let scale = 1 + i % 2;
        let rule = if (i / 2) % 2 == 0 { SelectionRule::ArgminVariance } else { SelectionRule::Random };
        let budget = 1 + (i * 7) % 20;
        let (model, pair) = &setups[&scale];
        let cfg = AcquisitionConfig {
            pool_size: 6,
            dream_samples: 3,
            budget,
            selection_rule: rule,
            seed: i as u64,
        };
        let run = |execution, dream_mode| {
            let mut oracle = MapOracle::new(&pair.occupied);
            let opts = RunOptions {
                execution,
                dream_mode,
                track_rmse: false,
            };
            let tr = run_acquisition_with(model, &pair.empty, &mut oracle, None, &cfg, opts).unwrap();
            (tr, oracle.query_count(), oracle.queried().to_vec())
        };
        let (serial, count, queried) = run(Execution::Serial, DreamMode::Normal);
        ensure(count == budget, || format!("run {i}: {count} queries for budget {budget}"))?;
        let distinct: HashSet<usize> = queried.iter().copied().collect();
        ensure(distinct.len() == budget, || format!("run {i}: duplicate cells"))?;
        ensure(serial.cells() == queried, || format!("run {i}: trace cells differ from oracle queries"))?;
        ensure(serial.steps.iter().all(|s| s.scores.iter().all(|&(_, _, u)| u >= 0.0 && u.is_finite())), || {
            format!("run {i}: negative or non-finite score")
        })?;
        let (parallel, _, _) = run(Execution::Parallel, DreamMode::Normal);
        ensure(parallel == serial, || format!("run {i}: parallel trace differs from serial"))?;
        let text = |t: &dreammap::dreamer::AcquisitionTrace| trace_to_jsonl(&t.steps, None).unwrap();
        ensure(text(&parallel) == text(&serial), || format!("run {i}: serialized traces differ"))?;
        let (zero, _, _) = run(Execution::Parallel, DreamMode::ZeroVariance);
        ensure(zero.steps.iter().all(|s| s.scores.iter().all(|&(_, _, u)| u == 0.0)), || {
            format!("run {i}: zero-variance dream gave a non-zero score")
        })?;

        // Scoring must leave the measurement state, recurrent memory and belief untouched.
        let (h, w) = pair.shape();
        let state = serial.state_after(budget / 2).map_err(|e| e.to_string())?;
        let obs = make_observation(&pair.empty, &state).unwrap();
        let z = model.encode_with_rng(&obs, &mut rng::stream(cfg.seed, &[tag::ENCODE])).unwrap();
        let dyn_state = model.initial_state();
        let before = state_hash(&state, &dyn_state.hidden, &dyn_state.cell, &z.sample);
        let cands = sample_candidates(&state, cfg.pool_size, &mut rng::stream(cfg.seed, &[tag::CANDIDATES])).unwrap();
        for a in &cands {
            let mut r = rng::stream(cfg.seed, &[tag::DREAM, a.cell_index as u64]);
            let u1 = score_candidate(model, &z, &dyn_state, a, cfg.dream_samples, &mut r, DreamMode::Normal).unwrap();
            let mut r = rng::stream(cfg.seed, &[tag::DREAM, a.cell_index as u64]);
            let u2 = score_candidate(model, &z, &dyn_state, a, cfg.dream_samples, &mut r, DreamMode::Normal).unwrap();
            ensure(u1 == u2, || format!("run {i}: rescoring changed the score"))?;
            ensure(a.cell_index < h * w && !state.is_visited(a.cell_index), || format!("run {i}: bad candidate"))?;
        }
        let after = state_hash(&state, &dyn_state.hidden, &dyn_state.cell, &z.sample);
        ensure(before == after, || format!("run {i}: scoring changed the state hash"))?;
        total_queries += count;
    }
    Ok(format!("100 runs ({total_queries} queries), serial = parallel, zero-variance scores all 0"))
}

struct Trained {
    model: WorldModel,
    eval: EnvironmentPair,
}

fn c5_training(out: &mut Option<Trained>) -> Check {
    let pairs = make_dataset(&SynthConfig::default(), 3, 1, 1).map_err(|e| e.to_string())?;
    ensure(pairs[0].shape() == (9, 11), || "dataset is not 9x11".into())?;
    let cfg = TrainConfig {
        epochs: 50,
        ..TrainConfig::default()
    };
    let res = train(Architecture::standard(9, 11), &pairs[..3], &pairs[3..], &cfg, |_| {}).map_err(|e| e.to_string())?;
    let t = &res.trace;
    ensure(t.len() == 50, || format!("{} epochs in trace", t.len()))?;
    ensure(t.iter().all(|s| s.mean_loss.is_finite() && s.holdout_rmse.is_finite()), || "non-finite trace".into())?;
    let (l1, l20) = (t[0].mean_loss, t[19].mean_loss);
    let (r20, r50) = (t[19].holdout_rmse, t[49].holdout_rmse);
    ensure(l20 < l1, || format!("loss(20) {l20:.4} >= loss(1) {l1:.4}"))?;
    let drift = (r50 - r20).abs();
    ensure(drift < RMSE_DRIFT * r20, || format!("|rmse(50) - rmse(20)| = {drift:.4} >= {RMSE_DRIFT} * {r20:.4}"))?;
    *out = Some(Trained {
        model: res.model,
        eval: pairs[3].clone(),
    });
    Ok(format!(
        "loss(1) {l1:.4} > loss(20) {l20:.4}; rmse(20) {r20:.4}, rmse(50) {r50:.4}, drift ratio {:.3}",
        drift / r20
    ))
}

fn c6_few_shot(trained: Option<&Trained>) -> Check {
    let Trained { model, eval } = trained.ok_or("criterion 5 produced no model")?;
    let kernel = fit_kernel(&eval.empty, 1024).map_err(|e| e.to_string())?;
    let (empty_rmse, _) = dbm_metrics(eval, &eval.empty).map_err(|e| e.to_string())?;
    let mut wins = 0;
    let mut lines = Vec::new();
    for rep in 0..5u64 {
        let cfg = AcquisitionConfig {
            budget: 10,
            seed: rep,
            ..AcquisitionConfig::default()
        };
        let tr = run_acquisition(model, eval, &cfg).map_err(|e| e.to_string())?;
        let (wm, _) = dbm_metrics(eval, &tr.reconstruction).map_err(|e| e.to_string())?;
        let gp = gp_reconstruct(&kernel, &eval.empty, &tr.state).map_err(|e| e.to_string())?.mean;
        let (gp_rmse, _) = dbm_metrics(eval, &gp).map_err(|e| e.to_string())?;
        wins += usize::from(wm < empty_rmse);
        lines.push(format!("{wm:.2}/{gp_rmse:.2}"));
    }
    ensure(wins >= FEW_SHOT_WINS, || format!("world model beat empty copy in {wins}/5"))?;
    Ok(format!(
        "world model beat empty copy ({empty_rmse:.2} dBm) in {wins}/5; per rep world/GP dBm RMSE {} (GP not gated)",
        lines.join(" ")
    ))
}

fn c7_sweep(dir: &Path) -> Check {
    let status = Command::new(env!("CARGO_BIN_EXE_dreammap"))
        .args(["sweep", "--scales", "1,2,4", "--budgets", "1,2,5,10,15,20", "--reps", "2", "--epochs", "2", "--seed", "0"])
        .arg("--out")
        .arg(dir)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("sweep exited with {status}"))?;
    let mut rdr = csv::Reader::from_path(dir.join("results.csv")).map_err(|e| e.to_string())?;
    let header: Vec<String> = rdr.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    ensure(header == ["scale", "budget", "method", "rep", "rmse", "mae", "seconds"], || format!("header {header:?}"))?;
    let mut summary: HashSet<(usize, usize, String, String)> = HashSet::new();
    let mut empty_by_rep: BTreeMap<(usize, String), HashSet<(u64, u64)>> = BTreeMap::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        ensure(rec.len() == 7, || format!("row with {} fields", rec.len()))?;
        let scale: usize = rec[0].parse().map_err(|_| "bad scale")?;
        let budget: usize = rec[1].parse().map_err(|_| "bad budget")?;
        let nums: Vec<f64> = (4..7).map(|j| rec[j].parse::<f64>()).collect::<Result<_, _>>().map_err(|_| "bad number")?;
        ensure(nums.iter().all(|v| v.is_finite() && *v >= 0.0), || format!("bad values {nums:?}"))?;
        let (method, rep) = (rec[2].to_string(), rec[3].to_string());
        if rep == "mean" || rep == "std" {
            summary.insert((scale, budget, method.clone(), rep.clone()));
        } else if method == "empty_copy" {
            empty_by_rep.entry((scale, rep)).or_default().insert((nums[0].to_bits(), nums[1].to_bits()));
        }
        rows += 1;
    }
    for scale in [1, 2, 4] {
        for m in ["world_model", "gp_same_points", "gp_random_points", "empty_copy"] {
            for stat in ["mean", "std"] {
                ensure(summary.contains(&(scale, 20, m.to_string(), stat.to_string())), || {
                    format!("missing {stat} row for {m} at scale {scale}, N = 20")
                })?;
            }
        }
    }
    ensure(!empty_by_rep.is_empty() && empty_by_rep.values().all(|s| s.len() == 1), || {
        "empty_copy varies with budget".into()
    })?;
    Ok(format!("{rows} rows over scales 1,2,4; mean and std rows for all four methods; empty_copy budget-invariant"))
}

fn c8_formats(dir: &Path) -> Check {
    // REMAP maps in both units.
    for i in 0..20u64 {
        let mut r = rng::stream(i, &[8]);
        let (h, w) = (r.random_range(1..=12), r.random_range(1..=12));
        let map = if i % 2 == 0 {
            random_map(&mut r, h, w)
        } else {
            GridMap::new(h, w, (0..h * w).map(|_| r.random_range(0.0..=1.0)).collect(), UnitTag::Normalized).unwrap()
        };
        let p = dir.join(format!("m{i}.remap"));
        save_map(&map, &p).map_err(|e| e.to_string())?;
        let back = load_map(&p).map_err(|e| e.to_string())?;
        let worst = map.values().iter().zip(back.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(worst <= MAP_VALUE_TOL && back.unit() == map.unit(), || format!("map {i} drifted by {worst:e}"))?;
        ensure(map_to_string(&back) == fs::read_to_string(&p).unwrap(), || format!("map {i} not byte-stable"))?;
    }

    // Pair JSON with its two maps.
    let pair = make_dataset(&SynthConfig::default(), 1, 1, 2).unwrap().remove(1);
    let (a, b) = (dir.join("a").join("pair.json"), dir.join("b").join("pair.json"));
    fs::create_dir_all(a.parent().unwrap()).unwrap();
    fs::create_dir_all(b.parent().unwrap()).unwrap();
    save_pair(&pair, &a).map_err(|e| e.to_string())?;
    let loaded = load_pair(&a).map_err(|e| e.to_string())?;
    save_pair(&loaded, &b).map_err(|e| e.to_string())?;
    for f in ["pair.json", "pair_empty.remap", "pair_occupied.remap"] {
        ensure(fs::read(dir.join("a").join(f)).unwrap() == fs::read(dir.join("b").join(f)).unwrap(), || format!("{f} differs"))?;
    }
    ensure(loaded.meta == pair.meta, || "pair metadata changed".into())?;

    // DMWM model plus sidecar.
    let model = WorldModel::new(Architecture::miniature(9, 11), 4);
    let (m1, m2) = (dir.join("m1.dmwm"), dir.join("m2.dmwm"));
    save_model(&model, &m1).map_err(|e| e.to_string())?;
    let back = load_model(&m1).map_err(|e| e.to_string())?;
    save_model(&back, &m2).map_err(|e| e.to_string())?;
    ensure(fs::read(&m1).unwrap() == fs::read(&m2).unwrap(), || "model bytes differ".into())?;
    ensure(fs::read(dir.join("m1.dmwm.json")).unwrap() == fs::read(dir.join("m2.dmwm.json")).unwrap(), || {
        "sidecars differ".into()
    })?;
    ensure(model_to_bytes(&back) == fs::read(&m1).unwrap(), || "in-memory bytes differ".into())?;

    // Trace JSONL.
    let p = make_dataset(&SynthConfig::default(), 1, 1, 1).unwrap().remove(1);
    let m = WorldModel::new(Architecture::standard(9, 11), 1);
    let mut o = MapOracle::new(&p.occupied);
    let cfg = AcquisitionConfig {
        pool_size: 6,
        dream_samples: 3,
        budget: 4,
        ..AcquisitionConfig::default()
    };
    let opts = RunOptions {
        track_rmse: true,
        ..RunOptions::default()
    };
    let tr = run_acquisition_with(&m, &p.empty, &mut o, Some(&p.occupied), &cfg, opts).map_err(|e| e.to_string())?;
    let (t1, t2) = (dir.join("t1.jsonl"), dir.join("t2.jsonl"));
    save_trace(&tr.steps, Some("recon.remap"), &t1).map_err(|e| e.to_string())?;
    let (steps, last) = load_trace(&t1).map_err(|e| e.to_string())?;
    save_trace(&steps, last.as_deref(), &t2).map_err(|e| e.to_string())?;
    ensure(fs::read(&t1).unwrap() == fs::read(&t2).unwrap(), || "trace bytes differ".into())?;
    ensure(steps == tr.steps, || "trace records changed".into())?;
    Ok("REMAP, pair JSON, DMWM with sidecar and trace JSONL are byte-stable".into())
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut trained = None;
    let results = [
        run_criterion(1, "metric oracle equivalence", 1.0, c1_metrics),
        run_criterion(2, "GP oracle equivalence", 10.0, c2_gp),
        run_criterion(3, "gradient check", 60.0, c3_gradient),
        run_criterion(4, "acquisition loop contract", 120.0, c4_contract),
        run_criterion(5, "training sanity", 600.0, || c5_training(&mut trained)),
        run_criterion(6, "few-shot ordering", 300.0, || c6_few_shot(trained.as_ref())),
        run_criterion(7, "size sweep", 1800.0, || c7_sweep(&tmp.path().join("sweep"))),
        run_criterion(8, "format round trips", 5.0, || c8_formats(tmp.path())),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
