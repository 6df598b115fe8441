//! Acceptance checks. Each returns an [`Outcome`] instead of panicking so a
//! harness can report every criterion.

use std::time::Instant;

use beamscore::baselines::pzf;
use beamscore::channel::{complex_normal_matrix, perturb_csi, sample_rng, CsiDataset, ErrorLevel, SystemConfig};
use beamscore::dsn::{dsn_loss_and_grad, dsn_objective, train_dsn, DebertConfig, DebertModel, DenoiseExample};
use beamscore::hmgat::{
    constrain_outputs, sum_rate, train_hmgat, GraphBatch, HmgalLayer, HmgatConfig, HmgatModel, RawOutputs, Topology,
};
use beamscore::metrics::{
    component_values, evaluate_sum_rates, js_divergence, ks_statistic, nre, Component,
};
use beamscore::ncsn::{
    generate, langevin_sample_batch, make_schedule, ncsn_loss_and_grad, ncsn_objective, train_ncsn, LinearScore,
    NcsnConfig, NcsnModel, Perturbations, ScheduleConfig, ScoreModel,
};
use beamscore::numerics::gradcheck::DEFAULT_STEP;
use beamscore::numerics::{check_store, AdamWConfig, ComplexMatrix, Graph, ParamStore};
use beamscore::train::TrainOptions;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Outcome {
        Outcome { pass, detail: detail.into() }
    }

    fn error(e: impl std::fmt::Display) -> Outcome {
        Outcome::new(false, format!("error: {e}"))
    }
}

fn channels(n: usize, n_t: usize, k: usize, seed: u64) -> Vec<ComplexMatrix> {
    (0..n).map(|i| complex_normal_matrix(&mut sample_rng(seed, i as u64), n_t, k, 1.0)).collect()
}

fn random_rows(rows: usize, cols: usize, rng: &mut impl Rng) -> Rows {
    (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn mean_nre(truth: &[ComplexMatrix], est: &[ComplexMatrix]) -> f64 {
    truth.iter().zip(est).map(|(h, e)| nre(h, e).unwrap()).sum::<f64>() / truth.len() as f64
}

pub const GRAD_TOL: f64 = 1e-4;

/// Worst relative gradient error of the beamformer, score and denoiser
/// objectives on micro models (K=3, N_T=4, two layers/levels, two heads,
/// width 8).
pub fn gradient_errors() -> beamscore::Result<[(f64, String); 3]> {
    let (k, n_t) = (3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let hs = channels(2, n_t, k, 17);

    let system = SystemConfig::new(k, n_t);
    let config = HmgatConfig { layers: 2, heads: 2, node_dim: 8, edge_dim: 8, mlp_hidden: 8, mlp_depth: 1 };
    let hmgat = HmgatModel::new(config, n_t, &mut rng)?;
    let batch = GraphBatch::new(&hs)?;
    let hmgat_value = |store: &ParamStore| {
        let mut g = Graph::inference();
        let p = g.bind(store);
        let loss = hmgat.loss(&mut g, &p, &batch, &batch, &system, None)?;
        g.value(loss).item()
    };
    let analytic = {
        let mut g = Graph::new();
        let p = g.bind(&hmgat.store);
        let loss = hmgat.loss(&mut g, &p, &batch, &batch, &system, None)?;
        g.backward(loss)?.for_params(&p)
    };
    let hmgat_err = check_store(&hmgat.store, &analytic, hmgat_value, DEFAULT_STEP)?;

    let schedule = make_schedule(1.0, 0.1, 2, 1e-3, 1)?;
    let ncsn = NcsnModel::new(NcsnConfig { dim: 8, ffn: 16, heads: 2, blocks: 2 }, n_t, 2, &mut rng)?;
    let noise = Perturbations::draw(&hs, &schedule, &mut rng);
    let (_, analytic) = ncsn_loss_and_grad(&ncsn, &hs, &noise, &schedule, None)?;
    let ncsn_value = |store: &ParamStore| {
        let mut g = Graph::inference();
        let p = g.bind(store);
        let loss = ncsn_objective(&mut g, &p, &ncsn, &hs, &noise, &schedule, None)?;
        g.value(loss).item()
    };
    let ncsn_err = check_store(ncsn.store(), &analytic, ncsn_value, DEFAULT_STEP)?;

    let dsn = DebertModel::new(
        DebertConfig { dim: 8, ffn: 16, heads: 2, score_blocks: 2, step_hidden: 8 },
        n_t,
        &mut rng,
    )?;
    let examples: Vec<DenoiseExample> = hs
        .iter()
        .zip([0.5, 2.0])
        .map(|(h, d2)| DenoiseExample {
            clean: h.clone(),
            noisy: perturb_csi(h, ErrorLevel::new(d2).unwrap(), &mut rng),
            delta2_e: d2,
        })
        .collect();
    let (_, analytic) = dsn_loss_and_grad(&dsn, &examples, 1.0, None)?;
    let dsn_value = |store: &ParamStore| {
        let mut g = Graph::inference();
        let p = g.bind(store);
        let loss = dsn_objective(&mut g, &p, &dsn, &examples, 1.0, None)?;
        g.value(loss).item()
    };
    let dsn_err = check_store(&dsn.store, &analytic, dsn_value, DEFAULT_STEP)?;
    Ok([hmgat_err, ncsn_err, dsn_err])
}

pub fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    match gradient_errors() {
        Ok(errs) => {
            let secs = start.elapsed().as_secs_f64();
            let pass = errs.iter().all(|(e, _)| *e < GRAD_TOL) && secs < 60.0;
            Outcome::new(
                pass,
                format!(
                    "max rel err hmgat {:.2e} ({}), ncsn {:.2e} ({}), dsn {:.2e} ({}); {secs:.1} s",
                    errs[0].0, errs[0].1, errs[1].0, errs[1].1, errs[2].0, errs[2].1
                ),
            )
        }
        Err(e) => Outcome::error(e),
    }
}

/// Raw decoder outputs spanning many magnitudes. Analog entries are
/// occasionally exactly zero.
fn random_raw(rng: &mut impl Rng, n_t: usize, k: usize) -> RawOutputs {
    let scale = 10f64.powf(rng.gen_range(-6.0..6.0));
    let mut entry = |zeros: bool| -> (f64, f64) {
        if zeros && rng.gen_bool(0.02) {
            (0.0, 0.0)
        } else {
            (rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale)
        }
    };
    let rf: Vec<_> = (0..n_t * k).map(|_| entry(true)).collect();
    let bb: Vec<_> = (0..k * k).map(|_| entry(false)).collect();
    let p_rf = ComplexMatrix::from_pairs(n_t, k, &rf).unwrap();
    let p_bb = ComplexMatrix::from_pairs(k, k, &bb).unwrap();
    let beta = (0..k).map(|_| rng.gen_range(-30.0..30.0)).collect();
    RawOutputs { p_rf, p_bb, beta }
}

pub fn constraint_feasibility() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut modulus, mut power, mut column) = (0.0_f64, f64::NEG_INFINITY, 0.0_f64);
    for _ in 0..10_000 {
        let (n_t, k) = (rng.gen_range(1..=16), rng.gen_range(1..=6));
        let p_max = rng.gen_range(0.1..10.0);
        let raw = random_raw(&mut rng, n_t, k);
        let sol = match constrain_outputs(&raw, p_max) {
            Ok((sol, _)) => sol,
            Err(e) => return Outcome::error(e),
        };
        let target = 1.0 / (n_t as f64).sqrt();
        for (re, im) in sol.p_rf.to_pairs() {
            modulus = modulus.max((re.hypot(im) - target).abs());
        }
        power = power.max(sol.beta.iter().sum::<f64>() - p_max);
        let eff = sol.effective().unwrap();
        for c in 0..k {
            let norm = eff.column(c).iter().map(|(r, i)| r * r + i * i).sum::<f64>().sqrt();
            column = column.max((norm - 1.0).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        modulus < 1e-6 && power <= 1e-9 && column < 1e-6 && secs < 10.0,
        format!("worst |mod - 1/sqrt(N_T)| {modulus:.1e}, sum(beta) - P_max {power:.1e}, |col norm - 1| {column:.1e}; {secs:.1} s"),
    )
}

fn permutation(k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..k).collect();
    p.shuffle(rng);
    p
}

/// Largest deviation from exact permutation equivariance of the beamformer
/// outputs and of its sum rate, and the same for the denoiser outputs.
pub fn equivariance_errors(trials: usize) -> beamscore::Result<[f64; 4]> {
    let (k, n_t) = (4, 8);
    let system = SystemConfig::new(k, n_t);
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let hmgat = HmgatModel::new(HmgatConfig::desk(), n_t, &mut rng)?;
    let dsn = DebertModel::new(DebertConfig::default(), n_t, &mut rng)?;
    let hs = channels(trials, n_t, k, 31);
    let perms: Vec<Vec<usize>> = (0..trials).map(|_| permutation(k, &mut rng)).collect();
    let permuted: Vec<ComplexMatrix> = hs.iter().zip(&perms).map(|(h, p)| h.permute_columns(p)).collect();

    let (mut out_err, mut rate_err) = (0.0_f64, 0.0_f64);
    let a = hmgat.solve_batch(&hs, system.p_max)?;
    let b = hmgat.solve_batch(&permuted, system.p_max)?;
    for i in 0..trials {
        let p = &perms[i];
        out_err = out_err
            .max(complex_diff(&b[i].p_rf, &a[i].p_rf.permute_columns(p)))
            .max(complex_diff(&b[i].p_bb, &permute_square(&a[i].p_bb, p)));
        for (j, &src) in p.iter().enumerate() {
            out_err = out_err.max((b[i].beta[j] - a[i].beta[src]).abs());
        }
        let ra = sum_rate(&hs[i], &a[i], system.sigma2)?;
        let rb = sum_rate(&permuted[i], &b[i], system.sigma2)?;
        rate_err = rate_err.max((ra - rb).abs());
    }

    let (mut den_err, mut den_rate) = (0.0_f64, 0.0_f64);
    let noisy: Vec<ComplexMatrix> =
        hs.iter().map(|h| perturb_csi(h, ErrorLevel::from_db(0.0), &mut rng)).collect();
    let noisy_perm: Vec<ComplexMatrix> = noisy.iter().zip(&perms).map(|(h, p)| h.permute_columns(p)).collect();
    let da = dsn.run(&noisy, 1.0)?;
    let db = dsn.run(&noisy_perm, 1.0)?;
    let ha: Vec<ComplexMatrix> = da.iter().map(|r| r.h_hat.clone()).collect();
    let hb: Vec<ComplexMatrix> = db.iter().map(|r| r.h_hat.clone()).collect();
    let sa = hmgat.solve_batch(&ha, system.p_max)?;
    let sb = hmgat.solve_batch(&hb, system.p_max)?;
    for i in 0..trials {
        let p = &perms[i];
        den_err = den_err
            .max(complex_diff(&db[i].score, &da[i].score.permute_columns(p)))
            .max(complex_diff(&db[i].delta, &da[i].delta.permute_columns(p)))
            .max(complex_diff(&db[i].h_hat, &da[i].h_hat.permute_columns(p)));
        for (j, &src) in p.iter().enumerate() {
            let (x, y) = (db[i].eta[j], da[i].eta[src]);
            den_err = den_err.max((x.0 - y.0).abs()).max((x.1 - y.1).abs());
        }
        let ra = sum_rate(&hs[i], &sa[i], system.sigma2)?;
        let rb = sum_rate(&permuted[i], &sb[i], system.sigma2)?;
        den_rate = den_rate.max((ra - rb).abs());
    }
    Ok([out_err, rate_err, den_err, den_rate])
}

/// Floating-point reassociation is the only source of mismatch allowed.
pub const PERMUTE_TOL: f64 = 1e-9;

pub fn permutation_equivariance() -> Outcome {
    match equivariance_errors(100) {
        Ok([out, rate, den, den_rate]) => Outcome::new(
            out < PERMUTE_TOL && den < PERMUTE_TOL && rate < 1e-6 && den_rate < 1e-6,
            format!(
                "100 trials: hmgat outputs {out:.1e}, rate {rate:.1e}; debert outputs {den:.1e}, rate {den_rate:.1e}"
            ),
        ),
        Err(e) => Outcome::error(e),
    }
}

/// Worst deviation between library and scalar oracle for the node update,
/// edge update, score network and denoiser over random K=3 instances.
pub fn oracle_errors(instances: usize) -> beamscore::Result<[f64; 4]> {
    let k = 3;
    let mut worst = [0.0_f64; 4];
    for seed in 0..instances as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let count = rng.gen_range(1..=3);
        let (f_in, d_in) = (rng.gen_range(2..7), rng.gen_range(2..7));
        let (f_out, d_out) = (rng.gen_range(2..7), rng.gen_range(2..7));
        let heads = rng.gen_range(1..4);
        let mut store = ParamStore::new();
        let layer = HmgalLayer::new(&mut store, "l", f_in, d_in, f_out, d_out, heads, &mut rng);
        let x = random_rows(count * k, f_in, &mut rng);
        let e = random_rows(count * k * k, d_in, &mut rng);
        let topo = Topology::new(count, k);
        let mut g = Graph::inference();
        let p = g.bind(&store);
        let xv = g.constant(tensor_of(&x));
        let ev = g.constant(tensor_of(&e));
        let nodes = layer.node_update(&mut g, &p, &topo, xv, ev, None)?;
        let edges = layer.edge_update(&mut g, &p, &topo, xv, ev, None)?;
        let (on, oe) = hmgal_oracle(&layer, &store, &x, &e, k);
        worst[0] = worst[0].max(max_diff(&rows_of(g.value(nodes)), &on));
        worst[1] = worst[1].max(max_diff(&rows_of(g.value(edges)), &oe));

        let n_t = rng.gen_range(1..6);
        let heads = rng.gen_range(1..3);
        let config = NcsnConfig { dim: 4 * heads, ffn: rng.gen_range(3..12), heads, blocks: rng.gen_range(1..3) };
        let levels = 3;
        let model = NcsnModel::new(config, n_t, levels, &mut rng)?;
        let hs = channels(count, n_t, k, 900 + seed);
        let level = rng.gen_range(0..levels);
        let scores = model.score(&hs, level)?;
        for (h, s) in hs.iter().zip(&scores) {
            worst[2] = worst[2].max(complex_diff(s, &ncsn_oracle(&model, h, level)));
        }

        let config = DebertConfig {
            dim: 4 * heads,
            ffn: rng.gen_range(3..12),
            heads,
            score_blocks: rng.gen_range(1..3),
            step_hidden: rng.gen_range(2..8),
        };
        let dsn = DebertModel::new(config, n_t, &mut rng)?;
        let delta_e = rng.gen_range(0.0..3.0);
        for (out, h) in dsn.run(&hs, delta_e)?.iter().zip(&hs) {
            let (score, delta, eta, refined) = debert_oracle(&dsn, h, delta_e);
            let mut err = complex_diff(&out.score, &score)
                .max(complex_diff(&out.delta, &delta))
                .max(complex_diff(&out.h_hat, &refined));
            for (a, b) in out.eta.iter().zip(&eta) {
                err = err.max((a.0 - b.0).abs()).max((a.1 - b.1).abs());
            }
            worst[3] = worst[3].max(err);
        }
    }
    Ok(worst)
}

pub const ORACLE_TOL: f64 = 1e-8;

pub fn oracle_equivalence() -> Outcome {
    match oracle_errors(25) {
        Ok(w) => Outcome::new(
            w.iter().all(|&e| e < ORACLE_TOL),
            format!(
                "25 instances: node {:.1e}, edge {:.1e}, score net {:.1e}, denoiser {:.1e}",
                w[0], w[1], w[2], w[3]
            ),
        ),
        Err(e) => Outcome::error(e),
    }
}

/// Relative errors of the trained linear score coefficients against
/// `−1/(σ₀² + δ²_l)` on Gaussian data.
pub fn gaussian_score_errors() -> beamscore::Result<Vec<f64>> {
    let sigma0_sq = 0.5;
    let schedule = ScheduleConfig::default().build()?;
    let data: Vec<ComplexMatrix> = (0..4000)
        .map(|i| complex_normal_matrix(&mut sample_rng(55, i), 8, 4, sigma0_sq))
        .collect();
    let (train, val) = data.split_at(3000);
    let mut rng = ChaCha8Rng::seed_from_u64(56);
    let mut model = LinearScore::new(schedule.levels());
    for lr in [0.02, 0.002] {
        let opts = TrainOptions {
            epochs: 60,
            batch_size: 100,
            dropout: 0.0,
            optimizer: AdamWConfig { lr, weight_decay: 0.0, ..AdamWConfig::default() },
        };
        model = train_ncsn(model, train, val, &schedule, &opts, &mut rng)?.model;
    }
    Ok(model
        .coefficients()
        .iter()
        .zip(&schedule.delta2)
        .map(|(c, d2)| {
            let truth = -1.0 / (sigma0_sq + d2);
            ((c - truth) / truth).abs()
        })
        .collect())
}

pub fn gaussian_score_oracle() -> Outcome {
    let start = Instant::now();
    match gaussian_score_errors() {
        Ok(errs) => {
            let secs = start.elapsed().as_secs_f64();
            let worst = errs.iter().copied().fold(0.0, f64::max);
            Outcome::new(
                worst < 0.02 && secs < 120.0,
                format!("worst relative coefficient error {:.2}% over {} levels; {secs:.1} s", 100.0 * worst, errs.len()),
            )
        }
        Err(e) => Outcome::error(e),
    }
}

/// Langevin chains with score `−H`: worst per-entry `|mean|` and worst
/// relative deviation of the per-entry variance from `1/(1 − ν_L/4)`.
pub fn langevin_moments(chains: usize) -> beamscore::Result<(f64, f64)> {
    let schedule = ScheduleConfig::default().build()?;
    let (n_t, k) = (8, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let out = langevin_sample_batch(
        |states, _| Ok(states.iter().map(|h| h.scale(-1.0)).collect()),
        &schedule,
        chains,
        n_t,
        k,
        &mut rng,
        true,
    )?;
    let nu = schedule.step_size(schedule.levels() - 1);
    let stationary = 1.0 / (1.0 - nu / 4.0);
    let n = chains as f64;
    let (mut worst_mean, mut worst_var) = (0.0_f64, 0.0_f64);
    for t in 0..n_t {
        for c in 0..k {
            let (mr, mi) = out.iter().fold((0.0, 0.0), |(a, b), h| (a + h.get(t, c).0 / n, b + h.get(t, c).1 / n));
            let var = out
                .iter()
                .map(|h| {
                    let (r, i) = h.get(t, c);
                    (r - mr).powi(2) + (i - mi).powi(2)
                })
                .sum::<f64>()
                / (n - 1.0);
            worst_mean = worst_mean.max(mr.hypot(mi));
            worst_var = worst_var.max((var - stationary).abs() / stationary);
        }
    }
    Ok((worst_mean, worst_var))
}

pub fn langevin_moment_check() -> Outcome {
    let start = Instant::now();
    match langevin_moments(2000) {
        Ok((mean, var)) => {
            let secs = start.elapsed().as_secs_f64();
            Outcome::new(
                mean < 0.05 && var < 0.10 && secs < 120.0,
                format!("2000 chains: worst |mean| {mean:.4}, worst variance deviation {:.2}%; {secs:.1} s", 100.0 * var),
            )
        }
        Err(e) => Outcome::error(e),
    }
}

pub fn schedule_arithmetic() -> Outcome {
    match ScheduleConfig::default().build() {
        Ok(s) => {
            let (first, last) = (s.step_size(0), s.step_size(s.levels() - 1));
            Outcome::new(first == 2e-3 && last == 2e-5, format!("nu_1 = {first:e}, nu_L = {last:e}"))
        }
        Err(e) => Outcome::error(e),
    }
}

/// Trains on 2000 single-path channels (K=4, N_T=8) for 50 epochs and
/// returns the HMGAT and PZF test sum rates.
pub fn hmgat_and_pzf_rates() -> beamscore::Result<(f64, f64)> {
    let system = SystemConfig::new(4, 8).with_paths(1).with_seed(7);
    let data = CsiDataset::generate(&system, 2000)?;
    let pzf_rate = evaluate_sum_rates(data.test(), None, system.sigma2, |h| pzf(h, system.p_max))?.mean;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = HmgatModel::new(HmgatConfig::desk(), system.n_t, &mut rng)?;
    let opts = TrainOptions { epochs: 50, ..TrainOptions::default() };
    let run = train_hmgat(model, &data, &opts, &mut rng)?;
    Ok((run.model.mean_sum_rate(data.test(), None, &system)?, pzf_rate))
}

pub fn hmgat_beats_pzf() -> Outcome {
    let start = Instant::now();
    match hmgat_and_pzf_rates() {
        Ok((hmgat, pzf)) => {
            let secs = start.elapsed().as_secs_f64();
            Outcome::new(
                hmgat >= 1.1 * pzf && secs < 900.0,
                format!("HMGAT {hmgat:.4} vs PZF {pzf:.4} bit/s/Hz ({:.3}x); {secs:.1} s", hmgat / pzf),
            )
        }
        Err(e) => Outcome::error(e),
    }
}

pub struct LevelReport {
    pub db: f64,
    pub nre_in: f64,
    pub nre_out: f64,
    pub rate_raw: f64,
    pub rate_denoised: f64,
}

/// Trains the beamformer and the denoiser on the single-path family and
/// evaluates every error level on the test split.
pub fn denoising_reports() -> beamscore::Result<Vec<LevelReport>> {
    let system = SystemConfig::new(4, 8).with_paths(1).with_seed(7);
    let data = CsiDataset::generate(&system, 2000)?;
    let levels: Vec<ErrorLevel> = [-10.0, -5.0, 0.0, 5.0, 10.0].iter().map(|&d| ErrorLevel::from_db(d)).collect();
    let opts = TrainOptions { epochs: 50, ..TrainOptions::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let hmgat = HmgatModel::new(HmgatConfig::desk(), system.n_t, &mut rng)?;
    let hmgat = train_hmgat(hmgat, &data, &opts, &mut rng)?.model;
    let dsn = DebertModel::new(DebertConfig::default(), system.n_t, &mut rng)?;
    let dsn = train_dsn(dsn, data.train(), data.val(), &levels, 1.0, &opts, &mut rng)?.model;

    let mut eval_rng = ChaCha8Rng::seed_from_u64(99);
    let truth = data.test();
    let mut out = Vec::new();
    for level in &levels {
        let noisy: Vec<ComplexMatrix> = truth.iter().map(|h| perturb_csi(h, *level, &mut eval_rng)).collect();
        let refined = dsn.denoise_batch(&noisy, level.std_dev())?;
        out.push(LevelReport {
            db: level.db(),
            nre_in: mean_nre(truth, &noisy),
            nre_out: mean_nre(truth, &refined),
            rate_raw: hmgat.mean_sum_rate(truth, Some(&noisy), &system)?,
            rate_denoised: hmgat.mean_sum_rate(truth, Some(&refined), &system)?,
        });
    }
    Ok(out)
}

pub fn denoising_robustness() -> Outcome {
    let start = Instant::now();
    match denoising_reports() {
        Ok(reports) => {
            let secs = start.elapsed().as_secs_f64();
            let mut pass = secs < 1200.0;
            let mut detail = Vec::new();
            for r in &reports {
                let reduction = 1.0 - r.nre_out / r.nre_in;
                pass &= r.nre_out < r.nre_in && r.rate_denoised >= r.rate_raw;
                if r.db == 0.0 {
                    pass &= reduction >= 0.30;
                }
                detail.push(format!(
                    "{:+.0} dB: NRE {:.3}->{:.3} ({:.0}%), rate {:.3}->{:.3}",
                    r.db,
                    r.nre_in,
                    r.nre_out,
                    100.0 * reduction,
                    r.rate_raw,
                    r.rate_denoised
                ));
            }
            Outcome::new(pass, format!("{}; {secs:.1} s", detail.join("; ")))
        }
        Err(e) => Outcome::error(e),
    }
}

pub struct AugmentReport {
    pub js: [f64; 3],
    pub ks: [f64; 3],
    pub rate_original: f64,
    pub rate_augmented: f64,
}

/// Trains the score network on 1000 single-path channels, samples 1000 more
/// and retrains the beamformer on the enlarged set.
pub fn augmentation_report(ncsn_epochs: usize) -> beamscore::Result<AugmentReport> {
    let system = SystemConfig::new(4, 8).with_paths(1).with_seed(3);
    let data = CsiDataset::generate(&system, 1250)?;
    let schedule = ScheduleConfig::default().build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = NcsnModel::new(NcsnConfig::default(), system.n_t, schedule.levels(), &mut rng)?;
    let opts = TrainOptions { epochs: ncsn_epochs, ..TrainOptions::default() };
    let score = train_ncsn(model, data.train(), data.val(), &schedule, &opts, &mut rng)?.model;
    let generated = generate(&score, &schedule, 1000, system.n_t, system.k, 256, &mut rng)?;

    let (mut js, mut ks) = ([0.0; 3], [0.0; 3]);
    for (i, which) in [Component::Real, Component::Imag, Component::Magnitude].into_iter().enumerate() {
        let a = component_values(data.train(), which);
        let b = component_values(&generated, which);
        js[i] = js_divergence(&a, &b, 50)?;
        ks[i] = ks_statistic(&a, &b)?;
    }
    let hopts = TrainOptions { epochs: 50, ..TrainOptions::default() };
    let mut rates = Vec::new();
    for set in [data.clone(), data.augment_train(&generated)?] {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = HmgatModel::new(HmgatConfig::desk(), system.n_t, &mut rng)?;
        let run = train_hmgat(m, &set, &hopts, &mut rng)?;
        rates.push(run.model.mean_sum_rate(set.test(), None, &system)?);
    }
    Ok(AugmentReport { js, ks, rate_original: rates[0], rate_augmented: rates[1] })
}

pub fn augmentation_sanity() -> Outcome {
    let start = Instant::now();
    match augmentation_report(20) {
        Ok(r) => Outcome::new(
            r.js[2] < 0.1,
            format!(
                "JS re/im/mag {:.4}/{:.4}/{:.4}, KS {:.4}/{:.4}/{:.4}; HMGAT rate {:.4} -> {:.4} (delta {:+.4}); {:.1} s",
                r.js[0],
                r.js[1],
                r.js[2],
                r.ks[0],
                r.ks[1],
                r.ks[2],
                r.rate_original,
                r.rate_augmented,
                r.rate_augmented - r.rate_original,
                start.elapsed().as_secs_f64()
            ),
        ),
        Err(e) => Outcome::error(e),
    }
}

fn brute_force_ks(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter().chain(b).map(|&x| (cdf(a, x) - cdf(b, x)).abs()).fold(0.0, f64::max)
}

/// Every listed metric example; returns the descriptions of failures.
pub fn metric_failures() -> Vec<String> {
    let mut fails = Vec::new();
    let mut expect = |name: &str, ok: bool| {
        if !ok {
            fails.push(name.to_string());
        }
    };
    let h = ComplexMatrix::from_pairs(2, 2, &[(1.0, -2.0), (0.5, 0.0), (-3.0, 1.5), (0.0, 0.25)]).unwrap();
    expect("nre identity", nre(&h, &h).ok() == Some(0.0));
    expect("nre zero estimate", nre(&h, &ComplexMatrix::zeros(2, 2)).ok() == Some(1.0));
    expect("nre doubled", nre(&h, &h.scale(2.0)).ok() == Some(1.0));
    expect("nre zero reference", nre(&ComplexMatrix::zeros(2, 2), &h).is_err());

    let a = [0.3, -1.2, 4.0, 2.5, 0.0];
    expect("js identical", js_divergence(&a, &a, 50).ok() == Some(0.0));
    expect("js disjoint", js_divergence(&[0.0, 0.1, 0.2], &[5.0, 5.5], 50).ok() == Some(1.0));
    let (p, q, m) = ([0.5, 0.5], [0.25, 0.75], [0.375, 0.625]);
    let kl = |x: &[f64; 2]| x.iter().zip(&m).map(|(a, b)| a * (a / b).log2()).sum::<f64>();
    let closed = 0.5 * kl(&p) + 0.5 * kl(&q);
    let js = js_divergence(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 1.0, 1.0], 2).unwrap_or(f64::NAN);
    expect("js two-bin closed form", (js - closed).abs() < 1e-15);
    expect("js empty", js_divergence(&[], &a, 50).is_err());

    expect("ks identical", ks_statistic(&a, &a).ok() == Some(0.0));
    expect("ks separated", ks_statistic(&[0.0, 1.0], &[2.0, 3.0]).ok() == Some(1.0));
    expect("ks step enumeration", ks_statistic(&[0.0, 1.0], &[0.5, 1.5]).ok() == Some(0.5));
    expect("ks empty", ks_statistic(&a, &[]).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let (n, m) = (rng.gen_range(1..=100), rng.gen_range(1..=100));
        // coarse grid so ties occur
        let x: Vec<f64> = (0..n).map(|_| (rng.gen_range(-20..20) as f64) / 4.0).collect();
        let y: Vec<f64> = (0..m).map(|_| (rng.gen_range(-20..20) as f64) / 4.0).collect();
        let fast = ks_statistic(&x, &y).unwrap();
        if fast != brute_force_ks(&x, &y) {
            expect("ks brute force", false);
            break;
        }
    }

    let hs = channels(20, 8, 4, 88);
    let sigma2 = 1.0;
    let direct: Vec<f64> = hs.iter().map(|h| sum_rate(h, &pzf(h, 1.0).unwrap(), sigma2).unwrap()).collect();
    let summary = evaluate_sum_rates(&hs, None, sigma2, |h| pzf(h, 1.0)).unwrap();
    expect("pzf summary matches direct", summary.per_sample == direct);
    let single = evaluate_sum_rates(&hs[..1], None, sigma2, |h| pzf(h, 1.0)).unwrap();
    expect("single sample mean", single.mean == direct[0]);
    let reversed: Vec<ComplexMatrix> = hs.iter().rev().cloned().collect();
    let rev = evaluate_sum_rates(&reversed, None, sigma2, |h| pzf(h, 1.0)).unwrap();
    expect("order invariance", (rev.mean - summary.mean).abs() < 1e-12);
    fails
}

pub fn metrics_suite() -> Outcome {
    let fails = metric_failures();
    Outcome::new(
        fails.is_empty(),
        if fails.is_empty() { "all examples and brute-force KS agree".to_string() } else { fails.join(", ") },
    )
}
