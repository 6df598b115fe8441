use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{perturb_csi, ErrorLevel};
use crate::dsn::loss::{dsn_batch_loss, dsn_loss_and_grad, DenoiseExample};
use crate::dsn::model::DebertModel;
use crate::error::{Error, Result};
use crate::nn::DropoutCtx;
use crate::numerics::{AdamW, ComplexMatrix};
use crate::train::{ensure_finite, minibatches, EpochRecord, Trace, TrainOptions};

const VALIDATION_SEED: u64 = 0xde_b0_57;

pub struct DenoiserRun {
    pub model: DebertModel,
    pub trace: Trace,
}

/// Pairs every channel with a perturbed copy at `level`.
pub fn perturbed_examples(
    clean: &[ComplexMatrix],
    level: ErrorLevel,
    rng: &mut ChaCha8Rng,
) -> Vec<DenoiseExample> {
    clean
        .iter()
        .map(|h| DenoiseExample { clean: h.clone(), noisy: perturb_csi(h, level, rng), delta2_e: level.delta2_e })
        .collect()
}

/// Mean validation loss over every level with fixed perturbations.
pub fn validation_loss(model: &DebertModel, val: &[ComplexMatrix], levels: &[ErrorLevel], lambda: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
    let mut total = 0.0;
    for &level in levels {
        for chunk in val.chunks(256) {
            let batch = perturbed_examples(chunk, level, &mut rng);
            total += dsn_batch_loss(model, &batch, lambda)? * chunk.len() as f64;
        }
    }
    Ok(total / (val.len() * levels.len()) as f64)
}

/// Multi-task training. Every step draws one error level uniformly from
/// `levels` and perturbs the minibatch at that level. Keeps the
/// best-validation parameters; without validation data the training loss
/// decides.
pub fn train_dsn(
    mut model: DebertModel,
    train: &[ComplexMatrix],
    val: &[ComplexMatrix],
    levels: &[ErrorLevel],
    lambda: f64,
    opts: &TrainOptions,
    rng: &mut ChaCha8Rng,
) -> Result<DenoiserRun> {
    opts.validate()?;
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no error levels configured".into()));
    }
    if let Some(l) = levels.iter().find(|l| !(l.delta2_e > 0.0)) {
        return Err(Error::InvalidArgument(format!("error variance {} must be positive", l.delta2_e)));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} must be nonnegative")));
    }
    let mut opt = AdamW::new(opts.optimizer, &model.store);
    let mut trace = Trace::new("val_loss");
    let mut best: Option<(f64, DebertModel)> = None;
    for epoch in 1..=opts.epochs {
        let mut total = 0.0;
        for idx in minibatches(train.len(), opts.batch_size, rng) {
            let level = *levels.choose(rng).expect("nonempty");
            let clean: Vec<ComplexMatrix> = idx.iter().map(|&i| train[i].clone()).collect();
            let batch = perturbed_examples(&clean, level, rng);
            let mut drop = DropoutCtx { rng: &mut *rng, rate: opts.dropout };
            let (loss, grads) = dsn_loss_and_grad(&model, &batch, lambda, Some(&mut drop))?;
            total += ensure_finite("denoising loss", epoch, loss)? * batch.len() as f64;
            opt.step(&mut model.store, &grads)?;
        }
        let train_loss = total / train.len().max(1) as f64;
        let val_loss = if val.is_empty() {
            train_loss
        } else {
            validation_loss(&model, val, levels, lambda)?
        };
        ensure_finite("validation loss", epoch, val_loss)?;
        log::info!("dsn epoch {epoch}: train loss {train_loss:.5}, val loss {val_loss:.5}");
        trace.records.push(EpochRecord { epoch, train_loss, val_metric: val_loss });
        if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
            best = Some((val_loss, model.clone()));
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok(DenoiserRun { model, trace })
}
