use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::ncsn::loss::{ncsn_loss, ncsn_loss_and_grad, Perturbations};
use crate::ncsn::model::ScoreModel;
use crate::ncsn::schedule::NoiseSchedule;
use crate::nn::DropoutCtx;
use crate::numerics::{AdamW, ComplexMatrix};
use crate::train::{ensure_finite, minibatches, EpochRecord, Trace, TrainOptions};

/// Fixed seed for validation perturbations, so validation losses are
/// comparable across epochs.
const VALIDATION_SEED: u64 = 0x5eed_0f_7a1;

pub struct ScoreRun<M> {
    pub model: M,
    pub trace: Trace,
}

/// Denoising score-matching training keeping the best-validation parameters.
/// With an empty validation set the training loss is used instead.
pub fn train_ncsn<M: ScoreModel + Clone>(
    mut model: M,
    train: &[ComplexMatrix],
    val: &[ComplexMatrix],
    schedule: &NoiseSchedule,
    opts: &TrainOptions,
    rng: &mut ChaCha8Rng,
) -> Result<ScoreRun<M>> {
    opts.validate()?;
    schedule.validate()?;
    let mut opt = AdamW::new(opts.optimizer, model.store());
    let mut trace = Trace::new("val_loss");
    let mut best: Option<(f64, M)> = None;
    for epoch in 1..=opts.epochs {
        let mut total = 0.0;
        for idx in minibatches(train.len(), opts.batch_size, rng) {
            let batch: Vec<ComplexMatrix> = idx.iter().map(|&i| train[i].clone()).collect();
            let noise = Perturbations::draw(&batch, schedule, rng);
            let mut drop = DropoutCtx { rng: &mut *rng, rate: opts.dropout };
            let (loss, grads) = ncsn_loss_and_grad(&model, &batch, &noise, schedule, Some(&mut drop))?;
            total += ensure_finite("score-matching loss", epoch, loss)? * batch.len() as f64;
            opt.step(model.store_mut(), &grads)?;
        }
        let train_loss = total / train.len().max(1) as f64;
        let val_loss = if val.is_empty() {
            train_loss
        } else {
            ncsn_loss(&model, val, schedule, &mut ChaCha8Rng::seed_from_u64(VALIDATION_SEED))?
        };
        ensure_finite("validation loss", epoch, val_loss)?;
        log::info!("ncsn epoch {epoch}: train loss {train_loss:.5}, val loss {val_loss:.5}");
        trace.records.push(EpochRecord { epoch, train_loss, val_metric: val_loss });
        if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
            best = Some((val_loss, model.clone()));
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok(ScoreRun { model, trace })
}
