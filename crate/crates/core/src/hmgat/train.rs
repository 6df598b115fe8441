use rand_chacha::ChaCha8Rng;

use crate::channel::{CsiDataset, SystemConfig};
use crate::error::Result;
use crate::hmgat::graph::GraphBatch;
use crate::hmgat::model::HmgatModel;
use crate::nn::DropoutCtx;
use crate::numerics::{AdamW, ComplexMatrix, Graph};
use crate::train::{ensure_finite, minibatches, EpochRecord, Trace, TrainOptions};

pub struct HmgatRun {
    pub model: HmgatModel,
    pub trace: Trace,
}

/// One optimizer step on a minibatch; returns the batch loss.
pub fn hmgat_step(
    model: &mut HmgatModel,
    opt: &mut AdamW,
    batch: &[ComplexMatrix],
    system: &SystemConfig,
    dropout: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let graphs = GraphBatch::new(batch)?;
    let mut g = Graph::new();
    let p = g.bind(&model.store);
    let mut drop = DropoutCtx { rng, rate: dropout };
    let loss = model.loss(&mut g, &p, &graphs, &graphs, system, Some(&mut drop))?;
    let value = g.value(loss).item()?;
    let grads = g.backward(loss)?.for_params(&p);
    opt.step(&mut model.store, &grads)?;
    Ok(value)
}

/// Unsupervised sum-rate training on the training split, keeping the
/// parameters with the best validation sum rate.
pub fn train_hmgat(
    mut model: HmgatModel,
    data: &CsiDataset,
    opts: &TrainOptions,
    rng: &mut ChaCha8Rng,
) -> Result<HmgatRun> {
    opts.validate()?;
    let system = &data.config;
    let mut trace = Trace::new("val_sum_rate");
    let mut opt = AdamW::new(opts.optimizer, &model.store);
    let mut best: Option<(f64, crate::numerics::ParamStore)> = None;
    let train = data.train();
    for epoch in 1..=opts.epochs {
        let mut total = 0.0;
        let batches = minibatches(train.len(), opts.batch_size, rng);
        for idx in &batches {
            let batch: Vec<ComplexMatrix> = idx.iter().map(|&i| train[i].clone()).collect();
            let loss = hmgat_step(&mut model, &mut opt, &batch, system, opts.dropout, rng)?;
            total += ensure_finite("HMGAT loss", epoch, loss)? * batch.len() as f64;
        }
        let train_loss = total / train.len().max(1) as f64;
        let val = if data.val().is_empty() {
            -train_loss
        } else {
            model.mean_sum_rate(data.val(), None, system)?
        };
        ensure_finite("validation sum rate", epoch, val)?;
        log::info!("hmgat epoch {epoch}: train loss {train_loss:.4}, val sum rate {val:.4}");
        trace.records.push(EpochRecord { epoch, train_loss, val_metric: val });
        if best.as_ref().map_or(true, |(b, _)| val > *b) {
            best = Some((val, model.store.clone()));
        }
    }
    if let Some((_, store)) = best {
        model.store = store;
    }
    Ok(HmgatRun { model, trace })
}
