//! Training loop plumbing shared by the three networks.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::AdamWConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub optimizer: AdamWConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            dropout: 0.1,
            optimizer: AdamWConfig::default(),
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
}

/// Per-epoch losses plus the name of the validation column.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trace {
    pub metric: &'static str,
    pub records: Vec<EpochRecord>,
}

impl Trace {
    pub fn new(metric: &'static str) -> Self {
        Self { metric, records: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("epoch,train_loss,{}\n", self.metric);
        for r in &self.records {
            let _ = writeln!(out, "{},{},{}", r.epoch, r.train_loss, r.val_metric);
        }
        out
    }
}

/// Shuffled index chunks of at most `batch` items.
pub fn minibatches(n: usize, batch: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch.max(1)).map(<[usize]>::to_vec).collect()
}

pub(crate) fn ensure_finite(what: &str, epoch: usize, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Divergence(format!("{what} became {value} in epoch {epoch}")))
    }
}
