//! Trains the graph-attention beamformer on synthetic channels and compares
//! its test sum rate with phase zero-forcing.
//!
//! cargo run --release --example hmgat_vs_pzf -- [samples] [epochs] [paths]

use std::time::Instant;

use beamscore::baselines::pzf;
use beamscore::channel::{CsiDataset, SystemConfig};
use beamscore::hmgat::{train_hmgat, HmgatConfig, HmgatModel};
use beamscore::metrics::evaluate_sum_rates;
use beamscore::train::TrainOptions;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> beamscore::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (samples, epochs, paths) = (arg(1, 2000), arg(2, 50), arg(3, 1));
    let system = SystemConfig::new(4, 8).with_paths(paths).with_seed(7);
    let data = CsiDataset::generate(&system, samples)?;

    let pzf_rate = evaluate_sum_rates(data.test(), None, system.sigma2, |h| pzf(h, system.p_max))?.mean;
    println!("PZF test sum rate: {pzf_rate:.4} bit/s/Hz");

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = HmgatModel::new(HmgatConfig::desk(), system.n_t, &mut rng)?;
    let opts = TrainOptions { epochs, ..TrainOptions::default() };
    let start = Instant::now();
    let run = train_hmgat(model, &data, &opts, &mut rng)?;
    let rate = run.model.mean_sum_rate(data.test(), None, &system)?;
    println!("HMGAT test sum rate: {rate:.4} bit/s/Hz ({:.2}x PZF)", rate / pzf_rate);
    println!("training took {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
