//! Trains the denoising score network over a sweep of error levels, then
//! reports reconstruction error and beamforming sum rate with and without
//! denoising.
//!
//! cargo run --release --example denoise_robustness -- [samples] [epochs] [paths]

use std::time::Instant;

use beamscore::channel::{perturb_csi, CsiDataset, ErrorLevel, SystemConfig};
use beamscore::dsn::{train_dsn, DebertConfig, DebertModel};
use beamscore::hmgat::{train_hmgat, HmgatConfig, HmgatModel};
use beamscore::metrics::nre;
use beamscore::numerics::ComplexMatrix;
use beamscore::train::TrainOptions;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn mean_nre(truth: &[ComplexMatrix], est: &[ComplexMatrix]) -> f64 {
    truth.iter().zip(est).map(|(h, e)| nre(h, e).unwrap()).sum::<f64>() / truth.len() as f64
}

fn main() -> beamscore::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (samples, epochs, paths) = (arg(1, 2000), arg(2, 50), arg(3, 1));
    let system = SystemConfig::new(4, 8).with_paths(paths).with_seed(7);
    let data = CsiDataset::generate(&system, samples)?;
    let levels: Vec<ErrorLevel> = [-10.0, -5.0, 0.0, 5.0, 10.0].iter().map(|&d| ErrorLevel::from_db(d)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let hmgat = HmgatModel::new(HmgatConfig::desk(), system.n_t, &mut rng)?;
    let hmgat = train_hmgat(hmgat, &data, &TrainOptions { epochs, ..TrainOptions::default() }, &mut rng)?.model;

    let start = Instant::now();
    let dsn = DebertModel::new(DebertConfig::default(), system.n_t, &mut rng)?;
    let opts = TrainOptions { epochs, ..TrainOptions::default() };
    let dsn = train_dsn(dsn, data.train(), data.val(), &levels, 1.0, &opts, &mut rng)?.model;
    println!("denoiser training took {:.1} s", start.elapsed().as_secs_f64());

    println!("{:>6} {:>9} {:>9} {:>10} {:>10}", "dB", "NRE in", "NRE out", "rate raw", "rate den");
    let mut eval_rng = ChaCha8Rng::seed_from_u64(99);
    for level in &levels {
        let truth = data.test();
        let noisy: Vec<ComplexMatrix> = truth.iter().map(|h| perturb_csi(h, *level, &mut eval_rng)).collect();
        let refined = dsn.denoise_batch(&noisy, level.std_dev())?;
        println!(
            "{:>6.1} {:>9.4} {:>9.4} {:>10.4} {:>10.4}",
            level.db(),
            mean_nre(truth, &noisy),
            mean_nre(truth, &refined),
            hmgat.mean_sum_rate(truth, Some(&noisy), &system)?,
            hmgat.mean_sum_rate(truth, Some(&refined), &system)?,
        );
    }
    Ok(())
}
