//! Learns the CSI distribution with the noise-conditional score network,
//! samples new channels by annealed Langevin dynamics, compares their
//! component distributions with the training data and measures the effect
//! of augmenting the beamformer's training set.
//!
//! cargo run --release --example generate_augment -- [ncsn epochs] [hmgat epochs] [generated]

use std::time::Instant;

use beamscore::channel::{CsiDataset, SystemConfig};
use beamscore::hmgat::{train_hmgat, HmgatConfig, HmgatModel};
use beamscore::metrics::{component_values, js_divergence, ks_statistic, Component};
use beamscore::ncsn::{generate, train_ncsn, NcsnConfig, NcsnModel, ScheduleConfig};
use beamscore::train::TrainOptions;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> beamscore::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (ncsn_epochs, hmgat_epochs, count) = (arg(1, 20), arg(2, 50), arg(3, 1000));
    let system = SystemConfig::new(4, 8).with_paths(1).with_seed(3);
    // 1250 samples split 8:1:1 leave 1000 for training
    let data = CsiDataset::generate(&system, 1250)?;
    let schedule = ScheduleConfig::default().build()?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = Instant::now();
    let model = NcsnModel::new(NcsnConfig::default(), system.n_t, schedule.levels(), &mut rng)?;
    let opts = TrainOptions { epochs: ncsn_epochs, ..TrainOptions::default() };
    let score = train_ncsn(model, data.train(), data.val(), &schedule, &opts, &mut rng)?.model;
    println!("score network training took {:.1} s", start.elapsed().as_secs_f64());

    let start = Instant::now();
    let generated = generate(&score, &schedule, count, system.n_t, system.k, 256, &mut rng)?;
    println!("sampling {count} channels took {:.1} s", start.elapsed().as_secs_f64());

    for (name, which) in [("real", Component::Real), ("imag", Component::Imag), ("magnitude", Component::Magnitude)] {
        let a = component_values(data.train(), which);
        let b = component_values(&generated, which);
        println!("{name:>9}: JS {:.4}  KS {:.4}", js_divergence(&a, &b, 50)?, ks_statistic(&a, &b)?);
    }

    let hopts = TrainOptions { epochs: hmgat_epochs, ..TrainOptions::default() };
    let mut rates = Vec::new();
    for set in [data.clone(), data.augment_train(&generated)?] {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = HmgatModel::new(HmgatConfig::desk(), system.n_t, &mut rng)?;
        let run = train_hmgat(m, &set, &hopts, &mut rng)?;
        rates.push(run.model.mean_sum_rate(set.test(), None, &system)?);
    }
    println!(
        "HMGAT test sum rate: {:.4} original, {:.4} augmented (delta {:+.4})",
        rates[0],
        rates[1],
        rates[1] - rates[0]
    );
    Ok(())
}
