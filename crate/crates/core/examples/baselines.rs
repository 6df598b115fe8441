//! Classical precoders on synthetic channels: phase zero-forcing and
//! equal-power random phases, plus the exhaustive grid search on a 2×2
//! system as a reference point.
//!
//! cargo run --release --example baselines -- [samples]

use beamscore::baselines::{equal_power_random, pzf, tiny_grid_oracle};
use beamscore::channel::{CsiDataset, SystemConfig};
use beamscore::metrics::evaluate_sum_rates;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> beamscore::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    for paths in [1, 10] {
        let system = SystemConfig::new(4, 8).with_paths(paths).with_seed(1);
        let data = CsiDataset::generate(&system, samples)?;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let zf = evaluate_sum_rates(&data.samples, None, system.sigma2, |h| pzf(h, system.p_max))?;
        let rnd = evaluate_sum_rates(&data.samples, None, system.sigma2, |h| {
            equal_power_random(h, system.p_max, &mut rng)
        })?;
        println!("K=4 N_T=8 paths={paths:>2}: PZF {:.4}, random phases {:.4} bit/s/Hz", zf.mean, rnd.mean);
    }

    let system = SystemConfig::new(2, 2).with_seed(4);
    let data = CsiDataset::generate(&system, 20)?;
    let zf = evaluate_sum_rates(&data.samples, None, system.sigma2, |h| pzf(h, system.p_max))?;
    let grid: f64 = data
        .samples
        .iter()
        .map(|h| tiny_grid_oracle(h, system.p_max, system.sigma2, 3, 8))
        .sum::<beamscore::Result<f64>>()?
        / data.len() as f64;
    println!("K=2 N_T=2: PZF {:.4}, grid search (3 phase bits, 9 power splits) {grid:.4} bit/s/Hz", zf.mean);
    Ok(())
}
