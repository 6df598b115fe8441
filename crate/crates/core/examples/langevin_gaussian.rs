//! Annealed Langevin dynamics with the exact score of a complex Gaussian,
//! compared with the stationary variance of the discretized chain.
//!
//! cargo run --release --example langevin_gaussian -- [chains] [variance]

use beamscore::ncsn::{langevin_sample_batch, ScheduleConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> beamscore::Result<()> {
    let chains: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let var: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let schedule = ScheduleConfig::default().build()?;
    let (n_t, k) = (8, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let out = langevin_sample_batch(
        |states, _| Ok(states.iter().map(|h| h.scale(-1.0 / var)).collect()),
        &schedule,
        chains,
        n_t,
        k,
        &mut rng,
        true,
    )?;
    let n = (chains * n_t * k) as f64;
    let pairs: Vec<(f64, f64)> = out.iter().flat_map(|h| h.to_pairs()).collect();
    let mean = pairs.iter().fold((0.0, 0.0), |(a, b), (r, i)| (a + r / n, b + i / n));
    let power = pairs.iter().map(|(r, i)| r * r + i * i).sum::<f64>() / n;
    let nu = schedule.step_size(schedule.levels() - 1);
    let a = 1.0 - nu / (2.0 * var);
    let stationary = nu / (1.0 - a * a);
    println!("levels {}, steps {}, nu_1 {:e}, nu_L {nu:e}", schedule.levels(), schedule.steps, schedule.step_size(0));
    println!("sample mean ({:+.4}, {:+.4})", mean.0, mean.1);
    println!("sample power {power:.4}; target variance {var}, discretized stationary {stationary:.4}");
    Ok(())
}
