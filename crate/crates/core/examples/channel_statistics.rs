//! Synthetic channel families and the distribution metrics: component JS
//! divergence and KS statistic between families, and the NRE of imperfect
//! CSI at each error level.
//!
//! cargo run --release --example channel_statistics -- [samples]

use beamscore::channel::{perturb_csi, CsiDataset, ErrorLevel, SystemConfig};
use beamscore::metrics::{component_values, js_divergence, ks_statistic, nre, Component};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> beamscore::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let family = |paths: usize, seed: u64| CsiDataset::generate(&SystemConfig::new(4, 8).with_paths(paths).with_seed(seed), samples);
    let a = family(1, 1)?;
    let b = family(1, 2)?;
    let c = family(10, 3)?;
    println!("{:>10} {:>16} {:>16}", "component", "1 vs 1 path", "1 vs 10 paths");
    for (name, which) in [("real", Component::Real), ("imag", Component::Imag), ("magnitude", Component::Magnitude)] {
        let (x, y, z) = (component_values(&a.samples, which), component_values(&b.samples, which), component_values(&c.samples, which));
        println!(
            "{name:>10} JS {:.4} KS {:.3}  JS {:.4} KS {:.3}",
            js_divergence(&x, &y, 50)?,
            ks_statistic(&x, &y)?,
            js_divergence(&x, &z, 50)?,
            ks_statistic(&x, &z)?
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    println!("\n{:>6} {:>10} {:>12}", "dB", "mean NRE", "sqrt(d2_E)");
    for db in [-10.0, -5.0, 0.0, 5.0, 10.0] {
        let level = ErrorLevel::from_db(db);
        let total: f64 = a
            .samples
            .iter()
            .map(|h| nre(h, &perturb_csi(h, level, &mut rng)))
            .sum::<beamscore::Result<f64>>()?;
        println!("{db:>6.1} {:>10.4} {:>12.4}", total / a.len() as f64, level.std_dev());
    }
    Ok(())
}
