//! Maps arbitrary decoder outputs to feasible hybrid precoders and reports
//! how close each constraint is to being violated.
//!
//! cargo run --release --example constrained_output -- [trials]

use beamscore::hmgat::{constrain_outputs, RawOutputs};
use beamscore::numerics::ComplexMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> ComplexMatrix {
    let pairs: Vec<(f64, f64)> =
        (0..rows * cols).map(|_| (rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale)).collect();
    ComplexMatrix::from_pairs(rows, cols, &pairs).expect("matching size")
}

fn main() -> beamscore::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let (n_t, k, p_max) = (8, 4, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut modulus, mut power, mut norm) = (0.0_f64, f64::NEG_INFINITY, 0.0_f64);
    let mut guarded = 0;
    for _ in 0..trials {
        let scale = 10f64.powf(rng.gen_range(-8.0..8.0));
        let mut p_rf = random_matrix(&mut rng, n_t, k, scale);
        if rng.gen_bool(0.1) {
            p_rf.set(rng.gen_range(0..n_t), rng.gen_range(0..k), (0.0, 0.0));
        }
        let raw = RawOutputs {
            p_rf,
            p_bb: random_matrix(&mut rng, k, k, scale),
            beta: (0..k).map(|_| rng.gen_range(-20.0..20.0)).collect(),
        };
        let (sol, report) = constrain_outputs(&raw, p_max)?;
        sol.check_feasible(p_max)?;
        guarded += report.guarded_entries;
        for (re, im) in sol.p_rf.to_pairs() {
            modulus = modulus.max((re.hypot(im) * (n_t as f64).sqrt() - 1.0).abs());
        }
        power = power.max(sol.beta.iter().sum::<f64>() - p_max);
        let eff = sol.effective()?;
        for c in 0..k {
            let n: f64 = eff.column(c).iter().map(|(r, i)| r * r + i * i).sum::<f64>().sqrt();
            norm = norm.max((n - 1.0).abs());
        }
    }
    println!("{trials} random outputs, all feasible");
    println!("worst relative modulus error  {modulus:.2e}");
    println!("worst power excess            {power:.2e}");
    println!("worst effective norm error    {norm:.2e}");
    println!("zero analog entries guarded   {guarded}");
    Ok(())
}
