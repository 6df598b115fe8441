use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::config::{ErrorLevel, SystemConfig};
use crate::numerics::ComplexMatrix;

/// Independent RNG stream for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draw from CN(0, var): real and imaginary parts each N(0, var/2).
pub fn complex_normal(rng: &mut impl Rng, var: f64) -> (f64, f64) {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    (s * re, s * im)
}

/// Matrix with i.i.d. CN(0, var) entries.
pub fn complex_normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize, var: f64) -> ComplexMatrix {
    let pairs: Vec<(f64, f64)> = (0..rows * cols).map(|_| complex_normal(rng, var)).collect();
    ComplexMatrix::from_pairs(rows, cols, &pairs).expect("consistent dimensions")
}

/// Half-wavelength ULA response `a(θ)_t = exp(jπ t sin θ)`, `t = 0..n_t`.
pub fn steering_vector(n_t: usize, theta: f64) -> Vec<(f64, f64)> {
    let phase = std::f64::consts::PI * theta.sin();
    (0..n_t)
        .map(|t| {
            let a = phase * t as f64;
            (a.cos(), a.sin())
        })
        .collect()
}

/// Channel of one user from explicit `(gain, angle)` paths, scaled by
/// `1/√P`.
pub fn user_channel(n_t: usize, paths: &[((f64, f64), f64)]) -> Vec<(f64, f64)> {
    let norm = 1.0 / (paths.len() as f64).sqrt();
    let mut h = vec![(0.0, 0.0); n_t];
    for &((ar, ai), theta) in paths {
        for (t, (sr, si)) in steering_vector(n_t, theta).into_iter().enumerate() {
            h[t].0 += norm * (ar * sr - ai * si);
            h[t].1 += norm * (ar * si + ai * sr);
        }
    }
    h
}

/// Synthetic geometric multipath channel `H ∈ C^{N_T×K}`.
///
/// Each user column sums `P` paths with CN(0,1) gains and angles uniform on
/// `[−π/2, π/2]`, giving unit average power per entry.
pub fn synth_channel(config: &SystemConfig, rng: &mut impl Rng) -> ComplexMatrix {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut h = ComplexMatrix::zeros(config.n_t, config.k);
    for k in 0..config.k {
        let paths: Vec<((f64, f64), f64)> = (0..config.paths)
            .map(|_| {
                let gain = complex_normal(rng, 1.0);
                let theta = rng.gen_range(-half_pi..=half_pi);
                (gain, theta)
            })
            .collect();
        for (t, v) in user_channel(config.n_t, &paths).into_iter().enumerate() {
            h.set(t, k, v);
        }
    }
    h
}

/// Imperfect observation `H̃ = H + E`, `E` i.i.d. CN(0, δ²_E).
pub fn perturb_csi(h: &ComplexMatrix, level: ErrorLevel, rng: &mut impl Rng) -> ComplexMatrix {
    if level.delta2_e == 0.0 {
        return h.clone();
    }
    let e = complex_normal_matrix(rng, h.rows(), h.cols(), level.delta2_e);
    h.add(&e).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::nre;

    #[test]
    fn single_broadside_path_is_all_ones() {
        let h = user_channel(5, &[((1.0, 0.0), 0.0)]);
        assert!(h.iter().all(|&(r, i)| r == 1.0 && i == 0.0));
    }

    #[test]
    fn steering_vector_norm() {
        for &theta in &[-1.2, -0.3, 0.0, 0.77, 1.5] {
            let a = steering_vector(16, theta);
            let n: f64 = a.iter().map(|(r, i)| r * r + i * i).sum();
            assert!((n - 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn average_user_power_is_n_t() {
        let cfg = SystemConfig::new(1, 8);
        let mut rng = sample_rng(1, 0);
        let draws = 10_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let h = synth_channel(&cfg, &mut rng);
            acc += h.frobenius_norm().powi(2);
        }
        let mean = acc / draws as f64;
        assert!((mean / 8.0 - 1.0).abs() < 0.05, "mean power {mean}");
    }

    #[test]
    fn reproducible_from_seed() {
        let cfg = SystemConfig::new(3, 6);
        let a = synth_channel(&cfg, &mut sample_rng(9, 4));
        let b = synth_channel(&cfg, &mut sample_rng(9, 4));
        let c = synth_channel(&cfg, &mut sample_rng(9, 5));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_error_is_identity() {
        let cfg = SystemConfig::new(2, 4);
        let mut rng = sample_rng(2, 0);
        let h = synth_channel(&cfg, &mut rng);
        assert_eq!(perturb_csi(&h, ErrorLevel::new(0.0).unwrap(), &mut rng), h);
    }

    #[test]
    fn positive_error_always_changes_the_channel() {
        let cfg = SystemConfig::new(2, 4);
        let mut rng = sample_rng(3, 0);
        let h = synth_channel(&cfg, &mut rng);
        for _ in 0..100 {
            assert_ne!(perturb_csi(&h, ErrorLevel::new(1e-6).unwrap(), &mut rng), h);
        }
    }

    #[test]
    fn error_entry_variance() {
        let level = ErrorLevel::from_db(-5.0);
        let h = ComplexMatrix::zeros(1, 1);
        let mut rng = sample_rng(4, 0);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let (r, i) = perturb_csi(&h, level, &mut rng).get(0, 0);
            acc += r * r + i * i;
        }
        let var = acc / n as f64;
        assert!((var / level.delta2_e - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn expected_squared_nre() {
        // E[NRE²] = δ²_E N_T K / ‖H‖²_F for a fixed H.
        let cfg = SystemConfig::new(2, 4);
        let mut rng = sample_rng(5, 0);
        let h = synth_channel(&cfg, &mut rng);
        let level = ErrorLevel::new(0.3).unwrap();
        let n = 20_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let noisy = perturb_csi(&h, level, &mut rng);
            acc += nre(&h, &noisy).unwrap().powi(2);
        }
        let expected = 0.3 * 8.0 / h.frobenius_norm().powi(2);
        assert!((acc / n as f64 / expected - 1.0).abs() < 0.03);
    }
}
