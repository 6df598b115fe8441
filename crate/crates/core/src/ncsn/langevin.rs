use rand::Rng;

use crate::channel::complex_normal_matrix;
use crate::error::{Error, Result};
use crate::ncsn::model::ScoreModel;
use crate::ncsn::schedule::NoiseSchedule;
use crate::numerics::ComplexMatrix;

/// Annealed Langevin dynamics over `count` independent chains of shape
/// `n_t × k`, each started from CN(0, I) and warm-started across levels.
///
/// `score_fn(states, level)` returns the score of every chain at a 0-based
/// level. With `inject_noise = false` the `√ν Z` term is dropped.
pub fn langevin_sample_batch(
    mut score_fn: impl FnMut(&[ComplexMatrix], usize) -> Result<Vec<ComplexMatrix>>,
    schedule: &NoiseSchedule,
    count: usize,
    n_t: usize,
    k: usize,
    rng: &mut impl Rng,
    inject_noise: bool,
) -> Result<Vec<ComplexMatrix>> {
    schedule.validate()?;
    let mut states: Vec<ComplexMatrix> = (0..count).map(|_| complex_normal_matrix(rng, n_t, k, 1.0)).collect();
    if count == 0 {
        return Ok(states);
    }
    for level in 0..schedule.levels() {
        let nu = schedule.step_size(level);
        let noise_scale = nu.sqrt();
        for t in 0..schedule.steps {
            let scores = score_fn(&states, level)?;
            if scores.len() != count {
                return Err(Error::InvalidArgument(format!(
                    "score function returned {} matrices for {count} chains",
                    scores.len()
                )));
            }
            for (h, s) in states.iter_mut().zip(&scores) {
                let mut next = h.add(&s.scale(0.5 * nu))?;
                if inject_noise {
                    next = next.add(&complex_normal_matrix(rng, n_t, k, 1.0).scale(noise_scale))?;
                }
                if !next.is_finite() {
                    return Err(Error::Divergence(format!(
                        "Langevin iterate became non-finite at level {level}, step {t}"
                    )));
                }
                *h = next;
            }
        }
    }
    Ok(states)
}

/// Single-chain form of [`langevin_sample_batch`].
pub fn langevin_sample(
    mut score_fn: impl FnMut(&ComplexMatrix, usize) -> Result<ComplexMatrix>,
    schedule: &NoiseSchedule,
    n_t: usize,
    k: usize,
    rng: &mut impl Rng,
    inject_noise: bool,
) -> Result<ComplexMatrix> {
    let mut out = langevin_sample_batch(
        |states, level| states.iter().map(|h| score_fn(h, level)).collect(),
        schedule,
        1,
        n_t,
        k,
        rng,
        inject_noise,
    )?;
    Ok(out.remove(0))
}

/// Draws `count` samples from a trained score model, `chunk` chains at a
/// time.
pub fn generate<M: ScoreModel>(
    model: &M,
    schedule: &NoiseSchedule,
    count: usize,
    n_t: usize,
    k: usize,
    chunk: usize,
    rng: &mut impl Rng,
) -> Result<Vec<ComplexMatrix>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = chunk.max(1).min(count - out.len());
        let batch = langevin_sample_batch(|s, l| model.score(s, l), schedule, n, n_t, k, rng, true)?;
        out.extend(batch);
    }
    Ok(out)
}
