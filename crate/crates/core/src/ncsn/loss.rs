use rand::Rng;

use crate::channel::complex_normal_matrix;
use crate::encoder::csi_tokens;
use crate::error::{Error, Result};
use crate::ncsn::model::ScoreModel;
use crate::ncsn::schedule::NoiseSchedule;
use crate::nn::DropoutCtx;
use crate::numerics::{Bound, ComplexMatrix, Graph, Tensor, Var};

/// Perturbations for every (sample, level) pair, sample-major.
#[derive(Clone, Debug)]
pub struct Perturbations {
    pub noise: Vec<ComplexMatrix>,
    pub levels: Vec<usize>,
}

impl Perturbations {
    pub fn draw(clean: &[ComplexMatrix], schedule: &NoiseSchedule, rng: &mut impl Rng) -> Perturbations {
        let mut noise = Vec::with_capacity(clean.len() * schedule.levels());
        let mut levels = Vec::with_capacity(noise.capacity());
        for h in clean {
            for (l, &d2) in schedule.delta2.iter().enumerate() {
                noise.push(complex_normal_matrix(rng, h.rows(), h.cols(), d2));
                levels.push(l);
            }
        }
        Perturbations { noise, levels }
    }
}

/// Weighted denoising score-matching objective on the graph:
/// `(1/2L) Σ_l δ²_l ‖S(H + Z_l, l) + Z_l/δ²_l‖²`, averaged over the batch.
pub fn ncsn_objective<M: ScoreModel>(
    g: &mut Graph,
    p: &Bound,
    model: &M,
    clean: &[ComplexMatrix],
    noise: &Perturbations,
    schedule: &NoiseSchedule,
    drop: Option<&mut DropoutCtx<'_>>,
) -> Result<Var> {
    if clean.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let levels = schedule.levels();
    if model.levels() != levels {
        return Err(Error::ConfigMismatch(format!(
            "model has {} levels, schedule has {levels}",
            model.levels()
        )));
    }
    if noise.noise.len() != clean.len() * levels {
        return Err(Error::InvalidArgument("perturbation count does not match batch".into()));
    }
    let noisy: Vec<ComplexMatrix> = noise
        .noise
        .iter()
        .enumerate()
        .map(|(i, z)| clean[i / levels].add(z))
        .collect::<Result<_>>()?;
    let (x, tokens) = csi_tokens(&noisy)?;
    let (z, _) = csi_tokens(&noise.noise)?;
    let k = tokens.k;
    // δ_l S + Z/δ_l  equals  √λ_l (S + Z/δ²_l)
    let delta: Vec<f64> = (0..tokens.count * k).map(|r| schedule.delta(noise.levels[r / k])).collect();
    let target = {
        let mut t = z;
        for (r, row) in t.data_mut().chunks_mut(2 * clean[0].rows()).enumerate() {
            row.iter_mut().for_each(|v| *v /= delta[r]);
        }
        t
    };
    let xv = g.constant(x);
    let s = model.score_tokens(g, p, &tokens, xv, &noise.levels, drop)?;
    let w = g.constant(Tensor::from_raw(delta.len(), 1, delta));
    let ws = g.mul(s, w)?;
    let tv = g.constant(target);
    let r = g.add(ws, tv)?;
    let r2 = g.mul(r, r)?;
    let total = g.sum(r2);
    Ok(g.scale(total, 1.0 / (2.0 * levels as f64 * clean.len() as f64)))
}

/// Value of the objective for fixed parameters, drawing fresh perturbations.
pub fn ncsn_loss<M: ScoreModel>(
    model: &M,
    clean: &[ComplexMatrix],
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<f64> {
    let noise = Perturbations::draw(clean, schedule, rng);
    let mut g = Graph::inference();
    let p = g.bind(model.store());
    let loss = ncsn_objective(&mut g, &p, model, clean, &noise, schedule, None)?;
    g.value(loss).item()
}

/// Objective and parameter gradients for fixed perturbations.
pub fn ncsn_loss_and_grad<M: ScoreModel>(
    model: &M,
    clean: &[ComplexMatrix],
    noise: &Perturbations,
    schedule: &NoiseSchedule,
    drop: Option<&mut DropoutCtx<'_>>,
) -> Result<(f64, Vec<Tensor>)> {
    let mut g = Graph::new();
    let p = g.bind(model.store());
    let loss = ncsn_objective(&mut g, &p, model, clean, noise, schedule, drop)?;
    let value = g.value(loss).item()?;
    let grads = g.backward(loss)?;
    Ok((value, grads.for_params(&p)))
}
