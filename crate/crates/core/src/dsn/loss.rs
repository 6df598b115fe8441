use crate::dsn::model::DebertModel;
use crate::encoder::csi_tokens;
use crate::error::{Error, Result};
use crate::nn::DropoutCtx;
use crate::numerics::{Bound, ComplexMatrix, Graph, Tensor, Unary, Var};

/// Keeps the reconstruction norm differentiable at zero error.
const NORM_FLOOR: f64 = 1e-30;

/// Clean channel, its imperfect observation and the error variance used to
/// make it.
#[derive(Clone, Debug)]
pub struct DenoiseExample {
    pub clean: ComplexMatrix,
    pub noisy: ComplexMatrix,
    pub delta2_e: f64,
}

fn check_example(ex: &DenoiseExample) -> Result<f64> {
    if !(ex.delta2_e > 0.0) || !ex.delta2_e.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "score term needs a positive error variance, got {}",
            ex.delta2_e
        )));
    }
    let norm = ex.clean.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("clean channel has zero norm".into()));
    }
    if ex.noisy.rows() != ex.clean.rows() || ex.noisy.cols() != ex.clean.cols() {
        return Err(Error::shape(
            "denoising pair",
            &[ex.clean.rows(), ex.clean.cols()],
            &[ex.noisy.rows(), ex.noisy.cols()],
        ));
    }
    Ok(norm)
}

/// `δ²_E ‖S + (H̃ − H)/δ²_E‖² + λ ‖H − Ĥ‖_F / ‖H‖_F` from given outputs.
pub fn multitask_loss(
    score: &ComplexMatrix,
    h: &ComplexMatrix,
    h_tilde: &ComplexMatrix,
    h_hat: &ComplexMatrix,
    delta2_e: f64,
    lambda: f64,
) -> Result<f64> {
    let ex = DenoiseExample { clean: h.clone(), noisy: h_tilde.clone(), delta2_e };
    let norm = check_example(&ex)?;
    let err = h_tilde.sub(h)?;
    let resid = score.add(&err.scale(1.0 / delta2_e))?;
    let score_term = delta2_e * resid.frobenius_norm().powi(2);
    Ok(score_term + lambda * h.sub(h_hat)?.frobenius_norm() / norm)
}

/// Batch mean of the multi-task loss on the graph. Samples may carry
/// different error levels.
pub fn dsn_objective(
    g: &mut Graph,
    p: &Bound,
    model: &DebertModel,
    batch: &[DenoiseExample],
    lambda: f64,
    drop: Option<&mut DropoutCtx<'_>>,
) -> Result<Var> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let norms = batch.iter().map(check_example).collect::<Result<Vec<_>>>()?;
    let clean: Vec<ComplexMatrix> = batch.iter().map(|e| e.clean.clone()).collect();
    let noisy: Vec<ComplexMatrix> = batch.iter().map(|e| e.noisy.clone()).collect();
    let (x, tokens) = csi_tokens(&noisy)?;
    let (h, _) = csi_tokens(&clean)?;
    let k = tokens.k;
    let delta: Vec<f64> = batch.iter().map(|e| e.delta2_e.sqrt()).collect();

    // δ_E S + (H̃ − H)/δ_E
    let mut target = x.clone();
    for (v, c) in target.data_mut().iter_mut().zip(h.data()) {
        *v -= c;
    }
    let width = target.cols();
    for (r, row) in target.data_mut().chunks_mut(width).enumerate() {
        let d = delta[r / k];
        row.iter_mut().for_each(|v| *v /= d);
    }

    let xv = g.constant(x);
    let out = model.forward(g, p, &tokens, xv, &delta, drop)?;
    let row_delta: Vec<f64> = (0..tokens.count * k).map(|r| delta[r / k]).collect();
    let w = g.constant(Tensor::from_raw(row_delta.len(), 1, row_delta));
    let ws = g.mul(out.score, w)?;
    let tv = g.constant(target);
    let r = g.add(ws, tv)?;
    let r2 = g.mul(r, r)?;
    let score_term = g.sum(r2);

    let hv = g.constant(h);
    let diff = g.sub(hv, out.h_hat)?;
    let d2 = g.mul(diff, diff)?;
    let per_token = g.sum_rows(d2);
    let per_sample = g.reshape(per_token, tokens.count, k)?;
    let per_sample = g.sum_rows(per_sample);
    let per_sample = g.offset(per_sample, NORM_FLOOR);
    let dist = g.unary(per_sample, Unary::Sqrt);
    let inv = g.constant(Tensor::from_raw(norms.len(), 1, norms.iter().map(|n| 1.0 / n).collect()));
    let rel = g.mul(dist, inv)?;
    let rel = g.sum(rel);
    let rel = g.scale(rel, lambda);

    let total = g.add(score_term, rel)?;
    Ok(g.scale(total, 1.0 / batch.len() as f64))
}

/// Multi-task loss of one imperfect observation.
pub fn dsn_loss(
    model: &DebertModel,
    h: &ComplexMatrix,
    h_tilde: &ComplexMatrix,
    delta2_e: f64,
    lambda: f64,
) -> Result<f64> {
    let ex = DenoiseExample { clean: h.clone(), noisy: h_tilde.clone(), delta2_e };
    dsn_batch_loss(model, std::slice::from_ref(&ex), lambda)
}

pub fn dsn_batch_loss(model: &DebertModel, batch: &[DenoiseExample], lambda: f64) -> Result<f64> {
    let mut g = Graph::inference();
    let p = g.bind(&model.store);
    let loss = dsn_objective(&mut g, &p, model, batch, lambda, None)?;
    g.value(loss).item()
}

pub fn dsn_loss_and_grad(
    model: &DebertModel,
    batch: &[DenoiseExample],
    lambda: f64,
    drop: Option<&mut DropoutCtx<'_>>,
) -> Result<(f64, Vec<Tensor>)> {
    let mut g = Graph::new();
    let p = g.bind(&model.store);
    let loss = dsn_objective(&mut g, &p, model, batch, lambda, drop)?;
    let value = g.value(loss).item()?;
    let grads = g.backward(loss)?;
    Ok((value, grads.for_params(&p)))
}
