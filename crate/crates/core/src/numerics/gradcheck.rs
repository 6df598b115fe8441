//! Central-difference verification of analytic gradients.

use crate::error::{Error, Result};
use crate::numerics::params::ParamStore;
use crate::numerics::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Largest `|analytic − numeric| / max(1, |numeric|)` over the coordinates
/// of `theta`, where `numeric` is the central difference of `f` with step `h`.
pub fn finite_diff_check(
    mut f: impl FnMut(&Tensor) -> Result<f64>,
    theta: &Tensor,
    analytic: &Tensor,
    h: f64,
) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    if analytic.len() != theta.len() {
        return Err(Error::shape("finite_diff_check", theta.shape(), analytic.shape()));
    }
    let mut worst = 0.0_f64;
    let mut probe = theta.clone();
    for i in 0..theta.len() {
        let orig = theta.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let down = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("perturbed evaluation at coordinate {i}")));
        }
        let numeric = (up - down) / (2.0 * h);
        let err = (analytic.data()[i] - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Runs [`finite_diff_check`] over every tensor of `store`. `loss` is the
/// scalar objective; `analytic` holds gradients aligned with the store.
/// Returns the worst error and the name of the tensor where it occurred.
pub fn check_store(
    store: &ParamStore,
    analytic: &[Tensor],
    mut loss: impl FnMut(&ParamStore) -> Result<f64>,
    h: f64,
) -> Result<(f64, String)> {
    let mut worst = (0.0, String::new());
    let mut probe = store.clone();
    let ids: Vec<_> = store.ids().collect();
    for (i, id) in ids.into_iter().enumerate() {
        let theta = store.get(id).clone();
        let err = finite_diff_check(
            |t| {
                probe.set(id, t.clone())?;
                loss(&probe)
            },
            &theta,
            &analytic[i],
            h,
        )?;
        probe.set(id, theta)?;
        if err > worst.0 {
            worst = (err, store.names()[i].clone());
        }
    }
    Ok(worst)
}
