//! Hybrid precoder solutions, the constrained output mapping and the
//! per-user achievable rate.

use crate::error::{Error, Result};
use crate::numerics::ops::sigmoid;
use crate::numerics::ComplexMatrix;

/// Additive stabilizer for the analog and digital normalizations.
pub const EPS_C: f64 = 1e-12;

/// Feasibility tolerances.
pub const MODULUS_TOL: f64 = 1e-6;
pub const POWER_TOL: f64 = 1e-9;
pub const NORM_TOL: f64 = 1e-6;

/// Analog precoder `p_rf` (`N_T × K`), digital precoders as the columns of
/// `p_bb` (`K × K`) and per-user powers `beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct HbfSolution {
    pub p_rf: ComplexMatrix,
    pub p_bb: ComplexMatrix,
    pub beta: Vec<f64>,
}

/// Unconstrained decoder outputs with the same layout as [`HbfSolution`].
#[derive(Clone, Debug, PartialEq)]
pub struct RawOutputs {
    pub p_rf: ComplexMatrix,
    pub p_bb: ComplexMatrix,
    pub beta: Vec<f64>,
}

/// Count of normalizations that hit a zero denominator and fell back on
/// [`EPS_C`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConstrainReport {
    pub guarded_entries: usize,
    pub guarded_columns: usize,
}

impl HbfSolution {
    pub fn users(&self) -> usize {
        self.beta.len()
    }

    /// `P_RF · p_BB` whose column `k` is the effective precoder of user `k`.
    pub fn effective(&self) -> Result<ComplexMatrix> {
        self.p_rf.matmul(&self.p_bb)
    }

    /// Checks unit modulus (scaled by `1/√N_T`), the power budget and unit
    /// effective precoder norms.
    pub fn check_feasible(&self, p_max: f64) -> Result<()> {
        let n_t = self.p_rf.rows();
        let k = self.users();
        if self.p_rf.cols() != k || self.p_bb.rows() != k || self.p_bb.cols() != k {
            return Err(Error::shape(
                "hbf solution",
                &[n_t, k],
                &[self.p_bb.rows(), self.p_bb.cols()],
            ));
        }
        let target = 1.0 / (n_t as f64).sqrt();
        for (re, im) in self.p_rf.to_pairs() {
            let m = re.hypot(im);
            if (m - target).abs() >= MODULUS_TOL {
                return Err(Error::InvalidArgument(format!(
                    "analog entry modulus {m} differs from {target}"
                )));
            }
        }
        if self.beta.iter().any(|&b| b < 0.0 || !b.is_finite()) {
            return Err(Error::InvalidArgument("negative or non-finite power".into()));
        }
        let total: f64 = self.beta.iter().sum();
        if total > p_max + POWER_TOL {
            return Err(Error::InvalidArgument(format!("total power {total} exceeds {p_max}")));
        }
        let eff = self.effective()?;
        for c in 0..k {
            let n = column_norm(&eff, c);
            if (n - 1.0).abs() >= NORM_TOL {
                return Err(Error::InvalidArgument(format!("effective precoder {c} has norm {n}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn column_norm(m: &ComplexMatrix, c: usize) -> f64 {
    m.column(c).iter().map(|(r, i)| r * r + i * i).sum::<f64>().sqrt()
}

/// Power normalization `σ(b_k)·P_max / max(1, Σ_j σ(b_j))`.
pub fn constrain_power(raw: &[f64], p_max: f64) -> Vec<f64> {
    let s: Vec<f64> = raw.iter().map(|&b| sigmoid(b)).collect();
    let denom = s.iter().sum::<f64>().max(1.0);
    s.iter().map(|v| v * p_max / denom).collect()
}

/// Scales each digital column so that its effective precoder has unit norm.
pub fn normalize_digital(p_rf: &ComplexMatrix, p_bb: &ComplexMatrix) -> Result<(ComplexMatrix, usize)> {
    let eff = p_rf.matmul(p_bb)?;
    let mut out = p_bb.clone();
    let mut guarded = 0;
    for c in 0..p_bb.cols() {
        let mut n = column_norm(&eff, c);
        if n == 0.0 {
            guarded += 1;
            n = EPS_C;
        }
        for r in 0..p_bb.rows() {
            let (re, im) = p_bb.get(r, c);
            out.set(r, c, (re / n, im / n));
        }
    }
    Ok((out, guarded))
}

/// Maps raw decoder outputs to a feasible [`HbfSolution`].
pub fn constrain_outputs(raw: &RawOutputs, p_max: f64) -> Result<(HbfSolution, ConstrainReport)> {
    let (n_t, k) = (raw.p_rf.rows(), raw.p_rf.cols());
    if raw.beta.len() != k || raw.p_bb.rows() != k || raw.p_bb.cols() != k {
        return Err(Error::shape("raw outputs", &[n_t, k], &[raw.p_bb.rows(), raw.p_bb.cols()]));
    }
    let mut report = ConstrainReport::default();
    let scale = (n_t as f64).sqrt();
    let mut p_rf = ComplexMatrix::zeros(n_t, k);
    for t in 0..n_t {
        for c in 0..k {
            let (re, im) = raw.p_rf.get(t, c);
            let m = re.hypot(im);
            let v = if m == 0.0 {
                // no phase information: take phase 0
                report.guarded_entries += 1;
                (1.0 / scale, 0.0)
            } else {
                (re / (m * scale), im / (m * scale))
            };
            p_rf.set(t, c, v);
        }
    }
    let (p_bb, guarded) = normalize_digital(&p_rf, &raw.p_bb)?;
    report.guarded_columns = guarded;
    if report.guarded_entries + report.guarded_columns > 0 {
        log::debug!("constrained output used the stabilizer: {report:?}");
    }
    let beta = constrain_power(&raw.beta, p_max);
    Ok((HbfSolution { p_rf, p_bb, beta }, report))
}

/// Per-user rates `log₂(1 + SINR_k)` under channel `h` (`N_T × K`).
pub fn achievable_rate(h: &ComplexMatrix, sol: &HbfSolution, sigma2: f64) -> Result<Vec<f64>> {
    let k = sol.users();
    if h.cols() != k || h.rows() != sol.p_rf.rows() {
        return Err(Error::shape("achievable rate", &[h.rows(), h.cols()], &[sol.p_rf.rows(), k]));
    }
    // gain[u][j] = |h_uᴴ v_j|²
    let gain = h.conj_transpose().matmul(&sol.effective()?)?;
    let rates = (0..k)
        .map(|u| {
            let mut signal = 0.0;
            let mut interference = 0.0;
            for j in 0..k {
                let (re, im) = gain.get(u, j);
                let p = sol.beta[j] * (re * re + im * im);
                if j == u {
                    signal = p;
                } else {
                    interference += p;
                }
            }
            (1.0 + signal / (interference + sigma2)).log2()
        })
        .collect();
    Ok(rates)
}

pub fn sum_rate(h: &ComplexMatrix, sol: &HbfSolution, sigma2: f64) -> Result<f64> {
    Ok(achievable_rate(h, sol, sigma2)?.iter().sum())
}
