//! Classical reference precoders and an exhaustive search for micro
//! instances.

use std::str::FromStr;

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmgat::{normalize_digital, sum_rate, HbfSolution};
use crate::numerics::ComplexMatrix;

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_RTOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Pzf,
    EqualPowerRandom,
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pzf" => Ok(Self::Pzf),
            "equal_power_random" | "random" => Ok(Self::EqualPowerRandom),
            other => Err(Error::InvalidArgument(format!("unknown baseline `{other}`"))),
        }
    }
}

fn to_na(m: &ComplexMatrix) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| {
        let (re, im) = m.get(r, c);
        Complex::new(re, im)
    })
}

fn from_na(m: &DMatrix<Complex<f64>>) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            out.set(r, c, (v.re, v.im));
        }
    }
    out
}

/// Moore–Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pinv(m: &ComplexMatrix) -> ComplexMatrix {
    let svd = to_na(m).svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = PINV_RTOL * smax;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let inv_s = DMatrix::from_diagonal(&svd.singular_values.map(|s| {
        if s > cutoff && s > 0.0 {
            Complex::new(1.0 / s, 0.0)
        } else {
            Complex::new(0.0, 0.0)
        }
    }));
    from_na(&(v_t.adjoint() * inv_s * u.adjoint()))
}

/// Analog stage from the channel phases.
pub fn phase_precoder(h: &ComplexMatrix) -> ComplexMatrix {
    let s = 1.0 / (h.rows() as f64).sqrt();
    let mut p = ComplexMatrix::zeros(h.rows(), h.cols());
    for t in 0..h.rows() {
        for k in 0..h.cols() {
            let (re, im) = h.get(t, k);
            let phi = im.atan2(re);
            p.set(t, k, (s * phi.cos(), s * phi.sin()));
        }
    }
    p
}

/// Zero-forcing digital stage for a given analog precoder, normalized to
/// unit effective norm per user, with equal power split.
pub fn zf_digital(h: &ComplexMatrix, p_rf: ComplexMatrix, p_max: f64) -> Result<HbfSolution> {
    let k = h.cols();
    let effective = h.conj_transpose().matmul(&p_rf)?;
    let (p_bb, _) = normalize_digital(&p_rf, &pinv(&effective))?;
    Ok(HbfSolution { p_rf, p_bb, beta: vec![p_max / k as f64; k] })
}

/// Phase-only analog precoding with zero-forcing baseband.
pub fn pzf(h: &ComplexMatrix, p_max: f64) -> Result<HbfSolution> {
    zf_digital(h, phase_precoder(h), p_max)
}

/// Random unit-modulus analog stage and random digital columns.
pub fn equal_power_random(h: &ComplexMatrix, p_max: f64, rng: &mut impl Rng) -> Result<HbfSolution> {
    let (n_t, k) = (h.rows(), h.cols());
    let s = 1.0 / (n_t as f64).sqrt();
    let mut p_rf = ComplexMatrix::zeros(n_t, k);
    for t in 0..n_t {
        for c in 0..k {
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            p_rf.set(t, c, (s * phi.cos(), s * phi.sin()));
        }
    }
    let raw = crate::channel::complex_normal_matrix(rng, k, k, 1.0);
    let (p_bb, _) = normalize_digital(&p_rf, &raw)?;
    Ok(HbfSolution { p_rf, p_bb, beta: vec![p_max / k as f64; k] })
}

pub fn solve(kind: BaselineKind, h: &ComplexMatrix, p_max: f64, rng: &mut impl Rng) -> Result<HbfSolution> {
    match kind {
        BaselineKind::Pzf => pzf(h, p_max),
        BaselineKind::EqualPowerRandom => equal_power_random(h, p_max, rng),
    }
}

fn power_splits(k: usize, levels: usize, p_max: f64) -> Vec<Vec<f64>> {
    if k == 1 {
        return (0..=levels).map(|i| vec![p_max * i as f64 / levels as f64]).collect();
    }
    (0..=levels)
        .map(|i| {
            let a = p_max * i as f64 / levels as f64;
            vec![a, p_max - a]
        })
        .collect()
}

/// Best sum rate over `2^phase_bits` phases per analog entry, a
/// zero-forcing digital stage and `power_levels + 1` power splits.
pub fn tiny_grid_oracle(
    h: &ComplexMatrix,
    p_max: f64,
    sigma2: f64,
    phase_bits: u32,
    power_levels: usize,
) -> Result<f64> {
    let (n_t, k) = (h.rows(), h.cols());
    if k > 2 || n_t > 2 || phase_bits > 4 || k == 0 || power_levels == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid oracle limited to K ≤ 2, N_T ≤ 2, ≤ 4 phase bits (got K={k}, N_T={n_t}, bits={phase_bits})"
        )));
    }
    let phases = 1usize << phase_bits;
    let entries = n_t * k;
    let s = 1.0 / (n_t as f64).sqrt();
    let splits = power_splits(k, power_levels, p_max);
    let mut best = f64::NEG_INFINITY;
    for code in 0..phases.pow(entries as u32) {
        let mut p_rf = ComplexMatrix::zeros(n_t, k);
        let mut c = code;
        for e in 0..entries {
            let phi = std::f64::consts::TAU * (c % phases) as f64 / phases as f64;
            c /= phases;
            p_rf.set(e / k, e % k, (s * phi.cos(), s * phi.sin()));
        }
        let mut sol = zf_digital(h, p_rf, p_max)?;
        for beta in &splits {
            sol.beta.clone_from(beta);
            best = best.max(sum_rate(h, &sol, sigma2)?);
        }
    }
    Ok(best)
}
