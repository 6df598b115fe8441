//! Evaluation statistics: reconstruction error, distribution distances and
//! dataset-level sum-rate summaries.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hmgat::{sum_rate, HbfSolution};
use crate::numerics::ComplexMatrix;

/// Normalized reconstruction error `‖H − Ĥ‖_F / ‖H‖_F`.
pub fn nre(h: &ComplexMatrix, h_hat: &ComplexMatrix) -> Result<f64> {
    let denom = h.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::InvalidArgument("NRE reference has zero norm".into()));
    }
    Ok(h.sub(h_hat)?.frobenius_norm() / denom)
}

/// Histogram with uniform edges over a fixed range.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Histogram {
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for &x in samples {
            if x < lo || x > hi {
                continue;
            }
            let idx = if width > 0.0 {
                (((x - lo) / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[idx] += 1;
        }
        Histogram { edges, counts }
    }

    /// Probability masses; all zeros when no sample fell in range.
    pub fn masses(&self) -> Vec<f64> {
        let total: usize = self.counts.iter().sum();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

fn pooled_range(a: &[f64], b: &[f64]) -> (f64, f64) {
    a.iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).log2())
        .sum()
}

/// Jensen–Shannon divergence in bits between histograms of `a` and `b`
/// sharing `bins` uniform bins over the pooled range.
pub fn js_divergence(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("JS divergence of an empty sample set".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    let (lo, hi) = pooled_range(a, b);
    let p = Histogram::new(a, lo, hi, bins).masses();
    let q = Histogram::new(b, lo, hi, bins).masses();
    let m: Vec<f64> = p.iter().zip(&q).map(|(x, y)| 0.5 * (x + y)).collect();
    Ok((0.5 * kl_bits(&p, &m) + 0.5 * kl_bits(&q, &m)).clamp(0.0, 1.0))
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("KS statistic of an empty sample set".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup = 0.0_f64;
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

/// Which scalar view of complex CSI entries to compare.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Component {
    Real,
    Imag,
    Magnitude,
}

/// Flattens every entry of every sample into the chosen component.
pub fn component_values(samples: &[ComplexMatrix], which: Component) -> Vec<f64> {
    samples
        .iter()
        .flat_map(|s| s.to_pairs())
        .map(|(r, i)| match which {
            Component::Real => r,
            Component::Imag => i,
            Component::Magnitude => r.hypot(i),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SumRateSummary {
    pub mean: f64,
    pub per_sample: Vec<f64>,
}

impl SumRateSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,sum_rate\n");
        for (i, r) in self.per_sample.iter().enumerate() {
            let _ = writeln!(out, "{i},{r}");
        }
        out
    }
}

/// Mean sum rate of `solver` over `truth`. The solver sees
/// `observed[i]` when given (for example denoised or imperfect CSI), but the
/// rate is always computed under the true channel.
pub fn evaluate_sum_rates(
    truth: &[ComplexMatrix],
    observed: Option<&[ComplexMatrix]>,
    sigma2: f64,
    mut solver: impl FnMut(&ComplexMatrix) -> Result<HbfSolution>,
) -> Result<SumRateSummary> {
    if let Some(obs) = observed {
        if obs.len() != truth.len() {
            return Err(Error::InvalidArgument(format!(
                "{} observations for {} channels",
                obs.len(),
                truth.len()
            )));
        }
    }
    let mut per_sample = Vec::with_capacity(truth.len());
    for (i, h) in truth.iter().enumerate() {
        let input = observed.map_or(h, |o| &o[i]);
        let sol = solver(input)?;
        per_sample.push(sum_rate(h, &sol, sigma2)?);
    }
    let mean = if per_sample.is_empty() {
        0.0
    } else {
        per_sample.iter().sum::<f64>() / per_sample.len() as f64
    };
    Ok(SumRateSummary { mean, per_sample })
}
