use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Descending perturbation powers `δ²_1 > … > δ²_L` with per-level Langevin
/// step sizes `ν_l = ε·δ²_l/δ²_L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub delta2: Vec<f64>,
    pub epsilon: f64,
    pub steps: usize,
}

/// Construction parameters for a geometric schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub delta2_max: f64,
    pub delta2_min: f64,
    pub levels: usize,
    pub epsilon: f64,
    pub steps: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            delta2_max: 1.0,
            delta2_min: 0.01,
            levels: 10,
            epsilon: 2e-5,
            steps: 100,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule> {
        make_schedule(self.delta2_max, self.delta2_min, self.levels, self.epsilon, self.steps)
    }
}

/// Geometric ladder in `δ` between `√delta2_max` and `√delta2_min`. The end
/// points are stored exactly.
pub fn make_schedule(
    delta2_max: f64,
    delta2_min: f64,
    levels: usize,
    epsilon: f64,
    steps: usize,
) -> Result<NoiseSchedule> {
    if !(delta2_min > 0.0 && delta2_max > delta2_min) {
        return Err(Error::InvalidArgument(format!(
            "noise powers must satisfy max > min > 0, got {delta2_max} and {delta2_min}"
        )));
    }
    if levels < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 levels, got {levels}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {epsilon}")));
    }
    let ratio = delta2_min / delta2_max;
    let last = levels - 1;
    let delta2 = (0..levels)
        .map(|l| match l {
            0 => delta2_max,
            l if l == last => delta2_min,
            l => delta2_max * ratio.powf(l as f64 / last as f64),
        })
        .collect();
    Ok(NoiseSchedule { delta2, epsilon, steps })
}

impl NoiseSchedule {
    pub fn levels(&self) -> usize {
        self.delta2.len()
    }

    pub fn delta(&self, level: usize) -> f64 {
        self.delta2[level].sqrt()
    }

    /// Langevin step size of level `level` (0-based).
    pub fn step_size(&self, level: usize) -> f64 {
        let last = *self.delta2.last().expect("nonempty schedule");
        self.epsilon * (self.delta2[level] / last)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta2.len() < 2 {
            return Err(Error::InvalidArgument("schedule needs at least 2 levels".into()));
        }
        if self.delta2.iter().any(|&d| !(d > 0.0)) || self.delta2.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidArgument("noise powers must be positive and descending".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("step size must be positive".into()));
        }
        Ok(())
    }
}
