use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MU-MISO system dimensions, power budget and channel-generator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of single-antenna users.
    pub k: usize,
    /// Transmit antennas.
    pub n_t: usize,
    /// RF chains; `k` of them are used.
    pub n_f: usize,
    /// Total transmit power budget in watts.
    pub p_max: f64,
    /// Per-user noise power after channel normalization.
    pub sigma2: f64,
    /// Multipath components per user.
    pub paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub metadata: PhysicalMetadata,
}

/// Physical-layer figures carried for reference. They are not applied as
/// absolute path loss; channels are normalized to unit per-entry power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalMetadata {
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub antenna_spacing_wavelengths: f64,
}

impl Default for PhysicalMetadata {
    fn default() -> Self {
        Self {
            bandwidth_hz: 0.5e9,
            carrier_hz: 28e9,
            noise_psd_dbm_per_hz: -174.0,
            antenna_spacing_wavelengths: 0.5,
        }
    }
}

impl SystemConfig {
    pub fn new(k: usize, n_t: usize) -> Self {
        Self {
            k,
            n_t,
            n_f: k,
            p_max: 1.0,
            sigma2: 1.0,
            paths: 10,
            seed: 0,
            metadata: PhysicalMetadata::default(),
        }
    }

    pub fn with_paths(mut self, paths: usize) -> Self {
        self.paths = paths;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_t >= self.n_f && self.n_f >= self.k && self.k >= 1) {
            return Err(Error::InvalidArgument(format!(
                "need N_T >= N_F >= K >= 1, got N_T={} N_F={} K={}",
                self.n_t, self.n_f, self.k
            )));
        }
        if !(self.p_max > 0.0 && self.sigma2 > 0.0 && self.paths >= 1) {
            return Err(Error::InvalidArgument(format!(
                "need P_max > 0, sigma2 > 0, paths >= 1 (got {}, {}, {})",
                self.p_max, self.sigma2, self.paths
            )));
        }
        Ok(())
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::new(4, 8)
    }
}

/// Channel-estimation error variance, stored on the linear scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorLevel {
    pub delta2_e: f64,
}

impl ErrorLevel {
    pub fn new(delta2_e: f64) -> Result<Self> {
        if !(delta2_e >= 0.0) || !delta2_e.is_finite() {
            return Err(Error::InvalidArgument(format!("error variance must be >= 0, got {delta2_e}")));
        }
        Ok(Self { delta2_e })
    }

    pub fn from_db(db: f64) -> Self {
        Self {
            delta2_e: 10f64.powf(db / 10.0),
        }
    }

    pub fn db(self) -> f64 {
        10.0 * self.delta2_e.log10()
    }

    /// Standard deviation `δ_E`.
    pub fn std_dev(self) -> f64 {
        self.delta2_e.sqrt()
    }
}
