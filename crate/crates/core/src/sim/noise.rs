use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::geodesy::EnuVector;

/// Horizontal GPS error for receivers tracking at least `min_satellites`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseTier {
    pub label: String,
    pub min_satellites: u32,
    /// Per-axis (east, north) standard deviation in meters.
    pub sigma_m: f64,
}

impl NoiseTier {
    pub fn new(label: impl Into<String>, min_satellites: u32, sigma_m: f64) -> Self {
        NoiseTier { label: label.into(), min_satellites, sigma_m }
    }

    /// Radius containing fraction `p` of the 2-D error (Rayleigh quantile).
    pub fn cep_radius(&self, p: f64) -> f64 {
        rayleigh_quantile(self.sigma_m, p)
    }
}

pub fn rayleigh_quantile(sigma: f64, p: f64) -> f64 {
    sigma * (-2.0 * (1.0 - p).ln()).sqrt()
}

// Calibration, not ground truth: sigmas chosen so simulated accuracy reports
// land near the field figures (>=15 satellites mean ~2 m, 13 satellites mean
// ~7 m). Rayleigh mean is sigma * sqrt(pi / 2).
pub const CALIBRATED_SIGMA_EXCELLENT_M: f64 = 1.595_769_121_605_731;
pub const CALIBRATED_SIGMA_GOOD_M: f64 = 3.191_538_243_211_462;
pub const CALIBRATED_SIGMA_DEGRADED_M: f64 = 5.585_191_925_620_058;

pub(crate) mod streams {
    pub const GPS_NOISE: u64 = 0x6770_735f_6e6f_6973;
    pub const POSE_PICK: u64 = 0x706f_7365_5f70_6963;
}

/// Deterministic RNG for one trial of one random stream.
pub(crate) fn trial_rng(seed: u64, stream: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream);
    rng.set_stream(trial_index);
    rng
}

/// Satellite-count-dependent horizontal position noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseModel {
    /// Sorted by descending `min_satellites`.
    tiers: Vec<NoiseTier>,
    pub seed: u64,
    /// Attitude noise is not simulated; must stay zero.
    pub attitude_sigma_deg: f64,
}

impl NoiseModel {
    pub fn new(mut tiers: Vec<NoiseTier>, seed: u64) -> Result<Self, SimError> {
        if tiers.is_empty() {
            return Err(SimError::InvalidNoiseModel("no tiers".into()));
        }
        tiers.sort_by_key(|t| std::cmp::Reverse(t.min_satellites));
        for t in &tiers {
            if !(t.sigma_m >= 0.0 && t.sigma_m.is_finite()) {
                return Err(SimError::InvalidNoiseModel(format!("tier `{}` sigma {} < 0", t.label, t.sigma_m)));
            }
        }
        for w in tiers.windows(2) {
            if w[0].min_satellites == w[1].min_satellites {
                return Err(SimError::InvalidNoiseModel(format!("duplicate threshold {}", w[0].min_satellites)));
            }
            if w[0].sigma_m > w[1].sigma_m {
                return Err(SimError::InvalidNoiseModel(format!(
                    "tier `{}` has larger sigma than lower tier `{}`",
                    w[0].label, w[1].label
                )));
            }
        }
        Ok(NoiseModel { tiers, seed, attitude_sigma_deg: 0.0 })
    }

    /// One tier applying to every satellite count.
    pub fn uniform(sigma_m: f64, seed: u64) -> Result<Self, SimError> {
        Self::new(vec![NoiseTier::new("all", 0, sigma_m)], seed)
    }

    /// Shipped default tiers: `>=15`, `14` and `<=13` satellites.
    pub fn calibrated(seed: u64) -> Self {
        Self::new(
            vec![
                NoiseTier::new(">=15", 15, CALIBRATED_SIGMA_EXCELLENT_M),
                NoiseTier::new("14", 14, CALIBRATED_SIGMA_GOOD_M),
                NoiseTier::new("<=13", 0, CALIBRATED_SIGMA_DEGRADED_M),
            ],
            seed,
        )
        .expect("calibrated tiers are valid")
    }

    pub fn tiers(&self) -> &[NoiseTier] {
        &self.tiers
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        NoiseModel { seed, ..self.clone() }
    }

    /// Tier with the highest threshold not above `satellites`; counts below
    /// every threshold fall into the lowest tier.
    pub fn tier_for(&self, satellites: u32) -> &NoiseTier {
        self.tiers
            .iter()
            .find(|t| satellites >= t.min_satellites)
            .unwrap_or_else(|| self.tiers.last().expect("non-empty"))
    }

    pub fn tier_index(&self, satellites: u32) -> usize {
        self.tiers.iter().position(|t| satellites >= t.min_satellites).unwrap_or(self.tiers.len() - 1)
    }

    pub fn sigma_for(&self, satellites: u32) -> f64 {
        self.tier_for(satellites).sigma_m
    }

    pub fn cep68(&self, satellites: u32) -> f64 {
        self.tier_for(satellites).cep_radius(0.68)
    }

    /// Zero-mean Gaussian east/north offset, fixed by `(seed, trial_index)`.
    pub fn sample_gps_noise(&self, satellites: u32, trial_index: u64) -> EnuVector {
        let sigma = self.sigma_for(satellites);
        if sigma == 0.0 {
            return EnuVector::default();
        }
        let mut rng = trial_rng(self.seed, streams::GPS_NOISE, trial_index);
        let east: f64 = StandardNormal.sample(&mut rng);
        let north: f64 = StandardNormal.sample(&mut rng);
        EnuVector::new(sigma * east, sigma * north, 0.0)
    }
}
