use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::exec::Execution;
use crate::geodesy::{self, GeodeticCoord};
use crate::projection::{self, CameraIntrinsics, PixelCoord, ProjectionConfig, UavPose};

use super::flight_log::FlightLog;
use super::noise::{streams, trial_rng, NoiseModel};

/// Horizontal-error summary of a Monte-Carlo geotagging run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub trials: usize,
    pub mean_m: f64,
    pub cep68_m: f64,
    pub cep99_m: f64,
    pub tier: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<f64>,
}

impl AccuracyReport {
    pub fn from_samples(samples: Vec<f64>, tier: impl Into<String>) -> Result<Self, SimError> {
        let cep68_m = percentile_radius(&samples, 0.68)?;
        let cep99_m = percentile_radius(&samples, 0.99)?;
        let mean_m = samples.iter().sum::<f64>() / samples.len() as f64;
        Ok(AccuracyReport { trials: samples.len(), mean_m, cep68_m, cep99_m, tier: tier.into(), samples })
    }

    pub fn without_samples(mut self) -> Self {
        self.samples = Vec::new();
        self
    }
}

/// Nearest-rank percentile: the ⌈p·n⌉-th smallest sample (1-based).
pub fn percentile_radius(samples: &[f64], p: f64) -> Result<f64, SimError> {
    if samples.is_empty() {
        return Err(SimError::EmptySamples);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(SimError::InvalidMission(format!("percentile {p} not in (0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // Guard against p·n landing a hair above an integer (0.7 · 10).
    let rank = ((p * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(n) - 1])
}

/// Inputs of an accuracy experiment.
#[derive(Debug, Clone)]
pub struct AccuracyExperiment<'a> {
    pub target: GeodeticCoord,
    pub log: &'a FlightLog,
    pub intrinsics: CameraIntrinsics,
    pub noise: &'a NoiseModel,
    pub trials: usize,
    pub projection: ProjectionConfig,
    pub execution: Execution,
}

impl<'a> AccuracyExperiment<'a> {
    pub fn new(target: GeodeticCoord, log: &'a FlightLog, intrinsics: CameraIntrinsics, noise: &'a NoiseModel, trials: usize) -> Self {
        AccuracyExperiment {
            target,
            log,
            intrinsics,
            noise,
            trials,
            projection: ProjectionConfig::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    /// Poses that see the target, paired with its true pixel.
    fn visible_views(&self) -> Vec<(UavPose, PixelCoord)> {
        self.log
            .poses()
            .filter_map(|pose| {
                let r = projection::geolocation_to_pixel(pose, &self.intrinsics, self.target, &self.projection);
                r.visible.then_some((*pose, r.pixel))
            })
            .collect()
    }

    pub fn run(&self) -> Result<AccuracyReport, SimError> {
        let views = self.visible_views();
        self.run_over(&views, self.noise)
    }

    fn run_over(&self, views: &[(UavPose, PixelCoord)], noise: &NoiseModel) -> Result<AccuracyReport, SimError> {
        if views.is_empty() {
            return Err(SimError::TargetNeverVisible);
        }
        let first_tier = noise.tier_index(views[0].0.satellites);
        let tier = if views.iter().all(|(p, _)| noise.tier_index(p.satellites) == first_tier) {
            noise.tiers()[first_tier].label.clone()
        } else {
            "mixed".to_string()
        };

        let results = self.execution.map_indexed(self.trials, |i| self.trial(views, noise, i as u64));
        let samples = results.into_iter().collect::<Result<Vec<f64>, SimError>>()?;
        AccuracyReport::from_samples(samples, tier)
    }

    fn trial(&self, views: &[(UavPose, PixelCoord)], noise: &NoiseModel, trial_index: u64) -> Result<f64, SimError> {
        let e = &self.projection.ellipsoid;
        let pick = trial_rng(noise.seed, streams::POSE_PICK, trial_index).random_range(0..views.len());
        let (true_pose, pixel) = views[pick];
        let offset = noise.sample_gps_noise(true_pose.satellites, trial_index);
        let perturbed = UavPose { position: geodesy::offset_geodetic(true_pose.position, offset, e)?, ..true_pose };
        let estimate = projection::pixel_to_geolocation(&perturbed, &self.intrinsics, pixel, &self.projection)?;
        Ok(geodesy::horizontal_distance(self.target, estimate, e))
    }

    /// One report over every visible pose, plus one per noise tier that has
    /// visible poses. Each tier run draws from its own seed.
    pub fn run_tiered(&self) -> Result<TieredReport, SimError> {
        let views = self.visible_views();
        let overall = self.run_over(&views, self.noise)?;
        let mut tiers = Vec::new();
        for (idx, _) in self.noise.tiers().iter().enumerate() {
            let subset: Vec<_> =
                views.iter().copied().filter(|(p, _)| self.noise.tier_index(p.satellites) == idx).collect();
            if subset.is_empty() {
                continue;
            }
            let seed = self.noise.seed.wrapping_add((idx as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            tiers.push(self.run_over(&subset, &self.noise.with_seed(seed))?);
        }
        Ok(TieredReport { overall, tiers })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieredReport {
    pub overall: AccuracyReport,
    pub tiers: Vec<AccuracyReport>,
}

impl TieredReport {
    pub fn tier(&self, label: &str) -> Option<&AccuracyReport> {
        self.tiers.iter().find(|r| r.tier == label)
    }
}

/// Convenience wrapper running the experiment with default projection
/// settings and the default execution strategy.
pub fn run_accuracy_experiment(
    target: GeodeticCoord,
    log: &FlightLog,
    intrinsics: CameraIntrinsics,
    noise: &NoiseModel,
    trials: usize,
) -> Result<AccuracyReport, SimError> {
    AccuracyExperiment::new(target, log, intrinsics, noise, trials).run()
}
