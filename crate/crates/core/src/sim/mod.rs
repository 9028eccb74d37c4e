//! Synthetic missions and Monte-Carlo geotagging accuracy.

pub mod accuracy;
pub mod flight_log;
pub mod mission;
pub mod noise;

pub use accuracy::{percentile_radius, run_accuracy_experiment, AccuracyExperiment, AccuracyReport, TieredReport};
pub use flight_log::{FlightLog, FlightLogLine, FlightLogRecord, PoseLookup};
pub use mission::{generate_flight_log, GimbalKeyframe, MissionPlan, SatelliteKeyframe};
pub use noise::{rayleigh_quantile, NoiseModel, NoiseTier};

use crate::geodesy::GeodeticCoord;

/// Calibration scenario: a 200 s nadir hover 40 m above flat ground with
/// 180 s at 16 satellites, 10 s at 14 and 10 s at 13.
pub fn calibration_hover_plan() -> MissionPlan {
    let position = GeodeticCoord { lat_deg: 41.7, lon_deg: -86.2, alt_m: 240.0 };
    let mut plan = MissionPlan::new(vec![position], 5.0, 1.0);
    plan.hover_s = 199.0;
    plan.ground_alt_m = 200.0;
    plan.satellites = vec![
        SatelliteKeyframe { t: 0.0, sats: 16 },
        SatelliteKeyframe { t: 180.0, sats: 14 },
        SatelliteKeyframe { t: 190.0, sats: 13 },
    ];
    plan
}

/// Ground point directly below the calibration hover.
pub fn calibration_target() -> GeodeticCoord {
    GeodeticCoord { lat_deg: 41.7, lon_deg: -86.2, alt_m: 200.0 }
}
