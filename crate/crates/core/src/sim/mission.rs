use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::geodesy::{self, EllipsoidModel, EnuVector, GeodeticCoord};
use crate::projection::{Attitude, UavPose};

use super::flight_log::{FlightLog, FlightLogRecord};

/// Gimbal attitude taking effect at mission time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GimbalKeyframe {
    pub t: f64,
    #[serde(default)]
    pub roll: f64,
    pub pitch: f64,
    #[serde(default)]
    pub yaw: f64,
}

/// Satellite count taking effect at mission time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteKeyframe {
    pub t: f64,
    pub sats: u32,
}

fn default_gimbal() -> Vec<GimbalKeyframe> {
    vec![GimbalKeyframe { t: 0.0, roll: 0.0, pitch: -90.0, yaw: 0.0 }]
}

fn default_satellites() -> Vec<SatelliteKeyframe> {
    vec![SatelliteKeyframe { t: 0.0, sats: 16 }]
}

/// Piecewise-linear waypoint mission description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionPlan {
    pub waypoints: Vec<GeodeticCoord>,
    pub speed_mps: f64,
    pub rate_hz: f64,
    /// Dwell time after the last waypoint is reached.
    #[serde(default)]
    pub hover_s: f64,
    /// Ellipsoidal height of the flat ground; AGL is altitude minus this.
    #[serde(default)]
    pub ground_alt_m: f64,
    /// Heading used while no segment defines a travel direction.
    #[serde(default)]
    pub hover_yaw_deg: f64,
    #[serde(default)]
    pub start_t: f64,
    /// Step schedule; each keyframe holds until the next one.
    #[serde(default = "default_gimbal")]
    pub gimbal: Vec<GimbalKeyframe>,
    #[serde(default = "default_satellites")]
    pub satellites: Vec<SatelliteKeyframe>,
}

impl MissionPlan {
    pub fn new(waypoints: Vec<GeodeticCoord>, speed_mps: f64, rate_hz: f64) -> Self {
        MissionPlan {
            waypoints,
            speed_mps,
            rate_hz,
            hover_s: 0.0,
            ground_alt_m: 0.0,
            hover_yaw_deg: 0.0,
            start_t: 0.0,
            gimbal: default_gimbal(),
            satellites: default_satellites(),
        }
    }
}

fn step_value<T: Copy>(frames: &[(f64, T)], t: f64) -> Option<T> {
    let first = frames.first()?;
    Some(frames.iter().take_while(|(start, _)| *start <= t).last().unwrap_or(first).1)
}

struct Segment {
    from: GeodeticCoord,
    delta: EnuVector,
    start_s: f64,
    duration_s: f64,
    yaw_deg: Option<f64>,
}

/// Samples `plan` at its rate into a flight log.
///
/// The path is flown at constant speed along straight lines in each
/// segment's local tangent frame. Yaw follows the direction of travel and
/// gimbal pitch is clamped to the mount's tilt range.
pub fn generate_flight_log(plan: &MissionPlan) -> Result<FlightLog, SimError> {
    let e = EllipsoidModel::WGS84;
    if plan.waypoints.is_empty() {
        return Err(SimError::EmptyPath);
    }
    if !(plan.speed_mps > 0.0 && plan.speed_mps.is_finite()) {
        return Err(SimError::InvalidMission(format!("speed_mps {} must be > 0", plan.speed_mps)));
    }
    if !(plan.rate_hz > 0.0 && plan.rate_hz.is_finite()) {
        return Err(SimError::InvalidMission(format!("rate_hz {} must be > 0", plan.rate_hz)));
    }
    if !(plan.hover_s >= 0.0 && plan.hover_s.is_finite()) {
        return Err(SimError::InvalidMission(format!("hover_s {} must be >= 0", plan.hover_s)));
    }
    for w in &plan.waypoints {
        GeodeticCoord::new(w.lat_deg, w.lon_deg, w.alt_m)?;
        if w.alt_m < plan.ground_alt_m {
            return Err(SimError::InvalidMission(format!("waypoint altitude {} below ground", w.alt_m)));
        }
    }

    let mut segments = Vec::new();
    let mut clock = 0.0;
    for pair in plan.waypoints.windows(2) {
        let delta = geodesy::ecef_to_enu(geodesy::geodetic_to_ecef(pair[1], &e), pair[0], &e);
        let duration_s = delta.norm() / plan.speed_mps;
        let yaw_deg = (delta.horizontal_norm() > 1e-9).then(|| delta.east_m.atan2(delta.north_m).to_degrees());
        segments.push(Segment { from: pair[0], delta, start_s: clock, duration_s, yaw_deg });
        clock += duration_s;
    }
    let total_s = clock + plan.hover_s;
    let last_wp = *plan.waypoints.last().expect("checked non-empty");

    let gimbal: Vec<(f64, Attitude)> =
        plan.gimbal.iter().map(|k| (k.t, Attitude::new(k.roll, k.pitch, k.yaw))).collect();
    let sats: Vec<(f64, u32)> = plan.satellites.iter().map(|k| (k.t, k.sats)).collect();

    // Tolerance keeps e.g. 10.0 s at 1 Hz from losing its last sample to rounding.
    let n = (total_s * plan.rate_hz + 1e-9).floor() as usize;
    let mut records = Vec::with_capacity(n + 1);
    let mut yaw = plan.hover_yaw_deg;
    for k in 0..=n {
        let mission_t = k as f64 / plan.rate_hz;
        let active = segments.iter().find(|s| mission_t < s.start_s + s.duration_s);
        let position = match active {
            Some(seg) => {
                if let Some(y) = seg.yaw_deg {
                    yaw = y;
                }
                let frac = if seg.duration_s > 0.0 { (mission_t - seg.start_s) / seg.duration_s } else { 1.0 };
                let offset = EnuVector::from_vector(seg.delta.to_vector() * frac);
                geodesy::offset_geodetic(seg.from, offset, &e)?
            }
            None => {
                if let Some(y) = segments.iter().rev().find_map(|s| s.yaw_deg) {
                    yaw = y;
                }
                last_wp
            }
        };
        let t = plan.start_t + mission_t;
        let pose = UavPose::new(
            position,
            Attitude::new(0.0, 0.0, yaw),
            step_value(&gimbal, mission_t).unwrap_or_default(),
            position.alt_m - plan.ground_alt_m,
            step_value(&sats, mission_t).unwrap_or(0),
            t,
        );
        records.push(FlightLogRecord::new(t, pose));
    }
    FlightLog::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::horizontal_distance;

    fn wp(lat: f64, lon: f64) -> GeodeticCoord {
        GeodeticCoord::new(lat, lon, 300.0).unwrap()
    }

    #[test]
    fn hover_single_waypoint() {
        let mut plan = MissionPlan::new(vec![wp(41.7, -86.2)], 5.0, 1.0);
        plan.hover_s = 10.0;
        let log = generate_flight_log(&plan).unwrap();
        assert_eq!(log.len(), 11);
        assert!(log.poses().all(|p| p.position == wp(41.7, -86.2)));
        assert_eq!(log.end(), 10.0);
    }

    #[test]
    fn two_waypoints_advance_ten_meters_per_sample() {
        let e = EllipsoidModel::WGS84;
        let start = wp(41.7, -86.2);
        let end = geodesy::offset_geodetic(start, EnuVector::new(0.0, 100.0, 0.0), &e).unwrap();
        let log = generate_flight_log(&MissionPlan::new(vec![start, end], 10.0, 1.0)).unwrap();
        assert_eq!(log.len(), 11);
        for (k, r) in log.records().iter().enumerate() {
            let d = horizontal_distance(start, r.pose.position, &e);
            assert!((d - 10.0 * k as f64).abs() < 1e-6, "record {k}: {d}");
            let yaw = r.pose.uav_attitude.yaw_deg;
            assert!(yaw.min(360.0 - yaw) < 1e-9, "yaw {yaw}");
        }
    }

    #[test]
    fn yaw_faces_travel_direction() {
        let e = EllipsoidModel::WGS84;
        let start = wp(41.7, -86.2);
        let east = geodesy::offset_geodetic(start, EnuVector::new(50.0, 0.0, 0.0), &e).unwrap();
        let log = generate_flight_log(&MissionPlan::new(vec![start, east], 10.0, 2.0)).unwrap();
        assert!(log.poses().all(|p| (p.uav_attitude.yaw_deg - 90.0).abs() < 1e-6));
    }

    #[test]
    fn gimbal_pitch_is_clamped_to_tilt_range() {
        let mut plan = MissionPlan::new(vec![wp(41.7, -86.2)], 5.0, 1.0);
        plan.hover_s = 5.0;
        plan.gimbal = vec![GimbalKeyframe { t: 0.0, roll: 0.0, pitch: -100.0, yaw: 0.0 }];
        let log = generate_flight_log(&plan).unwrap();
        assert!(log.poses().all(|p| p.gimbal_attitude.pitch_deg == -90.0));
    }

    #[test]
    fn schedules_step_over_time() {
        let mut plan = MissionPlan::new(vec![wp(41.7, -86.2)], 5.0, 1.0);
        plan.hover_s = 4.0;
        plan.ground_alt_m = 250.0;
        plan.satellites = vec![SatelliteKeyframe { t: 0.0, sats: 16 }, SatelliteKeyframe { t: 2.0, sats: 13 }];
        plan.gimbal = vec![
            GimbalKeyframe { t: 0.0, roll: 0.0, pitch: -90.0, yaw: 0.0 },
            GimbalKeyframe { t: 3.0, roll: 0.0, pitch: -30.0, yaw: 0.0 },
        ];
        let log = generate_flight_log(&plan).unwrap();
        let sats: Vec<u32> = log.poses().map(|p| p.satellites).collect();
        assert_eq!(sats, [16, 16, 13, 13, 13]);
        let pitch: Vec<f64> = log.poses().map(|p| p.gimbal_attitude.pitch_deg).collect();
        assert_eq!(pitch, [-90.0, -90.0, -90.0, -30.0, -30.0]);
        assert!(log.poses().all(|p| (p.agl_m - 50.0).abs() < 1e-9));
    }

    #[test]
    fn invalid_plans() {
        assert_eq!(generate_flight_log(&MissionPlan::new(vec![], 5.0, 1.0)), Err(SimError::EmptyPath));
        assert!(matches!(generate_flight_log(&MissionPlan::new(vec![wp(0.0, 0.0)], 0.0, 1.0)), Err(SimError::InvalidMission(_))));
        assert!(matches!(generate_flight_log(&MissionPlan::new(vec![wp(0.0, 0.0)], 1.0, -1.0)), Err(SimError::InvalidMission(_))));
    }

    #[test]
    fn plan_json_uses_short_coordinate_names() {
        let json = r#"{"waypoints":[{"lat":41.7,"lon":-86.2,"alt":240}],"speed_mps":5,"rate_hz":1,"hover_s":2}"#;
        let plan: MissionPlan = serde_json::from_str(json).unwrap();
        assert_eq!(plan.gimbal, default_gimbal());
        assert_eq!(generate_flight_log(&plan).unwrap().len(), 3);
    }
}
