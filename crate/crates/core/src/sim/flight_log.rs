use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::geodesy::GeodeticCoord;
use crate::projection::{Attitude, UavPose};

/// One telemetry sample: time plus the full camera pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlightLogLine", into = "FlightLogLine")]
pub struct FlightLogRecord {
    pub t: f64,
    pub pose: UavPose,
}

/// Wire layout of a flight-log line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightLogLine {
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
    pub agl: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub g_roll: f64,
    pub g_pitch: f64,
    pub g_yaw: f64,
    pub sats: u32,
}

impl TryFrom<FlightLogLine> for FlightLogRecord {
    type Error = String;

    fn try_from(l: FlightLogLine) -> Result<Self, Self::Error> {
        if !l.t.is_finite() {
            return Err(format!("t {} is not finite", l.t));
        }
        let position = GeodeticCoord::new(l.lat, l.lon, l.alt).map_err(|e| e.to_string())?;
        if !(l.agl >= 0.0 && l.agl.is_finite()) {
            return Err(format!("agl {} must be a finite value >= 0", l.agl));
        }
        let attitudes = [l.roll, l.pitch, l.yaw, l.g_roll, l.g_pitch, l.g_yaw];
        if attitudes.iter().any(|a| !a.is_finite()) {
            return Err("attitude angle is not finite".into());
        }
        let pose = UavPose::new(
            position,
            Attitude::new(l.roll, l.pitch, l.yaw),
            Attitude::new(l.g_roll, l.g_pitch, l.g_yaw),
            l.agl,
            l.sats,
            l.t,
        );
        Ok(FlightLogRecord { t: l.t, pose })
    }
}

impl From<FlightLogRecord> for FlightLogLine {
    fn from(r: FlightLogRecord) -> Self {
        let p = r.pose;
        FlightLogLine {
            t: r.t,
            lat: p.position.lat_deg,
            lon: p.position.lon_deg,
            alt: p.position.alt_m,
            agl: p.agl_m,
            roll: p.uav_attitude.roll_deg,
            pitch: p.uav_attitude.pitch_deg,
            yaw: p.uav_attitude.yaw_deg,
            g_roll: p.gimbal_attitude.roll_deg,
            g_pitch: p.gimbal_attitude.pitch_deg,
            g_yaw: p.gimbal_attitude.yaw_deg,
            sats: p.satellites,
        }
    }
}

impl FlightLogRecord {
    pub fn new(t: f64, mut pose: UavPose) -> Self {
        pose.timestamp_s = t;
        FlightLogRecord { t, pose }
    }
}

/// How a pose is chosen for a time between two records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoseLookup {
    /// Nearest record; exact midpoints resolve to the earlier one.
    #[default]
    Nearest,
    Linear,
}

/// Time-ordered flight telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightLog {
    records: Vec<FlightLogRecord>,
}

impl FlightLog {
    pub fn new(records: Vec<FlightLogRecord>) -> Result<Self, SimError> {
        if records.is_empty() {
            return Err(SimError::BadLogRecord { line: 0, reason: "flight log is empty".into() });
        }
        for (i, w) in records.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(SimError::BadLogRecord {
                    line: i + 2,
                    reason: format!("t {} does not increase after {}", w[1].t, w[0].t),
                });
            }
        }
        Ok(FlightLog { records })
    }

    pub fn records(&self) -> &[FlightLogRecord] {
        &self.records
    }

    pub fn poses(&self) -> impl Iterator<Item = &UavPose> {
        self.records.iter().map(|r| &r.pose)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.records[0].t
    }

    pub fn end(&self) -> f64 {
        self.records[self.records.len() - 1].t
    }

    pub fn pose_at(&self, t: f64, lookup: PoseLookup) -> Result<UavPose, SimError> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(SimError::OutOfLogRange { t, start: self.start(), end: self.end() });
        }
        let after = self.records.partition_point(|r| r.t <= t);
        let prev = &self.records[after - 1];
        let Some(next) = self.records.get(after) else {
            return Ok(prev.pose);
        };
        match lookup {
            PoseLookup::Nearest => {
                let pick = if t - prev.t <= next.t - t { prev } else { next };
                Ok(pick.pose)
            }
            PoseLookup::Linear => Ok(interpolate(prev, next, t)),
        }
    }

    pub fn read(reader: impl BufRead) -> Result<Self, SimError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FlightLogRecord = serde_json::from_str(&line)
                .map_err(|e| SimError::BadLogRecord { line: i + 1, reason: e.to_string() })?;
            records.push(rec);
        }
        Self::new(records)
    }

    pub fn read_file(path: &Path) -> Result<Self, SimError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn write(&self, mut w: impl Write) -> Result<(), SimError> {
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| SimError::Io(e.to_string()))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<(), SimError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

fn lerp_angle(a: f64, b: f64, s: f64) -> f64 {
    let delta = (b - a + 540.0).rem_euclid(360.0) - 180.0;
    a + delta * s
}

fn lerp_attitude(a: Attitude, b: Attitude, s: f64) -> Attitude {
    Attitude::new(
        lerp_angle(a.roll_deg, b.roll_deg, s),
        lerp_angle(a.pitch_deg, b.pitch_deg, s),
        lerp_angle(a.yaw_deg, b.yaw_deg, s),
    )
}

fn interpolate(prev: &FlightLogRecord, next: &FlightLogRecord, t: f64) -> UavPose {
    let s = (t - prev.t) / (next.t - prev.t);
    let (a, b) = (&prev.pose, &next.pose);
    let position = GeodeticCoord {
        lat_deg: lerp(a.position.lat_deg, b.position.lat_deg, s),
        lon_deg: crate::geodesy::normalize_lon_deg(lerp_angle(a.position.lon_deg, b.position.lon_deg, s)),
        alt_m: lerp(a.position.alt_m, b.position.alt_m, s),
    };
    UavPose::new(
        position,
        lerp_attitude(a.uav_attitude, b.uav_attitude, s),
        lerp_attitude(a.gimbal_attitude, b.gimbal_attitude, s),
        lerp(a.agl_m, b.agl_m, s),
        if s <= 0.5 { a.satellites } else { b.satellites },
        t,
    )
}
