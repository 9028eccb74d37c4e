use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use aerotag_core::geodesy::{self, EcefCoord, EllipsoidModel, EnuVector, GeodeticCoord};
use aerotag_core::projection::{self, GimbalFrame};
use aerotag_core::sim::{
    calibration_hover_plan, calibration_target, generate_flight_log, AccuracyExperiment, AccuracyReport, FlightLog,
    FlightLogLine, FlightLogRecord, MissionPlan, NoiseModel, PoseLookup,
};
use aerotag_core::store;
use aerotag_core::{CameraIntrinsics, Execution, GroundModel, PixelCoord, ProjectionConfig, UavPose};
use aerotag_server::{Hub, HubConfig, Server};
use serde::Serialize;

use crate::args::{AccuracyArgs, CameraArgs, ConvertArgs, Frame, GeolocateArgs, ProjectArgs, ReplayArgs, ServeArgs, SimlogArgs};
use crate::output;
use crate::CliError;

pub const SEED_ENV: &str = "AEROTAG_SEED";

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn parse_triple(s: &str, what: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || CliError::Usage(format!("{what} must be three comma-separated numbers, got `{s}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| bad())?;
    }
    Ok(out)
}

fn parse_geodetic(s: &str, what: &str) -> Result<GeodeticCoord, CliError> {
    let [lat, lon, alt] = parse_triple(s, what)?;
    GeodeticCoord::new(lat, lon, alt).map_err(data)
}

fn intrinsics(c: &CameraArgs) -> Result<CameraIntrinsics, CliError> {
    CameraIntrinsics::from_fov(c.fov, c.fov_mode, c.width, c.height).map_err(|e| CliError::Usage(e.to_string()))
}

fn projection_config(c: &CameraArgs) -> ProjectionConfig {
    ProjectionConfig {
        ground_model: if c.paper_faithful { GroundModel::UpZero } else { c.ground_model },
        gimbal_frame: if c.stabilized { GimbalFrame::Stabilized } else { GimbalFrame::BodyRelative },
        ellipsoid: EllipsoidModel::WGS84,
    }
}

fn lookup(interpolate: bool) -> PoseLookup {
    if interpolate {
        PoseLookup::Linear
    } else {
        PoseLookup::Nearest
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(data)
        }
    }
}

pub fn convert(a: &ConvertArgs) -> Result<String, CliError> {
    let e = EllipsoidModel::WGS84;
    let needs_ref = a.from == Frame::Enu || a.to == Frame::Enu;
    let reference = match (&a.reference, needs_ref) {
        (Some(r), _) => Some(parse_geodetic(r, "--ref")?),
        (None, true) => return Err(CliError::Usage("ENU conversions need --ref LAT,LON,ALT".into())),
        (None, false) => None,
    };
    let [x, y, z] = [a.values[0], a.values[1], a.values[2]];
    let ecef = match a.from {
        Frame::Geodetic => geodesy::geodetic_to_ecef(GeodeticCoord::new(x, y, z).map_err(data)?, &e),
        Frame::Ecef => EcefCoord::new(x, y, z),
        Frame::Enu => geodesy::enu_to_ecef(EnuVector::new(x, y, z), reference.expect("checked"), &e),
    };
    let (keys, values) = match a.to {
        Frame::Geodetic => {
            let g = geodesy::ecef_to_geodetic(ecef, &e).map_err(data)?;
            (["lat", "lon", "alt"], [g.lat_deg, g.lon_deg, g.alt_m])
        }
        Frame::Ecef => (["x", "y", "z"], [ecef.x_m, ecef.y_m, ecef.z_m]),
        Frame::Enu => {
            let v = geodesy::ecef_to_enu(ecef, reference.expect("checked"), &e);
            (["east", "north", "up"], [v.east_m, v.north_m, v.up_m])
        }
    };
    if a.json {
        let map: serde_json::Map<String, serde_json::Value> =
            keys.into_iter().zip(values).map(|(k, v)| (k.to_string(), v.into())).collect();
        Ok(output::json(&map))
    } else {
        Ok(output::join(&values))
    }
}

#[derive(Serialize)]
struct GeoOut {
    lat: f64,
    lon: f64,
    alt: f64,
}

pub fn geolocate(a: &GeolocateArgs) -> Result<String, CliError> {
    let log = FlightLog::read_file(&a.log).map_err(|e| CliError::Data(format!("{}: {e}", a.log.display())))?;
    let pose = log.pose_at(a.t, lookup(a.interpolate)).map_err(data)?;
    let intr = intrinsics(&a.camera)?;
    let px = PixelCoord::new(a.pixel[0], a.pixel[1]);
    let g = projection::pixel_to_geolocation(&pose, &intr, px, &projection_config(&a.camera)).map_err(data)?;
    Ok(output::json(&GeoOut { lat: g.lat_deg, lon: g.lon_deg, alt: g.alt_m }))
}

#[derive(Serialize)]
struct PixelOut {
    u: f64,
    v: f64,
    visible: bool,
    radius_px: f64,
}

fn pose_from_args(log: Option<&Path>, t: Option<f64>, pose: Option<&str>, interpolate: bool) -> Result<UavPose, CliError> {
    if let Some(json) = pose {
        let line: FlightLogLine = serde_json::from_str(json).map_err(|e| CliError::Data(format!("--pose: {e}")))?;
        return FlightLogRecord::try_from(line).map(|r| r.pose).map_err(|e| CliError::Data(format!("--pose: {e}")));
    }
    let (Some(path), Some(t)) = (log, t) else {
        return Err(CliError::Usage("give --pose JSON or --log PATH with --t".into()));
    };
    let log = FlightLog::read_file(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    log.pose_at(t, lookup(interpolate)).map_err(data)
}

pub fn project(a: &ProjectArgs) -> Result<String, CliError> {
    let pose = pose_from_args(a.log.as_deref(), a.t, a.pose.as_deref(), a.interpolate)?;
    let poi = parse_geodetic(&a.poi, "--poi")?;
    let intr = intrinsics(&a.camera)?;
    let cfg = projection_config(&a.camera);
    let r = projection::geolocation_to_pixel(&pose, &intr, poi, &cfg);
    let radius_px = projection::radius_to_pixels(&pose, &intr, poi, a.unc, &cfg);
    Ok(output::json(&PixelOut { u: r.pixel.u, v: r.pixel.v, visible: r.visible, radius_px }))
}

pub fn simlog(a: &SimlogArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.mission).map_err(|e| CliError::Data(format!("{}: {e}", a.mission.display())))?;
    let plan: MissionPlan =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", a.mission.display())))?;
    let log = generate_flight_log(&plan).map_err(data)?;
    let mut buf = Vec::new();
    log.write(&mut buf).map_err(data)?;
    write_out(a.out.as_deref(), std::str::from_utf8(&buf).expect("flight log is UTF-8"))
}

/// `AEROTAG_SEED`, when set, replaces the flag value.
pub fn effective_seed(flag: u64, env: Option<&str>) -> Result<u64, CliError> {
    match env {
        None => Ok(flag),
        Some(s) => s.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{s}` is not an unsigned integer"))),
    }
}

pub struct AccuracyOutput {
    pub overall: AccuracyReport,
    pub tiers: Vec<AccuracyReport>,
}

pub fn run_accuracy(a: &AccuracyArgs, seed: u64) -> Result<AccuracyOutput, CliError> {
    let (log, default_target) = match &a.log {
        Some(path) => {
            let log = FlightLog::read_file(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let first = log.records()[0].pose;
            let below = GeodeticCoord { alt_m: first.position.alt_m - first.agl_m, ..first.position };
            (log, below)
        }
        None => (generate_flight_log(&calibration_hover_plan()).map_err(data)?, calibration_target()),
    };
    let target = match &a.target {
        Some(t) => parse_geodetic(t, "--target")?,
        None => default_target,
    };
    let noise = match a.sigma {
        Some(s) => NoiseModel::uniform(s, seed).map_err(|e| CliError::Usage(e.to_string()))?,
        None => NoiseModel::calibrated(seed),
    };
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let mut exp = AccuracyExperiment::new(target, &log, intrinsics(&a.camera)?, &noise, a.trials)
        .with_execution(if a.sequential { Execution::Sequential } else { Execution::Parallel });
    exp.projection = projection_config(&a.camera);
    let report = exp.run_tiered().map_err(data)?;
    Ok(AccuracyOutput { overall: report.overall, tiers: report.tiers })
}

pub fn accuracy_table(out: &AccuracyOutput) -> String {
    let mut s = format!("{:<8} {:<6} {:>7} {:>12} {:>12} {:>12}\n", "scope", "tier", "trials", "mean_m", "cep68_m", "cep99_m");
    let mut row = |scope: &str, r: &AccuracyReport| {
        s.push_str(&format!(
            "{:<8} {:<6} {:>7} {:>12} {:>12} {:>12}\n",
            scope,
            r.tier,
            r.trials,
            output::num(r.mean_m),
            output::num(r.cep68_m),
            output::num(r.cep99_m)
        ));
    };
    row("overall", &out.overall);
    if out.tiers.len() > 1 {
        for t in &out.tiers {
            row("tier", t);
        }
    }
    s
}

pub fn accuracy(a: &AccuracyArgs, seed: u64) -> Result<String, CliError> {
    let out = run_accuracy(a, seed)?;
    let report = if a.emit_samples { out.overall.clone() } else { out.overall.clone().without_samples() };
    let json = output::json(&report);
    if let Some(path) = &a.out {
        write_out(Some(path), &format!("{json}\n"))?;
    }
    Ok(if a.json { json } else { accuracy_table(&out).trim_end().to_string() })
}

pub fn hub_config(a: &ServeArgs) -> Result<HubConfig, CliError> {
    let mut flight_logs = BTreeMap::new();
    for spec in &a.flight_logs {
        let Some((id, path)) = spec.split_once('=') else {
            return Err(CliError::Usage(format!("--flight-log expects UAV_ID=PATH, got `{spec}`")));
        };
        let log = FlightLog::read_file(Path::new(path)).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
        flight_logs.insert(id.to_string(), log);
    }
    let noise = match a.sigma {
        Some(s) => NoiseModel::uniform(s, 0).map_err(|e| CliError::Usage(e.to_string()))?,
        None => NoiseModel::calibrated(0),
    };
    Ok(HubConfig {
        log_path: a.event_log.clone(),
        flight_logs,
        noise,
        intrinsics: intrinsics(&a.camera)?,
        projection: projection_config(&a.camera),
        pose_lookup: lookup(a.interpolate),
        queue_capacity: a.queue_capacity,
        ..HubConfig::default()
    })
}

pub fn serve(a: &ServeArgs) -> Result<(), CliError> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let hub = Hub::new(hub_config(a)?).map_err(data)?;
    let runtime = tokio::runtime::Runtime::new().map_err(data)?;
    runtime.block_on(async {
        let server = Server::bind((a.host.as_str(), a.port), Arc::new(hub)).await.map_err(data)?;
        eprintln!("aerotag hub listening on {}", server.url());
        server.run().await.map_err(data)
    })
}

pub fn replay(a: &ReplayArgs) -> Result<(), CliError> {
    let events = store::read_log_file(&a.log).map_err(|e| CliError::Data(format!("{}: {e}", a.log.display())))?;
    let st = store::replay_log(&events).map_err(data)?;
    write_out(a.out.as_deref(), &format!("{}\n", st.snapshot_json()))
}
