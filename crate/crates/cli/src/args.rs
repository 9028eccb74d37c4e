use std::path::PathBuf;

use aerotag_core::projection::FovConvention;
use aerotag_core::GroundModel;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "aerotag", version, about = "Geotag UAV camera pixels, simulate GPS-noise accuracy and run the POI hub")]
pub struct Cli {
    /// key=value file supplying defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a coordinate between geodetic, ECEF and ENU.
    #[command(allow_negative_numbers = true)]
    Convert(ConvertArgs),
    /// Geolocate a pixel seen at time t in a flight log.
    #[command(allow_negative_numbers = true)]
    Geolocate(GeolocateArgs),
    /// Project a geolocation into the camera at a pose.
    #[command(allow_negative_numbers = true)]
    Project(ProjectArgs),
    /// Generate a flight log from a JSON mission plan.
    Simlog(SimlogArgs),
    /// Run the Monte-Carlo geotagging accuracy experiment.
    #[command(allow_negative_numbers = true)]
    Accuracy(AccuracyArgs),
    /// Start the WebSocket POI hub.
    Serve(ServeArgs),
    /// Rebuild the POI snapshot from an event log.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Frame {
    Geodetic,
    Ecef,
    Enu,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, value_enum, default_value = "geodetic")]
    pub from: Frame,
    #[arg(long, value_enum)]
    pub to: Frame,
    /// ENU origin as lat,lon,alt; required when either side is ENU.
    #[arg(long = "ref", value_name = "LAT,LON,ALT")]
    pub reference: Option<String>,
    #[arg(long)]
    pub json: bool,
    /// lat lon alt | x y z | east north up
    #[arg(num_args = 3, value_names = ["A", "B", "C"], required = true)]
    pub values: Vec<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct CameraArgs {
    /// Lens field of view in degrees.
    #[arg(long, default_value_t = 83.0)]
    pub fov: f64,
    #[arg(long, default_value = "horizontal", value_parser = parse_fov_mode)]
    pub fov_mode: FovConvention,
    #[arg(long, default_value_t = 1920)]
    pub width: u32,
    #[arg(long, default_value_t = 1080)]
    pub height: u32,
    #[arg(long, default_value = "plane", value_parser = parse_ground_model)]
    pub ground_model: GroundModel,
    /// Same as --ground-model up-zero.
    #[arg(long)]
    pub paper_faithful: bool,
    /// Gimbal angles are world-referenced rather than airframe-relative.
    #[arg(long)]
    pub stabilized: bool,
}

fn parse_fov_mode(s: &str) -> Result<FovConvention, String> {
    s.parse()
}

fn parse_ground_model(s: &str) -> Result<GroundModel, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct GeolocateArgs {
    #[arg(long, value_name = "PATH")]
    pub log: PathBuf,
    #[arg(long)]
    pub t: f64,
    #[arg(long, num_args = 2, value_names = ["U", "V"], required = true)]
    pub pixel: Vec<f64>,
    /// Interpolate between log records instead of taking the nearest.
    #[arg(long)]
    pub interpolate: bool,
    #[command(flatten)]
    pub camera: CameraArgs,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Flight log to take the pose from (with --t).
    #[arg(long, value_name = "PATH", conflicts_with = "pose", requires = "t")]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Pose as one flight-log JSON line.
    #[arg(long, value_name = "JSON")]
    pub pose: Option<String>,
    #[arg(long, value_name = "LAT,LON,ALT")]
    pub poi: String,
    /// Ground uncertainty to convert to a pixel radius.
    #[arg(long, default_value_t = 0.0)]
    pub unc: f64,
    #[arg(long)]
    pub interpolate: bool,
    #[command(flatten)]
    pub camera: CameraArgs,
}

#[derive(Debug, Args)]
pub struct SimlogArgs {
    #[arg(long, value_name = "PATH")]
    pub mission: PathBuf,
    /// Output path; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AccuracyArgs {
    /// Flight log; defaults to the built-in calibration hover.
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
    /// Ground-truth target; defaults to the point below the first pose.
    #[arg(long, value_name = "LAT,LON,ALT")]
    pub target: Option<String>,
    /// Uniform per-axis GPS sigma in meters instead of the calibrated tiers.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Overridden by the AEROTAG_SEED environment variable.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include every per-trial error in the JSON report.
    #[arg(long)]
    pub emit_samples: bool,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report to this path.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub camera: CameraArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = aerotag_server::DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Event log to replay and append to; in-memory when omitted.
    #[arg(long, value_name = "PATH")]
    pub event_log: Option<PathBuf>,
    /// Flight log for a UAV, as UAV_ID=PATH. Repeatable.
    #[arg(long = "flight-log", value_name = "UAV_ID=PATH")]
    pub flight_logs: Vec<String>,
    /// Uniform per-axis GPS sigma used for annotation uncertainty.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub interpolate: bool,
    #[arg(long, default_value_t = 1024)]
    pub queue_capacity: usize,
    #[command(flatten)]
    pub camera: CameraArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long, value_name = "PATH")]
    pub log: PathBuf,
    /// Output path; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}
