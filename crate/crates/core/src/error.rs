use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesyError {
    #[error("coordinate component is not finite")]
    NonFinite,
    #[error("latitude {0} is outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("degenerate input: point too close to the Earth center")]
    DegenerateInput,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProjectionError {
    #[error("pixel ({u}, {v}) is outside the {width}x{height} frame")]
    OutOfFrame { u: f64, v: f64, width: u32, height: u32 },
    #[error("ray does not descend to the ground")]
    NoGroundIntersection,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("unknown POI id `{0}`")]
    UnknownId(String),
    #[error("POI id `{0}` already exists")]
    DuplicateId(String),
    #[error("malformed event: {0}")]
    MalformedEvent(String),
    #[error("corrupt event log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("event log I/O: {0}")]
    Io(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("mission has no waypoints")]
    EmptyPath,
    #[error("invalid mission: {0}")]
    InvalidMission(String),
    #[error("invalid noise model: {0}")]
    InvalidNoiseModel(String),
    #[error("no percentile of an empty sample set")]
    EmptySamples,
    #[error("target is not visible from any pose in the flight log")]
    TargetNeverVisible,
    #[error("t = {t} is outside the flight log range [{start}, {end}]")]
    OutOfLogRange { t: f64, start: f64, end: f64 },
    #[error("flight log line {line}: {reason}")]
    BadLogRecord { line: usize, reason: String },
    #[error("I/O: {0}")]
    Io(String),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}
