//! Pinhole camera model for a gimballed UAV camera.
//!
//! Frames used here:
//! - camera: x right, y down, z along the optical axis;
//! - mount / body: forward, right, down;
//! - world: ENU tangent frame at the UAV position.
//!
//! Attitudes are yaw-pitch-roll (intrinsic Z-Y-X) with yaw measured
//! clockwise from North, pitch positive nose-up and roll positive
//! right-side-down. The camera-to-world rotation applies the gimbal
//! rotation (camera to body) first and the UAV attitude (body to world)
//! second.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::ProjectionError;
use crate::geodesy::{self, EllipsoidModel, EnuVector, GeodeticCoord};

pub const GIMBAL_PITCH_MIN_DEG: f64 = -90.0;
pub const GIMBAL_PITCH_MAX_DEG: f64 = 0.0;

/// Roll, pitch and yaw in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Attitude {
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
}

fn wrap_180(deg: f64) -> f64 {
    let mut d = deg % 360.0;
    if d > 180.0 {
        d -= 360.0;
    } else if d < -180.0 {
        d += 360.0;
    }
    d
}

impl Attitude {
    /// Builds a normalized attitude: yaw in [0, 360), roll and pitch in [−180, 180].
    pub fn new(roll_deg: f64, pitch_deg: f64, yaw_deg: f64) -> Self {
        let yaw = yaw_deg.rem_euclid(360.0);
        Attitude {
            roll_deg: wrap_180(roll_deg),
            pitch_deg: wrap_180(pitch_deg),
            // rem_euclid can round up to exactly 360 for tiny negative input
            yaw_deg: if yaw >= 360.0 { 0.0 } else { yaw },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.roll_deg.is_finite() && self.pitch_deg.is_finite() && self.yaw_deg.is_finite()
    }

    /// Rotation taking forward-right-down components to North-East-Down.
    pub fn frd_to_ned(&self) -> Matrix3<f64> {
        let (sr, cr) = self.roll_deg.to_radians().sin_cos();
        let (sp, cp) = self.pitch_deg.to_radians().sin_cos();
        let (sy, cy) = self.yaw_deg.to_radians().sin_cos();
        let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
        let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
        rz * ry * rx
    }
}

/// Which field of view a quoted lens angle refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FovConvention {
    #[default]
    Horizontal,
    Vertical,
    Diagonal,
}

impl std::str::FromStr for FovConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "horizontal" | "h" => Ok(FovConvention::Horizontal),
            "vertical" | "v" => Ok(FovConvention::Vertical),
            "diagonal" | "d" => Ok(FovConvention::Diagonal),
            other => Err(format!("unknown FOV convention `{other}` (expected horizontal, vertical or diagonal)")),
        }
    }
}

/// Square-pixel pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fov_h_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
}

impl Default for CameraIntrinsics {
    /// 83° lens on a 1920x1080 stream.
    fn default() -> Self {
        CameraIntrinsics { fov_h_deg: 83.0, width_px: 1920, height_px: 1080 }
    }
}

impl CameraIntrinsics {
    pub fn new(fov_h_deg: f64, width_px: u32, height_px: u32) -> Result<Self, ProjectionError> {
        let intr = CameraIntrinsics { fov_h_deg, width_px, height_px };
        intr.validate()?;
        Ok(intr)
    }

    /// Builds intrinsics from a lens angle quoted under `convention`.
    pub fn from_fov(
        fov_deg: f64,
        convention: FovConvention,
        width_px: u32,
        height_px: u32,
    ) -> Result<Self, ProjectionError> {
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(ProjectionError::InvalidIntrinsics(format!("fov {fov_deg} not in (0, 180)")));
        }
        let (w, h) = (f64::from(width_px), f64::from(height_px));
        let half_tan = (fov_deg.to_radians() / 2.0).tan();
        let half_tan_h = match convention {
            FovConvention::Horizontal => half_tan,
            FovConvention::Vertical => half_tan * w / h,
            FovConvention::Diagonal => half_tan * w / w.hypot(h),
        };
        Self::new(2.0 * half_tan_h.atan().to_degrees(), width_px, height_px)
    }

    pub fn validate(&self) -> Result<(), ProjectionError> {
        if !(self.fov_h_deg > 0.0 && self.fov_h_deg < 180.0) {
            return Err(ProjectionError::InvalidIntrinsics(format!("fov_h_deg {} not in (0, 180)", self.fov_h_deg)));
        }
        if self.width_px == 0 || self.height_px == 0 {
            return Err(ProjectionError::InvalidIntrinsics("frame dimensions must be positive".into()));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        f64::from(self.width_px) / 2.0 / (self.fov_h_deg.to_radians() / 2.0).tan()
    }

    pub fn fov_v_deg(&self) -> f64 {
        let ratio = f64::from(self.height_px) / f64::from(self.width_px);
        2.0 * ((self.fov_h_deg.to_radians() / 2.0).tan() * ratio).atan().to_degrees()
    }

    pub fn center(&self) -> PixelCoord {
        PixelCoord { u: f64::from(self.width_px) / 2.0, v: f64::from(self.height_px) / 2.0 }
    }

    pub fn contains(&self, px: PixelCoord) -> bool {
        (0.0..=f64::from(self.width_px)).contains(&px.u) && (0.0..=f64::from(self.height_px)).contains(&px.v)
    }

    /// Intrinsics for a digital zoom factor applied to this view.
    pub fn zoomed(&self, factor: f64) -> Result<Self, ProjectionError> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(ProjectionError::InvalidIntrinsics(format!("zoom factor {factor}")));
        }
        let half_tan = (self.fov_h_deg.to_radians() / 2.0).tan() / factor;
        Self::new(2.0 * half_tan.atan().to_degrees(), self.width_px, self.height_px)
    }
}

/// Image position; `u` is the column from the left edge, `v` the row from the top.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub const fn new(u: f64, v: f64) -> Self {
        PixelCoord { u, v }
    }

    pub fn distance(&self, other: PixelCoord) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Everything known about the camera at the instant a frame was captured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavPose {
    pub position: GeodeticCoord,
    pub uav_attitude: Attitude,
    pub gimbal_attitude: Attitude,
    pub agl_m: f64,
    pub satellites: u32,
    pub timestamp_s: f64,
}

impl UavPose {
    /// Builds a pose, normalizing attitudes and clamping gimbal pitch to the
    /// mechanical tilt range.
    pub fn new(
        position: GeodeticCoord,
        uav_attitude: Attitude,
        gimbal_attitude: Attitude,
        agl_m: f64,
        satellites: u32,
        timestamp_s: f64,
    ) -> Self {
        let uav_attitude = Attitude::new(uav_attitude.roll_deg, uav_attitude.pitch_deg, uav_attitude.yaw_deg);
        let mut gimbal_attitude =
            Attitude::new(gimbal_attitude.roll_deg, gimbal_attitude.pitch_deg, gimbal_attitude.yaw_deg);
        gimbal_attitude.pitch_deg = clamp_gimbal_pitch(gimbal_attitude.pitch_deg);
        UavPose { position, uav_attitude, gimbal_attitude, agl_m: agl_m.max(0.0), satellites, timestamp_s }
    }

    pub fn validate(&self) -> Result<(), ProjectionError> {
        if !self.position.is_valid() || !self.uav_attitude.is_finite() || !self.gimbal_attitude.is_finite() {
            return Err(crate::GeodesyError::NonFinite.into());
        }
        if !(self.agl_m >= 0.0 && self.agl_m.is_finite()) {
            return Err(ProjectionError::InvalidIntrinsics(format!("agl_m {} must be >= 0", self.agl_m)));
        }
        Ok(())
    }
}

pub fn clamp_gimbal_pitch(pitch_deg: f64) -> f64 {
    pitch_deg.clamp(GIMBAL_PITCH_MIN_DEG, GIMBAL_PITCH_MAX_DEG)
}

/// Surface that camera rays are intersected with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundModel {
    /// Horizontal tangent plane `agl_m` below the UAV.
    #[default]
    Plane,
    /// Plane intersection for east/north, then the up component is set to
    /// zero before the ENU to ECEF transform, placing the POI at the UAV's
    /// own height.
    UpZero,
}

impl std::str::FromStr for GroundModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plane" => Ok(GroundModel::Plane),
            "up-zero" | "u0" => Ok(GroundModel::UpZero),
            other => Err(format!("unknown ground model `{other}` (expected plane or up-zero)")),
        }
    }
}

/// Frame in which the gimbal attitude is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GimbalFrame {
    /// Gimbal angles relative to the airframe.
    #[default]
    BodyRelative,
    /// Gimbal angles already expressed in the world frame (3-axis stabilized).
    Stabilized,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProjectionConfig {
    pub ground_model: GroundModel,
    pub gimbal_frame: GimbalFrame,
    pub ellipsoid: EllipsoidModel,
}

/// Result of projecting a geolocation into a camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reprojection {
    pub pixel: PixelCoord,
    /// In front of the camera and inside the frame. When false, `pixel` is
    /// clamped to the frame edge in the direction of the point.
    pub visible: bool,
}

const CAMERA_TO_FRD: Matrix3<f64> = Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
const NED_TO_ENU: Matrix3<f64> = Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0);

/// Rotation taking camera-frame components to the ENU frame at the UAV.
pub fn camera_to_enu(pose: &UavPose, cfg: &ProjectionConfig) -> Matrix3<f64> {
    let mount = pose.gimbal_attitude.frd_to_ned() * CAMERA_TO_FRD;
    let world = match cfg.gimbal_frame {
        GimbalFrame::BodyRelative => pose.uav_attitude.frd_to_ned() * mount,
        GimbalFrame::Stabilized => mount,
    };
    NED_TO_ENU * world
}

fn pixel_direction_camera(intr: &CameraIntrinsics, px: PixelCoord) -> Vector3<f64> {
    let c = intr.center();
    let f = intr.focal_px();
    Vector3::new((px.u - c.u) / f, (px.v - c.v) / f, 1.0).normalize()
}

/// Unit ENU direction of the ray through `px`.
pub fn camera_ray(
    pose: &UavPose,
    intr: &CameraIntrinsics,
    px: PixelCoord,
    cfg: &ProjectionConfig,
) -> Result<EnuVector, ProjectionError> {
    if !intr.contains(px) {
        return Err(ProjectionError::OutOfFrame { u: px.u, v: px.v, width: intr.width_px, height: intr.height_px });
    }
    let dir = camera_to_enu(pose, cfg) * pixel_direction_camera(intr, px);
    Ok(EnuVector::from_vector(dir.normalize()))
}

/// ENU offset from the UAV to the ground point seen at `px`.
pub fn ground_intersection(
    pose: &UavPose,
    intr: &CameraIntrinsics,
    px: PixelCoord,
    cfg: &ProjectionConfig,
) -> Result<EnuVector, ProjectionError> {
    let ray = camera_ray(pose, intr, px, cfg)?;
    if ray.up_m >= 0.0 {
        return Err(ProjectionError::NoGroundIntersection);
    }
    let range = pose.agl_m / -ray.up_m;
    let hit = EnuVector::new(ray.east_m * range, ray.north_m * range, -pose.agl_m);
    if !(hit.east_m.is_finite() && hit.north_m.is_finite()) {
        return Err(ProjectionError::NoGroundIntersection);
    }
    Ok(match cfg.ground_model {
        GroundModel::Plane => hit,
        GroundModel::UpZero => EnuVector { up_m: 0.0, ..hit },
    })
}

/// Geolocates the ground point under pixel `px`.
pub fn pixel_to_geolocation(
    pose: &UavPose,
    intr: &CameraIntrinsics,
    px: PixelCoord,
    cfg: &ProjectionConfig,
) -> Result<GeodeticCoord, ProjectionError> {
    let offset = ground_intersection(pose, intr, px, cfg)?;
    let ecef = geodesy::enu_to_ecef(offset, pose.position, &cfg.ellipsoid);
    Ok(geodesy::ecef_to_geodetic(ecef, &cfg.ellipsoid)?)
}

/// Camera-frame coordinates of a geolocation.
pub fn geolocation_to_camera(pose: &UavPose, poi: GeodeticCoord, cfg: &ProjectionConfig) -> Vector3<f64> {
    let ecef = geodesy::geodetic_to_ecef(poi, &cfg.ellipsoid);
    let enu = geodesy::ecef_to_enu(ecef, pose.position, &cfg.ellipsoid);
    camera_to_enu(pose, cfg).transpose() * enu.to_vector()
}

/// Projects `poi` into the camera described by `pose` and `intr`.
pub fn geolocation_to_pixel(
    pose: &UavPose,
    intr: &CameraIntrinsics,
    poi: GeodeticCoord,
    cfg: &ProjectionConfig,
) -> Reprojection {
    let cam = geolocation_to_camera(pose, poi, cfg);
    let c = intr.center();
    let f = intr.focal_px();
    if cam.z > 0.0 {
        let pixel = PixelCoord::new(c.u + f * cam.x / cam.z, c.v + f * cam.y / cam.z);
        if intr.contains(pixel) {
            return Reprojection { pixel, visible: true };
        }
        return Reprojection { pixel: clamp_to_edge(intr, pixel.u - c.u, pixel.v - c.v), visible: false };
    }
    // Behind the camera: the lateral components still say which way to turn.
    Reprojection { pixel: clamp_to_edge(intr, cam.x, cam.y), visible: false }
}

/// Point on the frame border along direction (`du`, `dv`) from the center.
fn clamp_to_edge(intr: &CameraIntrinsics, du: f64, dv: f64) -> PixelCoord {
    let c = intr.center();
    if du == 0.0 && dv == 0.0 {
        return PixelCoord::new(c.u, f64::from(intr.height_px));
    }
    let su = if du != 0.0 { c.u / du.abs() } else { f64::INFINITY };
    let sv = if dv != 0.0 { c.v / dv.abs() } else { f64::INFINITY };
    let s = su.min(sv);
    let u = (c.u + s * du).clamp(0.0, f64::from(intr.width_px));
    let v = (c.v + s * dv).clamp(0.0, f64::from(intr.height_px));
    PixelCoord::new(u, v)
}

/// Converts a ground radius around `poi` into pixels using the local
/// ground-sample distance (slant range over focal length).
pub fn radius_to_pixels(
    pose: &UavPose,
    intr: &CameraIntrinsics,
    poi: GeodeticCoord,
    radius_m: f64,
    cfg: &ProjectionConfig,
) -> f64 {
    let range = geolocation_to_camera(pose, poi, cfg).norm();
    if range <= f64::EPSILON {
        return 0.0;
    }
    radius_m * intr.focal_px() / range
}

/// Yaw and pitch (roll zero) that point the forward axis from `from` at `to`.
pub fn aim_at(from: GeodeticCoord, to: GeodeticCoord, e: &EllipsoidModel) -> Attitude {
    let d = geodesy::ecef_to_enu(geodesy::geodetic_to_ecef(to, e), from, e);
    let yaw = d.east_m.atan2(d.north_m).to_degrees();
    let pitch = d.up_m.atan2(d.horizontal_norm()).to_degrees();
    Attitude::new(0.0, pitch, yaw)
}
