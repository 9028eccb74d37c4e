//! Geolocation core for UAV video annotation.
//!
//! Pixel annotations made in a UAV camera view are turned into WGS84
//! positions ([`projection::pixel_to_geolocation`]), kept in an
//! event-sourced [`store::PoiStore`], and projected back into any other
//! camera ([`projection::geolocation_to_pixel`]). The [`sim`] module
//! generates synthetic flight logs and measures horizontal accuracy under
//! simulated GPS noise.

pub mod error;
pub mod exec;
pub mod geodesy;
pub mod projection;
pub mod sim;
pub mod store;

pub use error::{GeodesyError, ProjectionError, SimError, StoreError};
pub use exec::Execution;
pub use geodesy::{EcefCoord, EllipsoidModel, EnuVector, GeodeticCoord};
pub use projection::{Attitude, CameraIntrinsics, GroundModel, PixelCoord, ProjectionConfig, UavPose};
