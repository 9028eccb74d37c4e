//! Real-time POI hub for collaborative UAV video annotation.
//!
//! A [`Hub`] owns the POI store and its event log and funnels every
//! mutation through one lock, so the order mutations are applied in is the
//! order every session sees them broadcast. Pixel annotations are geolocated
//! here, against the flight logs the hub was started with, so clients never
//! run projection math themselves.
//!
//! The WebSocket transport lives in [`ws`]; [`client`] is a headless client
//! that mirrors the hub's state from its broadcasts.

pub mod client;
pub mod hub;
pub mod protocol;
pub mod ws;

pub use client::{Client, ClientError, Replica};
pub use hub::{Hub, HubConfig, SessionId};
pub use protocol::{ClientMessage, ErrorCode, Marker, ServerMessage};
pub use ws::Server;

pub const DEFAULT_PORT: u16 = 8750;
