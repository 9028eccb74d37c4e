//! Wire messages. Every WebSocket text frame carries one JSON object whose
//! `type` field selects the variant; fields not in the schema are rejected.

use aerotag_core::sim::FlightLogLine;
use aerotag_core::store::{Mutation, Poi, PoiEvent, PoiId, PoiKind, TrackPoint};
use aerotag_core::CameraIntrinsics;
use serde::{Deserialize, Serialize};

/// Messages sent by clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum ClientMessage {
    #[serde(rename = "hello")]
    Hello { client_id: String },
    #[serde(rename = "poi.create")]
    PoiCreate { poi: Poi },
    #[serde(rename = "poi.update")]
    PoiUpdate { poi: Poi },
    #[serde(rename = "poi.delete")]
    PoiDelete { id: PoiId },
    #[serde(rename = "poi.track")]
    PoiTrack { id: PoiId, point: TrackPoint },
    #[serde(rename = "annotate.pixel")]
    AnnotatePixel {
        uav_id: String,
        t: f64,
        u: f64,
        v: f64,
        kind: PoiKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
    },
    /// Either `pose` or both `uav_id` and `t` select the camera.
    #[serde(rename = "view.project")]
    ViewProject {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        uav_id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pose: Option<FlightLogLine>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        intr: Option<CameraIntrinsics>,
    },
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client messages serialize")
    }
}

/// Messages sent by the hub. Mutation broadcasts carry the applied event:
/// its hub-assigned `seq`, the LWW timestamp and the writing client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum ServerMessage {
    #[serde(rename = "snapshot")]
    Snapshot { seq: u64, pois: Vec<Poi> },
    #[serde(rename = "poi.create")]
    PoiCreate { seq: u64, ts_ms: i64, client: String, poi: Poi },
    #[serde(rename = "poi.update")]
    PoiUpdate { seq: u64, ts_ms: i64, client: String, poi: Poi },
    #[serde(rename = "poi.delete")]
    PoiDelete { seq: u64, ts_ms: i64, client: String, id: PoiId },
    #[serde(rename = "poi.track")]
    PoiTrack { seq: u64, ts_ms: i64, client: String, id: PoiId, point: TrackPoint },
    #[serde(rename = "view.overlays")]
    ViewOverlays { markers: Vec<Marker> },
    #[serde(rename = "ack")]
    Ack { seq: u64 },
    #[serde(rename = "error")]
    Error { code: ErrorCode, msg: String },
}

impl ServerMessage {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }

    pub fn error(code: ErrorCode, msg: impl Into<String>) -> Self {
        ServerMessage::Error { code, msg: msg.into() }
    }

    pub fn broadcast(ev: &PoiEvent) -> Self {
        let (seq, ts_ms, client) = (ev.seq, ev.ts_ms, ev.client.clone());
        match &ev.mutation {
            Mutation::Create(poi) => ServerMessage::PoiCreate { seq, ts_ms, client, poi: poi.clone() },
            Mutation::Update(poi) => ServerMessage::PoiUpdate { seq, ts_ms, client, poi: poi.clone() },
            Mutation::Delete(id) => ServerMessage::PoiDelete { seq, ts_ms, client, id: id.clone() },
            Mutation::Track { id, point } => ServerMessage::PoiTrack { seq, ts_ms, client, id: id.clone(), point: *point },
        }
    }

    /// The event a mutation broadcast carries.
    pub fn event(&self) -> Option<PoiEvent> {
        let (seq, ts_ms, client, mutation) = match self {
            ServerMessage::PoiCreate { seq, ts_ms, client, poi } => (seq, ts_ms, client, Mutation::Create(poi.clone())),
            ServerMessage::PoiUpdate { seq, ts_ms, client, poi } => (seq, ts_ms, client, Mutation::Update(poi.clone())),
            ServerMessage::PoiDelete { seq, ts_ms, client, id } => (seq, ts_ms, client, Mutation::Delete(id.clone())),
            ServerMessage::PoiTrack { seq, ts_ms, client, id, point } => {
                (seq, ts_ms, client, Mutation::Track { id: id.clone(), point: *point })
            }
            _ => return None,
        };
        Some(PoiEvent::new(*seq, *ts_ms, client.clone(), mutation))
    }
}

/// One POI as seen from a queried camera pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Marker {
    pub id: PoiId,
    pub kind: PoiKind,
    pub u: f64,
    pub v: f64,
    /// When false, (`u`, `v`) is on the frame edge in the POI's direction.
    pub visible: bool,
    pub radius_px: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    UnknownId,
    /// Lost last-writer-wins, or targets a deleted POI.
    Stale,
    UnauthorizedBeforeHello,
    UnknownUav,
    OutOfLogRange,
    NoGroundIntersection,
    /// The event log could not be written; nothing was applied.
    Internal,
}
