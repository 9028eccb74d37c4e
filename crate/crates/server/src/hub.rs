use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use aerotag_core::projection::{self, Reprojection};
use aerotag_core::sim::{FlightLog, FlightLogRecord, NoiseModel, PoseLookup};
use aerotag_core::store::{EventLog, Mutation, Outcome, Poi, PoiEvent, PoiKind, PoiStore, Rejection};
use aerotag_core::{CameraIntrinsics, PixelCoord, ProjectionConfig, ProjectionError, SimError, StoreError, UavPose};
use tokio::sync::mpsc;

use crate::protocol::{ClientMessage, ErrorCode, Marker, ServerMessage};

pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

pub fn wall_clock_ms() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as i64).unwrap_or(0)
}

pub struct HubConfig {
    /// Event log to replay at startup and append to; `None` keeps state in memory.
    pub log_path: Option<PathBuf>,
    pub flight_logs: BTreeMap<String, FlightLog>,
    pub noise: NoiseModel,
    pub intrinsics: CameraIntrinsics,
    pub projection: ProjectionConfig,
    pub pose_lookup: PoseLookup,
    /// Outbound frames buffered per session before it is disconnected.
    pub queue_capacity: usize,
    pub clock: Clock,
}

impl Default for HubConfig {
    fn default() -> Self {
        HubConfig {
            log_path: None,
            flight_logs: BTreeMap::new(),
            noise: NoiseModel::calibrated(0),
            intrinsics: CameraIntrinsics::default(),
            projection: ProjectionConfig::default(),
            pose_lookup: PoseLookup::Nearest,
            queue_capacity: 1024,
            clock: Arc::new(wall_clock_ms),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SessionId(u64);

struct Session {
    client_id: Option<String>,
    tx: mpsc::Sender<String>,
}

struct State {
    store: PoiStore,
    log: Option<EventLog>,
    sessions: BTreeMap<SessionId, Session>,
    next_session: u64,
}

/// Single serialization point for all sessions.
pub struct Hub {
    state: Mutex<State>,
    flight_logs: BTreeMap<String, FlightLog>,
    noise: NoiseModel,
    intrinsics: CameraIntrinsics,
    projection: ProjectionConfig,
    pose_lookup: PoseLookup,
    queue_capacity: usize,
    clock: Clock,
}

type Reply = Result<ServerMessage, ServerMessage>;

// Errors here are wire messages bound for the client; boxing them buys nothing.
#[allow(clippy::result_large_err)]
impl Hub {
    pub fn new(config: HubConfig) -> Result<Self, StoreError> {
        let (store, log) = match &config.log_path {
            Some(path) => {
                let (log, store) = EventLog::open(path)?;
                (store, Some(log))
            }
            None => (PoiStore::new(), None),
        };
        config.intrinsics.validate().map_err(|e| StoreError::MalformedEvent(e.to_string()))?;
        Ok(Hub {
            state: Mutex::new(State { store, log, sessions: BTreeMap::new(), next_session: 0 }),
            flight_logs: config.flight_logs,
            noise: config.noise,
            intrinsics: config.intrinsics,
            projection: config.projection,
            pose_lookup: config.pose_lookup,
            queue_capacity: config.queue_capacity.max(1),
            clock: config.clock,
        })
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Registers a session; frames for it arrive on the returned receiver,
    /// which closes when the hub drops the session.
    pub fn connect(&self) -> (SessionId, mpsc::Receiver<String>) {
        let (tx, rx) = mpsc::channel(self.queue_capacity);
        let mut st = self.lock();
        let id = SessionId(st.next_session);
        st.next_session += 1;
        st.sessions.insert(id, Session { client_id: None, tx });
        (id, rx)
    }

    pub fn disconnect(&self, id: SessionId) {
        self.lock().sessions.remove(&id);
    }

    pub fn session_count(&self) -> usize {
        self.lock().sessions.len()
    }

    pub fn last_seq(&self) -> u64 {
        self.lock().store.last_seq()
    }

    pub fn snapshot(&self) -> Vec<Poi> {
        self.lock().store.snapshot()
    }

    pub fn snapshot_json(&self) -> String {
        self.lock().store.snapshot_json()
    }

    /// Sends `msg` to one session only.
    pub fn reply(&self, session: SessionId, msg: &ServerMessage) {
        send(&mut self.lock(), session, msg);
    }

    pub fn flight_log(&self, uav_id: &str) -> Option<&FlightLog> {
        self.flight_logs.get(uav_id)
    }

    /// Handles one inbound text frame from `session`.
    pub fn handle(&self, session: SessionId, text: &str) {
        let mut st = self.lock();
        let Some(client_id) = st.sessions.get(&session).map(|s| s.client_id.clone()) else {
            return;
        };
        let msg = match ClientMessage::parse(text) {
            Ok(msg) => msg,
            Err(e) => return send(&mut st, session, &ServerMessage::error(ErrorCode::Malformed, e.to_string())),
        };
        let reply = match (msg, client_id) {
            (ClientMessage::Hello { client_id }, _) => self.hello(&mut st, session, client_id),
            (_, None) => Err(ServerMessage::error(ErrorCode::UnauthorizedBeforeHello, "send hello first")),
            (msg, Some(client)) => self.dispatch(&mut st, &client, msg),
        };
        match reply {
            Ok(m) | Err(m) => send(&mut st, session, &m),
        }
    }

    fn hello(&self, st: &mut State, session: SessionId, client_id: String) -> Reply {
        if client_id.is_empty() {
            return Err(ServerMessage::error(ErrorCode::Malformed, "empty client_id"));
        }
        if let Some(s) = st.sessions.get_mut(&session) {
            s.client_id = Some(client_id);
        }
        Ok(ServerMessage::Snapshot { seq: st.store.last_seq(), pois: st.store.snapshot() })
    }

    fn dispatch(&self, st: &mut State, client: &str, msg: ClientMessage) -> Reply {
        let now = (self.clock)();
        let seq = st.store.last_seq() + 1;
        let event = |ts_ms: i64, mutation| PoiEvent::new(seq, ts_ms, client, mutation);
        let client_ts = |ts: i64| if ts > 0 { ts } else { now };
        let ev = match msg {
            ClientMessage::Hello { .. } => unreachable!("handled by caller"),
            ClientMessage::PoiCreate { poi } => event(client_ts(poi.updated_ms), Mutation::Create(poi)),
            ClientMessage::PoiUpdate { poi } => event(client_ts(poi.updated_ms), Mutation::Update(poi)),
            ClientMessage::PoiDelete { id } => event(now, Mutation::Delete(id)),
            ClientMessage::PoiTrack { id, point } => event(point.ts_ms, Mutation::Track { id, point }),
            ClientMessage::AnnotatePixel { uav_id, t, u, v, kind, text } => {
                let poi = self.annotate(&uav_id, t, PixelCoord::new(u, v), kind, text, seq)?;
                event(now, Mutation::Create(poi))
            }
            ClientMessage::ViewProject { uav_id, t, pose, intr } => {
                return self.view_project(st, uav_id, t, pose, intr);
            }
        };
        self.commit(st, ev, client)
    }

    fn pose_for(&self, uav_id: &str, t: f64) -> Result<UavPose, ServerMessage> {
        let log = self
            .flight_logs
            .get(uav_id)
            .ok_or_else(|| ServerMessage::error(ErrorCode::UnknownUav, format!("no flight log for `{uav_id}`")))?;
        log.pose_at(t, self.pose_lookup).map_err(|e| match e {
            SimError::OutOfLogRange { .. } => ServerMessage::error(ErrorCode::OutOfLogRange, e.to_string()),
            other => ServerMessage::error(ErrorCode::Malformed, other.to_string()),
        })
    }

    fn annotate(
        &self,
        uav_id: &str,
        t: f64,
        px: PixelCoord,
        kind: PoiKind,
        text: Option<String>,
        seq: u64,
    ) -> Result<Poi, ServerMessage> {
        let pose = self.pose_for(uav_id, t)?;
        let geo = projection::pixel_to_geolocation(&pose, &self.intrinsics, px, &self.projection).map_err(|e| {
            let code = match e {
                ProjectionError::NoGroundIntersection => ErrorCode::NoGroundIntersection,
                _ => ErrorCode::Malformed,
            };
            ServerMessage::error(code, e.to_string())
        })?;
        let mut poi = Poi::new(format!("ann-{seq}"), kind, geo, self.noise.cep68(pose.satellites));
        poi.source = uav_id.to_string();
        poi.text_note = text;
        Ok(poi)
    }

    fn view_project(
        &self,
        st: &State,
        uav_id: Option<String>,
        t: Option<f64>,
        pose: Option<aerotag_core::sim::FlightLogLine>,
        intr: Option<CameraIntrinsics>,
    ) -> Reply {
        let malformed = |m: String| ServerMessage::error(ErrorCode::Malformed, m);
        let pose = match (pose, uav_id, t) {
            (Some(line), _, _) => FlightLogRecord::try_from(line).map_err(malformed)?.pose,
            (None, Some(uav), Some(t)) => self.pose_for(&uav, t)?,
            _ => return Err(malformed("view.project needs `pose` or both `uav_id` and `t`".into())),
        };
        let intr = intr.unwrap_or(self.intrinsics);
        intr.validate().map_err(|e| malformed(e.to_string()))?;
        let markers = st
            .store
            .iter()
            .map(|poi| {
                let Reprojection { pixel, visible } =
                    projection::geolocation_to_pixel(&pose, &intr, poi.geolocation, &self.projection);
                let radius_px = projection::radius_to_pixels(
                    &pose,
                    &intr,
                    poi.geolocation,
                    poi.uncertainty_radius_m,
                    &self.projection,
                );
                Marker { id: poi.id.clone(), kind: poi.kind, u: pixel.u, v: pixel.v, visible, radius_px }
            })
            .collect();
        Ok(ServerMessage::ViewOverlays { markers })
    }

    /// Validates, persists, applies and broadcasts `ev`; the reply is the ack.
    fn commit(&self, st: &mut State, ev: PoiEvent, client: &str) -> Reply {
        let applied = match st.store.evaluate(&ev) {
            Ok(Outcome::Accepted(result)) => normalized(ev, result),
            Ok(Outcome::Rejected(Rejection::Stale)) => {
                return Err(ServerMessage::error(ErrorCode::Stale, format!("`{}` has a newer write", ev.mutation.target())))
            }
            Ok(Outcome::Rejected(Rejection::Deleted)) => {
                return Err(ServerMessage::error(ErrorCode::Stale, format!("`{}` was deleted", ev.mutation.target())))
            }
            Ok(Outcome::Rejected(Rejection::AlreadyApplied)) => {
                return Err(ServerMessage::error(ErrorCode::Internal, "sequence conflict"))
            }
            Err(e) => return Err(store_error(e)),
        };
        if let Some(log) = st.log.as_mut() {
            if let Err(e) = log.append(&applied) {
                tracing::error!(error = %e, "event log append failed");
                return Err(ServerMessage::error(ErrorCode::Internal, e.to_string()));
            }
        }
        match st.store.apply(&applied) {
            Ok(Outcome::Accepted(_)) => {}
            other => unreachable!("evaluated event must apply: {other:?}"),
        }
        tracing::debug!(seq = applied.seq, client, op = ?applied.mutation.op(), id = %applied.mutation.target(), "applied");
        let frame = ServerMessage::broadcast(&applied).to_json();
        let joined: Vec<SessionId> =
            st.sessions.iter().filter(|(_, s)| s.client_id.is_some()).map(|(id, _)| *id).collect();
        for id in joined {
            send_raw(st, id, frame.clone());
        }
        Ok(ServerMessage::Ack { seq: applied.seq })
    }
}

/// The event as applied: create and update carry the resulting POI.
fn normalized(ev: PoiEvent, result: Option<Poi>) -> PoiEvent {
    let mutation = match (ev.mutation, result) {
        (Mutation::Create(_), Some(poi)) => Mutation::Create(poi),
        (Mutation::Update(_), Some(poi)) => Mutation::Update(poi),
        (m, _) => m,
    };
    PoiEvent { mutation, ..ev }
}

fn store_error(e: StoreError) -> ServerMessage {
    let code = match e {
        StoreError::UnknownId(_) => ErrorCode::UnknownId,
        StoreError::DuplicateId(_) | StoreError::MalformedEvent(_) => ErrorCode::Malformed,
        StoreError::CorruptLog { .. } | StoreError::Io(_) => ErrorCode::Internal,
    };
    ServerMessage::error(code, e.to_string())
}

fn send(st: &mut State, id: SessionId, msg: &ServerMessage) {
    send_raw(st, id, msg.to_json());
}

fn send_raw(st: &mut State, id: SessionId, frame: String) {
    let Some(session) = st.sessions.get(&id) else { return };
    if let Err(e) = session.tx.try_send(frame) {
        if matches!(e, mpsc::error::TrySendError::Full(_)) {
            tracing::warn!(session = id.0, "outbound queue full; disconnecting");
        }
        st.sessions.remove(&id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use aerotag_core::sim::{calibration_hover_plan, generate_flight_log};
    use aerotag_core::GeodeticCoord;

    fn hub() -> Hub {
        let mut flight_logs = BTreeMap::new();
        flight_logs.insert("uav-1".to_string(), generate_flight_log(&calibration_hover_plan()).unwrap());
        let clock: Clock = Arc::new(|| 1_000);
        Hub::new(HubConfig { flight_logs, clock, ..HubConfig::default() }).unwrap()
    }

    fn drain(rx: &mut mpsc::Receiver<String>) -> Vec<ServerMessage> {
        std::iter::from_fn(|| rx.try_recv().ok()).map(|f| ServerMessage::parse(&f).unwrap()).collect()
    }

    fn joined(hub: &Hub, name: &str) -> (SessionId, mpsc::Receiver<String>) {
        let (id, mut rx) = hub.connect();
        hub.handle(id, &ClientMessage::Hello { client_id: name.into() }.to_json());
        assert!(matches!(drain(&mut rx)[..], [ServerMessage::Snapshot { .. }]));
        (id, rx)
    }

    fn create_json(id: &str) -> String {
        let poi = Poi::new(id, PoiKind::Victim, GeodeticCoord::new(41.7, -86.2, 200.0).unwrap(), 1.0);
        ClientMessage::PoiCreate { poi }.to_json()
    }

    #[test]
    fn fresh_hello_gets_empty_snapshot() {
        let hub = hub();
        let (id, mut rx) = hub.connect();
        hub.handle(id, r#"{"type":"hello","client_id":"a"}"#);
        assert_eq!(drain(&mut rx), [ServerMessage::Snapshot { seq: 0, pois: vec![] }]);
    }

    #[test]
    fn mutations_before_hello_are_refused() {
        let hub = hub();
        let (id, mut rx) = hub.connect();
        hub.handle(id, &create_json("p"));
        let msgs = drain(&mut rx);
        assert!(matches!(msgs[..], [ServerMessage::Error { code: ErrorCode::UnauthorizedBeforeHello, .. }]));
        assert_eq!(hub.last_seq(), 0);
    }

    #[test]
    fn create_fans_out_to_every_session_and_acks_sender() {
        let hub = hub();
        let (a, mut ra) = joined(&hub, "a");
        let (_b, mut rb) = joined(&hub, "b");
        let (_c, mut rc) = joined(&hub, "c");
        hub.handle(a, &create_json("p1"));
        let to_a = drain(&mut ra);
        assert_eq!(to_a.len(), 2);
        assert!(matches!(to_a[0], ServerMessage::PoiCreate { seq: 1, .. }));
        assert_eq!(to_a[1], ServerMessage::Ack { seq: 1 });
        let to_b = drain(&mut rb);
        assert_eq!(to_b, [to_a[0].clone()]);
        assert_eq!(drain(&mut rc), to_b);
        assert_eq!(hub.snapshot().len(), 1);
    }

    #[test]
    fn stale_update_is_not_broadcast() {
        let hub = hub();
        let (a, mut ra) = joined(&hub, "a");
        let (b, mut rb) = joined(&hub, "b");
        hub.handle(a, &create_json("p"));
        drain(&mut ra);
        drain(&mut rb);
        let mut poi = hub.snapshot()[0].clone();
        poi.updated_ms = 5_000;
        poi.text_note = Some("newer".into());
        hub.handle(a, &ClientMessage::PoiUpdate { poi: poi.clone() }.to_json());
        poi.updated_ms = 4_000;
        poi.text_note = Some("older".into());
        hub.handle(b, &ClientMessage::PoiUpdate { poi }.to_json());
        let to_b = drain(&mut rb);
        assert!(matches!(to_b[0], ServerMessage::PoiUpdate { seq: 2, .. }));
        assert!(matches!(to_b[1], ServerMessage::Error { code: ErrorCode::Stale, .. }));
        assert_eq!(drain(&mut ra).len(), 2);
        assert_eq!(hub.snapshot()[0].text_note.as_deref(), Some("newer"));
        assert_eq!(hub.last_seq(), 2);
    }

    #[test]
    fn error_codes() {
        let hub = hub();
        let (a, mut ra) = joined(&hub, "a");
        let code = |rx: &mut mpsc::Receiver<String>| match drain(rx).pop() {
            Some(ServerMessage::Error { code, .. }) => code,
            other => panic!("{other:?}"),
        };
        hub.handle(a, "not json");
        assert_eq!(code(&mut ra), ErrorCode::Malformed);
        hub.handle(a, r#"{"type":"poi.delete","id":"ghost"}"#);
        assert_eq!(code(&mut ra), ErrorCode::UnknownId);
        hub.handle(a, &create_json("p"));
        drain(&mut ra);
        hub.handle(a, &create_json("p"));
        assert_eq!(code(&mut ra), ErrorCode::Malformed);
        hub.handle(a, r#"{"type":"annotate.pixel","uav_id":"uav-9","t":1,"u":960,"v":540,"kind":"victim"}"#);
        assert_eq!(code(&mut ra), ErrorCode::UnknownUav);
        hub.handle(a, r#"{"type":"annotate.pixel","uav_id":"uav-1","t":500,"u":960,"v":540,"kind":"victim"}"#);
        assert_eq!(code(&mut ra), ErrorCode::OutOfLogRange);
        hub.handle(a, r#"{"type":"view.project","t":3}"#);
        assert_eq!(code(&mut ra), ErrorCode::Malformed);
        assert_eq!(hub.last_seq(), 1);
    }

    #[test]
    fn level_gimbal_above_horizon_has_no_ground() {
        let hub = hub();
        let (a, mut ra) = joined(&hub, "a");
        let pose_line = r#"{"t":0,"lat":41.7,"lon":-86.2,"alt":240,"agl":40,"roll":0,"pitch":0,"yaw":0,"g_roll":0,"g_pitch":0,"g_yaw":0,"sats":16}"#;
        let log = FlightLog::read(pose_line.as_bytes()).unwrap();
        let mut logs = BTreeMap::new();
        logs.insert("level".to_string(), log);
        let level = Hub::new(HubConfig { flight_logs: logs, ..HubConfig::default() }).unwrap();
        let (l, mut rl) = joined(&level, "a");
        level.handle(l, r#"{"type":"annotate.pixel","uav_id":"level","t":0,"u":960,"v":100,"kind":"victim"}"#);
        assert!(matches!(drain(&mut rl)[..], [ServerMessage::Error { code: ErrorCode::NoGroundIntersection, .. }]));
        assert_eq!(level.last_seq(), 0);
        hub.handle(a, r#"{"type":"annotate.pixel","uav_id":"uav-1","t":3,"u":960,"v":540,"kind":"weapon"}"#);
        assert!(matches!(drain(&mut ra)[..], [ServerMessage::PoiCreate { .. }, ServerMessage::Ack { seq: 1 }]));
    }

    #[test]
    fn annotation_gets_tier_uncertainty_and_reprojects_to_center() {
        let hub = hub();
        let (a, mut ra) = joined(&hub, "a");
        hub.handle(a, r#"{"type":"annotate.pixel","uav_id":"uav-1","t":185.2,"u":960,"v":540,"kind":"weapon","text":"rifle"}"#);
        let msgs = drain(&mut ra);
        let ServerMessage::PoiCreate { poi, .. } = &msgs[0] else { panic!("{msgs:?}") };
        assert_eq!(poi.id.as_str(), "ann-1");
        assert_eq!(poi.source, "uav-1");
        assert_eq!(poi.uncertainty_radius_m, NoiseModel::calibrated(0).cep68(14));
        assert!((poi.geolocation.lat_deg - 41.7).abs() < 1e-9 && (poi.geolocation.lon_deg + 86.2).abs() < 1e-9);
        hub.handle(a, r#"{"type":"view.project","uav_id":"uav-1","t":185.2}"#);
        let ServerMessage::ViewOverlays { markers } = drain(&mut ra).pop().unwrap() else { panic!() };
        assert_eq!(markers.len(), 1);
        assert!(markers[0].visible);
        assert!((markers[0].u - 960.0).abs() < 0.01 && (markers[0].v - 540.0).abs() < 0.01);
    }

    #[test]
    fn full_queue_disconnects_session() {
        let hub = Hub::new(HubConfig { queue_capacity: 2, ..HubConfig::default() }).unwrap();
        let (a, mut ra) = joined(&hub, "a");
        let (_b, mut rb) = joined(&hub, "slow");
        for i in 0..3 {
            hub.handle(a, &create_json(&format!("p{i}")));
            drain(&mut ra);
        }
        assert_eq!(hub.session_count(), 1);
        assert_eq!(drain(&mut rb).len(), 2);
        assert_eq!(rb.try_recv(), Err(mpsc::error::TryRecvError::Disconnected));
    }
}
