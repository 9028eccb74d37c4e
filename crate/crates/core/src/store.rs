//! Event-sourced store of points of interest.
//!
//! State is the fold of [`PoiEvent`]s through [`PoiStore::apply`]. Concurrent
//! edits of the same POI resolve last-writer-wins on `(ts_ms, client)`.
//! Deleted ids stay tombstoned for the lifetime of the store so late updates
//! cannot resurrect them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::StoreError;
use crate::geodesy::GeodeticCoord;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PoiId(pub String);

impl PoiId {
    pub fn new(id: impl Into<String>) -> Self {
        PoiId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PoiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Closed symbol set for POIs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoiKind {
    Victim,
    Suspect,
    Weapon,
    Vehicle,
    Hazard,
    Evidence,
    Responder,
    Landmark,
}

impl PoiKind {
    pub const ALL: [PoiKind; 8] = [
        PoiKind::Victim,
        PoiKind::Suspect,
        PoiKind::Weapon,
        PoiKind::Vehicle,
        PoiKind::Hazard,
        PoiKind::Evidence,
        PoiKind::Responder,
        PoiKind::Landmark,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PoiKind::Victim => "victim",
            PoiKind::Suspect => "suspect",
            PoiKind::Weapon => "weapon",
            PoiKind::Vehicle => "vehicle",
            PoiKind::Hazard => "hazard",
            PoiKind::Evidence => "evidence",
            PoiKind::Responder => "responder",
            PoiKind::Landmark => "landmark",
        }
    }
}

impl std::str::FromStr for PoiKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PoiKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown POI kind `{s}`"))
    }
}

impl fmt::Display for PoiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A timestamped position in a POI's movement history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "TrackPointRecord", into = "TrackPointRecord")]
pub struct TrackPoint {
    pub ts_ms: i64,
    pub position: GeodeticCoord,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackPointRecord {
    ts_ms: i64,
    lat: f64,
    lon: f64,
    alt: f64,
}

impl From<TrackPointRecord> for TrackPoint {
    fn from(r: TrackPointRecord) -> Self {
        TrackPoint { ts_ms: r.ts_ms, position: GeodeticCoord { lat_deg: r.lat, lon_deg: r.lon, alt_m: r.alt } }
    }
}

impl From<TrackPoint> for TrackPointRecord {
    fn from(p: TrackPoint) -> Self {
        TrackPointRecord { ts_ms: p.ts_ms, lat: p.position.lat_deg, lon: p.position.lon_deg, alt: p.position.alt_m }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoiRecord", into = "PoiRecord")]
pub struct Poi {
    pub id: PoiId,
    pub kind: PoiKind,
    pub geolocation: GeodeticCoord,
    pub uncertainty_radius_m: f64,
    pub source: String,
    pub text_note: Option<String>,
    pub version: u64,
    pub created_ms: i64,
    pub updated_ms: i64,
    pub track: Vec<TrackPoint>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoiRecord {
    id: PoiId,
    kind: PoiKind,
    lat: f64,
    lon: f64,
    alt: f64,
    unc_m: f64,
    #[serde(default)]
    source: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    version: u64,
    #[serde(default)]
    created_ms: i64,
    #[serde(default)]
    updated_ms: i64,
    #[serde(default)]
    track: Vec<TrackPoint>,
}

impl From<PoiRecord> for Poi {
    fn from(r: PoiRecord) -> Self {
        Poi {
            id: r.id,
            kind: r.kind,
            geolocation: GeodeticCoord { lat_deg: r.lat, lon_deg: r.lon, alt_m: r.alt },
            uncertainty_radius_m: r.unc_m,
            source: r.source,
            text_note: r.text,
            version: r.version,
            created_ms: r.created_ms,
            updated_ms: r.updated_ms,
            track: r.track,
        }
    }
}

impl From<Poi> for PoiRecord {
    fn from(p: Poi) -> Self {
        PoiRecord {
            id: p.id,
            kind: p.kind,
            lat: p.geolocation.lat_deg,
            lon: p.geolocation.lon_deg,
            alt: p.geolocation.alt_m,
            unc_m: p.uncertainty_radius_m,
            source: p.source,
            text: p.text_note,
            version: p.version,
            created_ms: p.created_ms,
            updated_ms: p.updated_ms,
            track: p.track,
        }
    }
}

impl Poi {
    /// A fresh POI; the store assigns version and timestamps on create.
    pub fn new(id: impl Into<String>, kind: PoiKind, geolocation: GeodeticCoord, uncertainty_radius_m: f64) -> Self {
        Poi {
            id: PoiId::new(id),
            kind,
            geolocation,
            uncertainty_radius_m,
            source: String::new(),
            text_note: None,
            version: 0,
            created_ms: 0,
            updated_ms: 0,
            track: Vec::new(),
        }
    }

    fn validate(&self) -> Result<(), StoreError> {
        if self.id.0.is_empty() {
            return Err(StoreError::MalformedEvent("empty POI id".into()));
        }
        if !self.geolocation.is_valid() {
            return Err(StoreError::MalformedEvent(format!("invalid geolocation for `{}`", self.id)));
        }
        if !(self.uncertainty_radius_m >= 0.0 && self.uncertainty_radius_m.is_finite()) {
            return Err(StoreError::MalformedEvent(format!("invalid unc_m {}", self.uncertainty_radius_m)));
        }
        for w in self.track.windows(2) {
            if w[1].ts_ms < w[0].ts_ms {
                return Err(StoreError::MalformedEvent("track is not in time order".into()));
            }
        }
        if self.track.iter().any(|p| !p.position.is_valid()) {
            return Err(StoreError::MalformedEvent("invalid track point".into()));
        }
        if let Some(last) = self.track.last() {
            if last.position != self.geolocation {
                return Err(StoreError::MalformedEvent("geolocation differs from last track point".into()));
            }
        }
        Ok(())
    }
}

/// The mutation carried by an event.
#[derive(Debug, Clone, PartialEq)]
pub enum Mutation {
    Create(Poi),
    Update(Poi),
    Delete(PoiId),
    Track { id: PoiId, point: TrackPoint },
}

impl Mutation {
    pub fn target(&self) -> &PoiId {
        match self {
            Mutation::Create(p) | Mutation::Update(p) => &p.id,
            Mutation::Delete(id) | Mutation::Track { id, .. } => id,
        }
    }

    pub fn op(&self) -> EventOp {
        match self {
            Mutation::Create(_) => EventOp::Create,
            Mutation::Update(_) => EventOp::Update,
            Mutation::Delete(_) => EventOp::Delete,
            Mutation::Track { .. } => EventOp::Track,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventOp {
    Create,
    Update,
    Delete,
    Track,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EventRecord", into = "EventRecord")]
pub struct PoiEvent {
    pub seq: u64,
    pub ts_ms: i64,
    pub client: String,
    pub mutation: Mutation,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    seq: u64,
    ts_ms: i64,
    client: String,
    op: EventOp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    poi: Option<Poi>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    point: Option<TrackPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<PoiId>,
}

impl TryFrom<EventRecord> for PoiEvent {
    type Error = String;

    fn try_from(r: EventRecord) -> Result<Self, Self::Error> {
        let mutation = match (r.op, r.poi, r.point, r.id) {
            (EventOp::Create, Some(poi), None, None) => Mutation::Create(poi),
            (EventOp::Update, Some(poi), None, None) => Mutation::Update(poi),
            (EventOp::Delete, None, None, Some(id)) => Mutation::Delete(id),
            (EventOp::Track, None, Some(point), Some(id)) => Mutation::Track { id, point },
            (op, ..) => return Err(format!("payload fields do not match op `{op:?}`")),
        };
        Ok(PoiEvent { seq: r.seq, ts_ms: r.ts_ms, client: r.client, mutation })
    }
}

impl From<PoiEvent> for EventRecord {
    fn from(e: PoiEvent) -> Self {
        let (op, poi, point, id) = match e.mutation {
            Mutation::Create(p) => (EventOp::Create, Some(p), None, None),
            Mutation::Update(p) => (EventOp::Update, Some(p), None, None),
            Mutation::Delete(id) => (EventOp::Delete, None, None, Some(id)),
            Mutation::Track { id, point } => (EventOp::Track, None, Some(point), Some(id)),
        };
        EventRecord { seq: e.seq, ts_ms: e.ts_ms, client: e.client, op, poi, point, id }
    }
}

impl PoiEvent {
    pub fn new(seq: u64, ts_ms: i64, client: impl Into<String>, mutation: Mutation) -> Self {
        PoiEvent { seq, ts_ms, client: client.into(), mutation }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serialization is infallible")
    }
}

/// Why a well-formed event was not applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// Loses last-writer-wins against the stored version.
    Stale,
    /// Targets a POI deleted earlier in this session.
    Deleted,
    /// Sequence number already applied.
    AlreadyApplied,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// Accepted; carries the resulting POI (`None` after a delete).
    Accepted(Option<Poi>),
    Rejected(Rejection),
}

impl Outcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Outcome::Accepted(_))
    }
}

#[derive(Debug, Clone)]
struct Entry {
    poi: Poi,
    last_writer: String,
}

#[derive(Debug, Clone, Default)]
pub struct PoiStore {
    entries: BTreeMap<PoiId, Entry>,
    tombstones: BTreeSet<PoiId>,
    last_seq: u64,
}

enum Plan {
    Put(Entry),
    Remove(PoiId),
}

impl PoiStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sequence number of the last accepted event.
    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn get(&self, id: &PoiId) -> Option<&Poi> {
        self.entries.get(id).map(|e| &e.poi)
    }

    pub fn is_tombstoned(&self, id: &PoiId) -> bool {
        self.tombstones.contains(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Poi> {
        self.entries.values().map(|e| &e.poi)
    }

    /// What applying `ev` would do, without changing the store.
    pub fn evaluate(&self, ev: &PoiEvent) -> Result<Outcome, StoreError> {
        Ok(match self.plan(ev)? {
            Err(rejection) => Outcome::Rejected(rejection),
            Ok(Plan::Put(entry)) => Outcome::Accepted(Some(entry.poi)),
            Ok(Plan::Remove(_)) => Outcome::Accepted(None),
        })
    }

    /// Applies `ev`. On rejection or error the store is left unchanged.
    pub fn apply(&mut self, ev: &PoiEvent) -> Result<Outcome, StoreError> {
        let plan = match self.plan(ev)? {
            Err(rejection) => return Ok(Outcome::Rejected(rejection)),
            Ok(plan) => plan,
        };
        self.last_seq = ev.seq;
        Ok(match plan {
            Plan::Put(entry) => {
                let poi = entry.poi.clone();
                self.entries.insert(poi.id.clone(), entry);
                Outcome::Accepted(Some(poi))
            }
            Plan::Remove(id) => {
                self.entries.remove(&id);
                self.tombstones.insert(id);
                Outcome::Accepted(None)
            }
        })
    }

    fn plan(&self, ev: &PoiEvent) -> Result<Result<Plan, Rejection>, StoreError> {
        if ev.client.is_empty() {
            return Err(StoreError::MalformedEvent("empty client id".into()));
        }
        let target = ev.mutation.target();
        if target.0.is_empty() {
            return Err(StoreError::MalformedEvent("empty POI id".into()));
        }
        if ev.seq <= self.last_seq {
            return Ok(Err(Rejection::AlreadyApplied));
        }

        if let Mutation::Create(poi) = &ev.mutation {
            poi.validate()?;
            if self.entries.contains_key(&poi.id) || self.tombstones.contains(&poi.id) {
                return Err(StoreError::DuplicateId(poi.id.0.clone()));
            }
            let poi = Poi { version: 1, created_ms: ev.ts_ms, updated_ms: ev.ts_ms, ..poi.clone() };
            return Ok(Ok(Plan::Put(Entry { poi, last_writer: ev.client.clone() })));
        }

        let Some(current) = self.entries.get(target) else {
            if self.tombstones.contains(target) {
                return Ok(Err(Rejection::Deleted));
            }
            return Err(StoreError::UnknownId(target.0.clone()));
        };

        match &ev.mutation {
            Mutation::Create(_) => unreachable!("handled above"),
            Mutation::Delete(id) => Ok(Ok(Plan::Remove(id.clone()))),
            Mutation::Update(incoming) => {
                incoming.validate_fields()?;
                if !wins(ev, current) {
                    return Ok(Err(Rejection::Stale));
                }
                let stored = &current.poi;
                let mut track = stored.track.clone();
                if !track.is_empty() && incoming.geolocation != stored.geolocation {
                    track.push(TrackPoint { ts_ms: ev.ts_ms, position: incoming.geolocation });
                }
                let poi = Poi {
                    id: stored.id.clone(),
                    kind: incoming.kind,
                    geolocation: incoming.geolocation,
                    uncertainty_radius_m: incoming.uncertainty_radius_m,
                    source: incoming.source.clone(),
                    text_note: incoming.text_note.clone(),
                    version: stored.version + 1,
                    created_ms: stored.created_ms,
                    updated_ms: ev.ts_ms,
                    track,
                };
                Ok(Ok(Plan::Put(Entry { poi, last_writer: ev.client.clone() })))
            }
            Mutation::Track { point, .. } => {
                if !point.position.is_valid() {
                    return Err(StoreError::MalformedEvent("invalid track point".into()));
                }
                if !wins(ev, current) {
                    return Ok(Err(Rejection::Stale));
                }
                let poi = current.poi.tracked(*point, ev.ts_ms);
                Ok(Ok(Plan::Put(Entry { poi, last_writer: ev.client.clone() })))
            }
        }
    }

    /// All live POIs ordered by id.
    pub fn snapshot(&self) -> Vec<Poi> {
        self.entries.values().map(|e| e.poi.clone()).collect()
    }

    pub fn snapshot_json(&self) -> String {
        serde_json::to_string(&self.snapshot()).expect("snapshot serialization is infallible")
    }
}

impl Poi {
    /// This POI after an accepted track event: moved to `point`, which is
    /// appended to the track.
    pub fn tracked(&self, point: TrackPoint, ts_ms: i64) -> Poi {
        let mut poi = self.clone();
        poi.track.push(point);
        poi.geolocation = point.position;
        poi.version += 1;
        poi.updated_ms = ts_ms;
        poi
    }

    fn validate_fields(&self) -> Result<(), StoreError> {
        Poi { track: Vec::new(), ..self.clone() }.validate()
    }
}

fn wins(ev: &PoiEvent, current: &Entry) -> bool {
    (ev.ts_ms, ev.client.as_str()) > (current.poi.updated_ms, current.last_writer.as_str())
}

/// Rebuilds a store by folding `events` in order.
pub fn replay_log<'a>(events: impl IntoIterator<Item = &'a PoiEvent>) -> Result<PoiStore, StoreError> {
    let mut store = PoiStore::new();
    let mut prev: Option<u64> = None;
    for (i, ev) in events.into_iter().enumerate() {
        let line = i + 1;
        if prev.is_some_and(|p| ev.seq <= p) {
            return Err(StoreError::CorruptLog { line, reason: format!("seq {} does not increase", ev.seq) });
        }
        prev = Some(ev.seq);
        store.apply(ev).map_err(|e| StoreError::CorruptLog { line, reason: e.to_string() })?;
    }
    Ok(store)
}

/// Parses a JSON-lines event log. Blank lines are skipped.
pub fn read_events(reader: impl BufRead) -> Result<Vec<PoiEvent>, StoreError> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| StoreError::CorruptLog { line: line_no, reason: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: PoiEvent = serde_json::from_str(&line)
            .map_err(|e| StoreError::CorruptLog { line: line_no, reason: e.to_string() })?;
        events.push(ev);
    }
    Ok(events)
}

pub fn read_log_file(path: &Path) -> Result<Vec<PoiEvent>, StoreError> {
    read_events(BufReader::new(File::open(path)?))
}

/// Append-only JSON-lines event log.
pub struct EventLog {
    writer: BufWriter<File>,
}

impl EventLog {
    /// Opens `path` for appending, creating it if needed, and returns the log
    /// together with the store rebuilt from its existing contents.
    pub fn open(path: &Path) -> Result<(Self, PoiStore), StoreError> {
        let store = if path.exists() { replay_log(&read_log_file(path)?)? } else { PoiStore::new() };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok((EventLog { writer: BufWriter::new(file) }, store))
    }

    pub fn append(&mut self, ev: &PoiEvent) -> Result<(), StoreError> {
        self.writer.write_all(ev.to_json_line().as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(lat: f64, lon: f64) -> GeodeticCoord {
        GeodeticCoord::new(lat, lon, 200.0).unwrap()
    }

    fn create(seq: u64, ts: i64, client: &str, id: &str) -> PoiEvent {
        PoiEvent::new(seq, ts, client, Mutation::Create(Poi::new(id, PoiKind::Victim, geo(41.7, -86.2), 2.0)))
    }

    fn update(seq: u64, ts: i64, client: &str, id: &str, lat: f64) -> PoiEvent {
        PoiEvent::new(seq, ts, client, Mutation::Update(Poi::new(id, PoiKind::Suspect, geo(lat, -86.2), 3.0)))
    }

    #[test]
    fn create_on_empty_store() {
        let mut s = PoiStore::new();
        assert!(s.apply(&create(1, 100, "a", "p1")).unwrap().is_accepted());
        assert_eq!(s.len(), 1);
        let p = s.get(&PoiId::new("p1")).unwrap();
        assert_eq!((p.version, p.created_ms, p.updated_ms), (1, 100, 100));
    }

    #[test]
    fn older_update_is_stale() {
        let mut s = PoiStore::new();
        s.apply(&create(1, 100, "a", "p1")).unwrap();
        let before = s.snapshot_json();
        assert_eq!(s.apply(&update(2, 99, "b", "p1", 41.8)).unwrap(), Outcome::Rejected(Rejection::Stale));
        assert_eq!(s.snapshot_json(), before);
        // Equal timestamp falls back to client id ordering.
        assert_eq!(s.apply(&update(2, 100, "0", "p1", 41.8)).unwrap(), Outcome::Rejected(Rejection::Stale));
        assert!(s.apply(&update(2, 100, "b", "p1", 41.8)).unwrap().is_accepted());
        let p = s.get(&PoiId::new("p1")).unwrap();
        assert_eq!((p.version, p.kind, p.updated_ms, p.created_ms), (2, PoiKind::Suspect, 100, 100));
    }

    #[test]
    fn track_appends_and_moves() {
        let mut s = PoiStore::new();
        s.apply(&create(1, 100, "a", "p1")).unwrap();
        let point = TrackPoint { ts_ms: 200, position: geo(41.701, -86.2) };
        let ev = PoiEvent::new(2, 200, "a", Mutation::Track { id: PoiId::new("p1"), point });
        s.apply(&ev).unwrap();
        let p = s.get(&PoiId::new("p1")).unwrap();
        assert_eq!(p.track.len(), 1);
        assert_eq!(p.geolocation, point.position);
        assert_eq!(p.version, 2);

        // A later move through update keeps geolocation and track in step.
        s.apply(&update(3, 300, "a", "p1", 41.702)).unwrap();
        let p = s.get(&PoiId::new("p1")).unwrap();
        assert_eq!(p.track.len(), 2);
        assert_eq!(p.track.last().unwrap().position, p.geolocation);
    }

    #[test]
    fn delete_tombstones() {
        let mut s = PoiStore::new();
        s.apply(&create(1, 100, "a", "A")).unwrap();
        s.apply(&create(2, 100, "a", "B")).unwrap();
        s.apply(&PoiEvent::new(3, 110, "a", Mutation::Delete(PoiId::new("A")))).unwrap();
        let ids: Vec<_> = s.snapshot().into_iter().map(|p| p.id.0).collect();
        assert_eq!(ids, ["B"]);
        assert_eq!(s.apply(&update(4, 500, "b", "A", 41.0)).unwrap(), Outcome::Rejected(Rejection::Deleted));
        assert!(matches!(s.apply(&create(4, 500, "b", "A")), Err(StoreError::DuplicateId(_))));
        assert_eq!(s.last_seq(), 3);
    }

    #[test]
    fn unknown_and_malformed() {
        let mut s = PoiStore::new();
        assert!(matches!(s.apply(&update(1, 1, "a", "nope", 41.0)), Err(StoreError::UnknownId(_))));
        assert!(matches!(
            s.apply(&PoiEvent::new(1, 1, "a", Mutation::Delete(PoiId::new("nope")))),
            Err(StoreError::UnknownId(_))
        ));
        let mut bad = Poi::new("x", PoiKind::Hazard, geo(0.0, 0.0), -1.0);
        assert!(matches!(
            s.apply(&PoiEvent::new(1, 1, "a", Mutation::Create(bad.clone()))),
            Err(StoreError::MalformedEvent(_))
        ));
        bad.uncertainty_radius_m = 1.0;
        bad.geolocation.lat_deg = 120.0;
        assert!(matches!(
            s.apply(&PoiEvent::new(1, 1, "a", Mutation::Create(bad))),
            Err(StoreError::MalformedEvent(_))
        ));
        assert!(matches!(s.apply(&create(1, 1, "", "x")), Err(StoreError::MalformedEvent(_))));
        assert!(s.is_empty());
        assert_eq!(s.last_seq(), 0);
    }

    #[test]
    fn reapplying_a_seq_is_rejected() {
        let mut s = PoiStore::new();
        let ev = create(1, 100, "a", "p1");
        s.apply(&ev).unwrap();
        let before = s.snapshot_json();
        assert_eq!(s.apply(&ev).unwrap(), Outcome::Rejected(Rejection::AlreadyApplied));
        assert_eq!(s.snapshot_json(), before);
    }

    #[test]
    fn evaluate_does_not_mutate() {
        let s = PoiStore::new();
        assert!(s.evaluate(&create(1, 100, "a", "p1")).unwrap().is_accepted());
        assert!(s.is_empty());
    }

    #[test]
    fn event_json_field_names() {
        let ev = PoiEvent::new(7, 1000, "ops", Mutation::Track {
            id: PoiId::new("p1"),
            point: TrackPoint { ts_ms: 1000, position: geo(1.0, 2.0) },
        });
        let v: serde_json::Value = serde_json::from_str(&ev.to_json_line()).unwrap();
        let keys: BTreeSet<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["client", "id", "op", "point", "seq", "ts_ms"].map(String::from).into());
        assert_eq!(v["op"], "track");
        assert_eq!(v["point"]["alt"], 200.0);

        let ev = create(1, 5, "a", "p1");
        let v: serde_json::Value = serde_json::from_str(&ev.to_json_line()).unwrap();
        let poi_keys: BTreeSet<_> = v["poi"].as_object().unwrap().keys().cloned().collect();
        let want = ["alt", "created_ms", "id", "kind", "lat", "lon", "source", "text", "track", "unc_m", "updated_ms", "version"];
        assert_eq!(poi_keys, want.map(String::from).into());
    }

    #[test]
    fn event_schema_violations_fail_to_parse() {
        for line in [
            r#"{"seq":1,"ts_ms":1,"client":"a","op":"delete"}"#,
            r#"{"seq":1,"ts_ms":1,"client":"a","op":"delete","id":"x","extra":1}"#,
            r#"{"seq":1,"ts_ms":1,"client":"a","op":"explode","id":"x"}"#,
            r#"{"seq":1,"ts_ms":1,"client":"a","op":"create","poi":{"id":"x","kind":"dragon","lat":0,"lon":0,"alt":0,"unc_m":1}}"#,
        ] {
            assert!(serde_json::from_str::<PoiEvent>(line).is_err(), "{line}");
        }
    }

    #[test]
    fn replay_checks_sequence() {
        assert!(replay_log(&[]).unwrap().is_empty());
        let events = vec![create(1, 1, "a", "x"), create(1, 2, "a", "y")];
        assert!(matches!(replay_log(&events), Err(StoreError::CorruptLog { line: 2, .. })));
        let events = vec![create(2, 1, "a", "x"), create(1, 2, "a", "y")];
        assert!(matches!(replay_log(&events), Err(StoreError::CorruptLog { line: 2, .. })));
    }

    #[test]
    fn malformed_log_line_is_corrupt() {
        let text = format!("{}\nnot json\n", create(1, 1, "a", "x").to_json_line());
        assert!(matches!(read_events(text.as_bytes()), Err(StoreError::CorruptLog { line: 2, .. })));
    }

    #[test]
    fn event_log_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let (mut log, mut live) = EventLog::open(&path).unwrap();
        assert!(live.is_empty());
        let events = [create(1, 10, "a", "x"), update(2, 20, "b", "x", 41.9), create(3, 30, "a", "y")];
        for ev in &events {
            assert!(live.apply(ev).unwrap().is_accepted());
            log.append(ev).unwrap();
        }
        drop(log);
        let (_, restored) = EventLog::open(&path).unwrap();
        assert_eq!(restored.snapshot_json(), live.snapshot_json());
        assert_eq!(restored.last_seq(), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Final per-id state does not depend on the arrival order of
            // updates with distinct (ts, client) keys.
            #[test]
            fn lww_converges(keys in proptest::collection::btree_set((0i64..50, 0u8..4), 1..12),
                             perm_seed in any::<u64>()) {
                let updates: Vec<(i64, String, f64)> = keys.iter().enumerate()
                    .map(|(i, (ts, c))| (*ts + 1000, format!("c{c}"), 40.0 + i as f64 * 0.01)).collect();
                let run = |order: &[usize]| {
                    let mut s = PoiStore::new();
                    s.apply(&create(1, 0, "root", "p")).unwrap();
                    for (k, &i) in order.iter().enumerate() {
                        let (ts, c, lat) = &updates[i];
                        s.apply(&update(k as u64 + 2, *ts, c, "p", *lat)).unwrap();
                    }
                    s.get(&PoiId::new("p")).unwrap().geolocation
                };
                let forward: Vec<usize> = (0..updates.len()).collect();
                let mut shuffled = forward.clone();
                let mut x = perm_seed | 1;
                for i in (1..shuffled.len()).rev() {
                    x ^= x << 13; x ^= x >> 7; x ^= x << 17;
                    shuffled.swap(i, (x % (i as u64 + 1)) as usize);
                }
                prop_assert_eq!(run(&forward), run(&shuffled));
            }

            #[test]
            fn event_json_roundtrip(seq in 1u64..1_000_000, ts in 0i64..i64::MAX / 2, lat in -90.0f64..90.0,
                                    lon in -179.9f64..180.0, unc in 0.0f64..50.0, text in proptest::option::of(".{0,12}")) {
                let mut poi = Poi::new("id-1", PoiKind::Evidence, GeodeticCoord { lat_deg: lat, lon_deg: lon, alt_m: 12.5 }, unc);
                poi.text_note = text;
                let ev = PoiEvent::new(seq, ts, "cli", Mutation::Create(poi));
                let back: PoiEvent = serde_json::from_str(&ev.to_json_line()).unwrap();
                prop_assert_eq!(back, ev);
            }
        }
    }
}
