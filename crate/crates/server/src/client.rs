//! Headless hub client that mirrors POI state from broadcasts.

use std::collections::BTreeMap;

use aerotag_core::store::{Mutation, Poi, PoiId};
use futures_util::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

use crate::protocol::{ClientMessage, ServerMessage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClientError {
    #[error("websocket: {0}")]
    Transport(String),
    #[error("connection closed")]
    Closed,
    #[error("unexpected message: {0}")]
    Protocol(String),
    #[error("expected seq {expected}, got {got}")]
    Gap { expected: u64, got: u64 },
}

impl From<tokio_tungstenite::tungstenite::Error> for ClientError {
    fn from(e: tokio_tungstenite::tungstenite::Error) -> Self {
        ClientError::Transport(e.to_string())
    }
}

/// POI state rebuilt from a snapshot plus the broadcasts that follow it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Replica {
    seq: u64,
    pois: BTreeMap<PoiId, Poi>,
    observed: Vec<u64>,
}

impl Replica {
    pub fn from_snapshot(seq: u64, pois: Vec<Poi>) -> Self {
        Replica { seq, pois: pois.into_iter().map(|p| (p.id.clone(), p)).collect(), observed: Vec::new() }
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    /// Broadcast seqs applied since the snapshot, in arrival order.
    pub fn observed(&self) -> &[u64] {
        &self.observed
    }

    pub fn get(&self, id: &PoiId) -> Option<&Poi> {
        self.pois.get(id)
    }

    pub fn len(&self) -> usize {
        self.pois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pois.is_empty()
    }

    /// Applies a mutation broadcast; returns `false` for other messages.
    pub fn apply(&mut self, msg: &ServerMessage) -> Result<bool, ClientError> {
        let Some(ev) = msg.event() else { return Ok(false) };
        if ev.seq != self.seq + 1 {
            return Err(ClientError::Gap { expected: self.seq + 1, got: ev.seq });
        }
        match ev.mutation {
            Mutation::Create(poi) | Mutation::Update(poi) => {
                self.pois.insert(poi.id.clone(), poi);
            }
            Mutation::Delete(id) => {
                self.pois.remove(&id);
            }
            Mutation::Track { id, point } => {
                let poi = self
                    .pois
                    .get(&id)
                    .ok_or_else(|| ClientError::Protocol(format!("track for unknown POI `{id}`")))?;
                let moved = poi.tracked(point, ev.ts_ms);
                self.pois.insert(id, moved);
            }
        }
        self.seq = ev.seq;
        self.observed.push(ev.seq);
        Ok(true)
    }

    pub fn snapshot(&self) -> Vec<Poi> {
        self.pois.values().cloned().collect()
    }

    /// Same serialization as the hub's own snapshot.
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string(&self.snapshot()).expect("snapshot serialization is infallible")
    }
}

pub struct Client {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
    client_id: String,
    replica: Replica,
}

impl Client {
    /// Connects, says hello and loads the snapshot.
    pub async fn connect(url: &str, client_id: impl Into<String>) -> Result<Client, ClientError> {
        let (ws, _) = tokio_tungstenite::connect_async(url).await?;
        let client_id = client_id.into();
        let mut client = Client { ws, client_id: client_id.clone(), replica: Replica::default() };
        client.send(&ClientMessage::Hello { client_id }).await?;
        match client.next_message().await? {
            ServerMessage::Snapshot { seq, pois } => client.replica = Replica::from_snapshot(seq, pois),
            other => return Err(ClientError::Protocol(other.to_json())),
        }
        Ok(client)
    }

    pub fn client_id(&self) -> &str {
        &self.client_id
    }

    pub fn replica(&self) -> &Replica {
        &self.replica
    }

    pub async fn send(&mut self, msg: &ClientMessage) -> Result<(), ClientError> {
        self.send_text(msg.to_json()).await
    }

    pub async fn send_text(&mut self, text: String) -> Result<(), ClientError> {
        self.ws.send(Message::text(text)).await?;
        Ok(())
    }

    async fn next_message(&mut self) -> Result<ServerMessage, ClientError> {
        loop {
            match self.ws.next().await {
                Some(Ok(Message::Text(text))) => {
                    return ServerMessage::parse(text.as_str()).map_err(|e| ClientError::Protocol(e.to_string()))
                }
                Some(Ok(Message::Close(_))) | None => return Err(ClientError::Closed),
                Some(Ok(_)) => {}
                Some(Err(e)) => return Err(e.into()),
            }
        }
    }

    /// Next message from the hub; mutation broadcasts are applied to the
    /// replica before being returned.
    pub async fn recv(&mut self) -> Result<ServerMessage, ClientError> {
        let msg = self.next_message().await?;
        self.replica.apply(&msg)?;
        Ok(msg)
    }

    /// Sends `msg` and returns the direct reply (ack, error or overlays),
    /// applying any broadcasts that arrive first.
    pub async fn request(&mut self, msg: &ClientMessage) -> Result<ServerMessage, ClientError> {
        self.send(msg).await?;
        loop {
            let reply = self.recv().await?;
            if reply.event().is_none() {
                return Ok(reply);
            }
        }
    }

    /// Receives until the replica has applied `seq`.
    pub async fn sync_to(&mut self, seq: u64) -> Result<(), ClientError> {
        while self.replica.seq() < seq {
            self.recv().await?;
        }
        Ok(())
    }

    pub async fn close(mut self) -> Result<(), ClientError> {
        self.ws.close(None).await?;
        Ok(())
    }
}
