//! RFC 6455 transport: one hub session per WebSocket connection.

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};
use tokio::task::{JoinHandle, JoinSet};
use tokio_tungstenite::tungstenite::Message;

use crate::hub::Hub;
use crate::protocol::{ErrorCode, ServerMessage};

/// A running listener. Dropping it or calling [`Server::shutdown`] stops
/// accepting and closes every open connection.
pub struct Server {
    local_addr: SocketAddr,
    hub: Arc<Hub>,
    task: JoinHandle<()>,
}

impl Server {
    pub async fn bind(addr: impl ToSocketAddrs, hub: Arc<Hub>) -> io::Result<Server> {
        let listener = TcpListener::bind(addr).await?;
        let local_addr = listener.local_addr()?;
        let task = tokio::spawn(accept_loop(listener, hub.clone()));
        tracing::info!(%local_addr, "listening");
        Ok(Server { local_addr, hub, task })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.local_addr)
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    pub async fn shutdown(mut self) {
        self.task.abort();
        let _ = (&mut self.task).await;
    }

    /// Serves until the task is cancelled.
    pub async fn run(mut self) -> io::Result<()> {
        match (&mut self.task).await {
            Err(e) if e.is_panic() => Err(io::Error::other("accept loop panicked")),
            _ => Ok(()),
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn accept_loop(listener: TcpListener, hub: Arc<Hub>) {
    let mut connections = JoinSet::new();
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    connections.spawn(serve_connection(stream, peer, hub.clone()));
                }
                Err(e) => tracing::warn!(error = %e, "accept failed"),
            },
            Some(_) = connections.join_next(), if !connections.is_empty() => {}
        }
    }
}

async fn serve_connection(stream: TcpStream, peer: SocketAddr, hub: Arc<Hub>) {
    let _ = stream.set_nodelay(true);
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            tracing::debug!(%peer, error = %e, "handshake failed");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let (session, mut outbound) = hub.connect();
    tracing::debug!(%peer, ?session, "connected");
    loop {
        tokio::select! {
            incoming = source.next() => match incoming {
                Some(Ok(Message::Text(text))) => hub.handle(session, text.as_str()),
                Some(Ok(Message::Binary(_))) => {
                    let err = ServerMessage::error(ErrorCode::Malformed, "binary frames are not supported");
                    hub.reply(session, &err);
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
            frame = outbound.recv() => match frame {
                Some(frame) => {
                    if sink.send(Message::text(frame)).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
        }
    }
    hub.disconnect(session);
    let _ = sink.close().await;
    tracing::debug!(%peer, ?session, "disconnected");
}
