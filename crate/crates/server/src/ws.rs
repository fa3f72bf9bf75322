//! WebSocket transport for the session protocol.
//!
//! `GET /ws/{workspace}?user=u1[&since=N]` upgrades and joins at once; without
//! `user` the first message must be a `join`. Each text frame carries one
//! or more newline-terminated protocol lines, and every server message is
//! sent as its own frame. Commands from one connection run in arrival
//! order; updates keep flowing while a command (e.g. a slow `open`) runs.

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::response::Response;
use collab_ir_core::session::protocol::{decode_line, encode_line};
use collab_ir_core::session::{ClientMessage, ServerMessage, SessionEngine, Subscription};
use collab_ir_core::{KnowledgeError, UserId, WorkspaceId};
use serde::Deserialize;
use std::sync::Arc;
use tokio::sync::mpsc;

use crate::api::{ApiError, Params};
use crate::Service;

#[derive(Debug, Deserialize)]
pub struct WsParams {
    pub user: Option<String>,
    pub since: Option<u64>,
}

pub async fn upgrade(
    State(svc): State<Service>,
    Path(raw): Path<String>,
    Params(params): Params<WsParams>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let workspace: WorkspaceId =
        raw.parse().map_err(|e: KnowledgeError| ApiError::bad_request("invalid_identifier", e.to_string()))?;
    let user: Option<UserId> = params
        .user
        .map(|u| u.parse())
        .transpose()
        .map_err(|e: KnowledgeError| ApiError::bad_request("invalid_user", e.to_string()))?;
    let engine = svc.engine.clone();
    Ok(ws.on_upgrade(move |socket| serve_socket(engine, workspace, user, params.since, socket)))
}

enum Outbound {
    Reply(ServerMessage),
    Joined(Subscription),
    Left,
}

fn high_water(engine: &SessionEngine, workspace: &WorkspaceId) -> u64 {
    engine.repository().snapshot(workspace).map(|s| s.last_seq).unwrap_or(0)
}

/// Executes commands in order on behalf of one connection.
async fn command_loop(
    engine: Arc<SessionEngine>,
    workspace: WorkspaceId,
    mut user: Option<UserId>,
    mut commands: mpsc::Receiver<ClientMessage>,
    out: mpsc::Sender<Outbound>,
) {
    while let Some(command) = commands.recv().await {
        let outcome = match (&user, command) {
            (Some(_), ClientMessage::Join { .. }) => {
                Err(("already_joined", "this connection has already joined".to_string()))
            }
            (None, ClientMessage::Join { user: who, since }) => match engine.join(&workspace, &who, since) {
                Ok(sub) => {
                    user = Some(who);
                    Ok(Some(Outbound::Joined(sub)))
                }
                Err(e) => Err((e.code(), e.to_string())),
            },
            (None, _) => Err(("not_joined", "send a join message first".to_string())),
            // The socket loop owns the subscription and performs the leave,
            // so it never mistakes the closing channel for an eviction.
            (Some(_), ClientMessage::Leave) => {
                user = None;
                Ok(Some(Outbound::Left))
            }
            (Some(who), command) => match engine.handle(&workspace, who, command).await {
                Ok(reply) => Ok(reply.map(Outbound::Reply)),
                Err(e) => Err((e.code(), e.to_string())),
            },
        };
        let message = match outcome {
            Ok(Some(m)) => m,
            Ok(None) => continue,
            Err((code, text)) => Outbound::Reply(ServerMessage::error(high_water(&engine, &workspace), code, text)),
        };
        if out.send(message).await.is_err() {
            return;
        }
    }
}

async fn next_update(sub: &mut Option<Subscription>) -> Option<ServerMessage> {
    match sub {
        Some(s) => s.receiver.recv().await,
        None => std::future::pending().await,
    }
}

async fn send(socket: &mut WebSocket, message: &ServerMessage) -> bool {
    socket.send(Message::Text(encode_line(message).into())).await.is_ok()
}

async fn serve_socket(
    engine: Arc<SessionEngine>,
    workspace: WorkspaceId,
    user: Option<UserId>,
    since: Option<u64>,
    mut socket: WebSocket,
) {
    let mut sub: Option<Subscription> = None;
    if let Some(who) = &user {
        match engine.join(&workspace, who, since) {
            Ok(s) => sub = Some(s),
            Err(e) => {
                let _ = send(&mut socket, &ServerMessage::error(0, e.code(), e.to_string())).await;
                return;
            }
        }
    }

    let (command_tx, command_rx) = mpsc::channel(64);
    let (out_tx, mut out_rx) = mpsc::channel(64);
    let worker = tokio::spawn(command_loop(engine.clone(), workspace.clone(), user, command_rx, out_tx));

    loop {
        // Updates first: an event is queued on the subscription before the
        // command that caused it replies, so a reply never overtakes it.
        tokio::select! {
            biased;
            update = next_update(&mut sub) => match update {
                Some(m) => {
                    if !send(&mut socket, &m).await {
                        break;
                    }
                }
                // Replaced by a newer connection or dropped as too slow.
                None => break,
            },
            out = out_rx.recv() => match out {
                Some(Outbound::Reply(m)) => {
                    if !send(&mut socket, &m).await {
                        break;
                    }
                }
                Some(Outbound::Joined(s)) => sub = Some(s),
                Some(Outbound::Left) => {
                    if let Some(s) = sub.take() {
                        engine.disconnect(&s.workspace, &s.user, s.connection);
                    }
                }
                None => break,
            },
            frame = socket.recv() => {
                let text = match frame {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Binary(b))) => match String::from_utf8(b.to_vec()) {
                        Ok(t) => t,
                        Err(_) => {
                            let m = ServerMessage::error(high_water(&engine, &workspace), "bad_message", "frame is not UTF-8");
                            if !send(&mut socket, &m).await { break; }
                            continue;
                        }
                    },
                    Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                };
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    match decode_line::<ClientMessage>(line) {
                        Ok(command) => {
                            if command_tx.send(command).await.is_err() {
                                break;
                            }
                        }
                        Err(e) => {
                            let m = ServerMessage::error(high_water(&engine, &workspace), "bad_message", e.to_string());
                            if !send(&mut socket, &m).await { break; }
                        }
                    }
                }
            }
        }
    }

    drop(command_tx);
    worker.abort();
    if let Some(s) = sub {
        engine.disconnect(&s.workspace, &s.user, s.connection);
    }
}
