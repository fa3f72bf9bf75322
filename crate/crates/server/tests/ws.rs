mod common;

use std::net::SocketAddr;
use std::time::Duration;

use collab_ir_core::session::protocol::{decode_line, encode_line};
use collab_ir_core::session::{AwarenessUpdate, ClientMessage, PresenceChange, ServerMessage};
use collab_ir_core::ActivityKind;
use common::*;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start(source: StubSource) -> SocketAddr {
    let svc = memory_service(source);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(svc.serve(listener, std::future::pending()));
    addr
}

async fn connect(addr: SocketAddr, query: &str) -> Client {
    connect_async(format!("ws://{addr}/ws/w1{query}")).await.unwrap().0
}

async fn send(c: &mut Client, m: &ClientMessage) {
    c.send(Message::text(encode_line(m))).await.unwrap();
}

async fn recv(c: &mut Client) -> ServerMessage {
    loop {
        let frame = tokio::time::timeout(Duration::from_secs(5), c.next()).await.expect("no message in time");
        match frame.unwrap().unwrap() {
            Message::Text(t) => {
                assert!(t.ends_with('\n'), "frames are newline terminated");
                return decode_line(&t).unwrap();
            }
            Message::Ping(_) | Message::Pong(_) => continue,
            other => panic!("unexpected frame {other:?}"),
        }
    }
}

async fn recv_activity(c: &mut Client) -> collab_ir_core::ActivityEvent {
    loop {
        if let ServerMessage::Update { payload: AwarenessUpdate::Activity(e), .. } = recv(c).await {
            return e;
        }
    }
}

#[tokio::test]
async fn chat_and_query_reach_partner() {
    let addr = start(StubSource::default()).await;
    let mut a = connect(addr, "?user=alice").await;
    assert!(matches!(recv(&mut a).await, ServerMessage::State { seq: 0, .. }));
    let mut b = connect(addr, "?user=bob").await;
    let ServerMessage::State { payload, .. } = recv(&mut b).await else { panic!("state first") };
    assert_eq!(payload.members.len(), 2);
    match recv(&mut a).await {
        ServerMessage::Update { payload: AwarenessUpdate::Presence(p), .. } => {
            assert_eq!((p.actor.as_str(), p.kind), ("bob", PresenceChange::Joined))
        }
        other => panic!("{other:?}"),
    }

    send(&mut a, &ClientMessage::Chat { body: "found an exporter list".into() }).await;
    send(&mut a, &ClientMessage::Query { query: "cassava exporters".into(), source: "Google".into() }).await;
    let chat = recv_activity(&mut b).await;
    let query = recv_activity(&mut b).await;
    assert_eq!((chat.seq, chat.kind()), (1, ActivityKind::ChatMessage));
    assert_eq!((query.seq, query.kind()), (2, ActivityKind::QuerySubmitted));
    assert_eq!(query.actor.as_str(), "alice");
    assert_eq!(recv_activity(&mut a).await.seq, 1, "sender sees its own events too");
}

#[tokio::test]
async fn open_then_sync_shares_the_document() {
    let source = StubSource::default().with("http://docs.test/a", "Exporters", "cassava");
    let addr = start(source).await;
    let mut a = connect(addr, "?user=alice").await;
    let mut b = connect(addr, "?user=bob").await;
    recv(&mut a).await;
    recv(&mut b).await;

    send(&mut a, &ClientMessage::Open { url: "http://docs.test/a".into(), title: String::new() }).await;
    let opened = recv_activity(&mut b).await;
    assert_eq!(opened.kind(), ActivityKind::DocumentOpened);
    let collab_ir_core::EventPayload::DocumentOpened { document, .. } = &opened.payload else { panic!() };

    send(&mut b, &ClientMessage::Sync { leader: "alice".parse().unwrap() }).await;
    let synced = recv_activity(&mut b).await;
    assert_eq!(synced.kind(), ActivityKind::ViewSync);
    let collab_ir_core::EventPayload::ViewSync { document: target, .. } = &synced.payload else { panic!() };
    assert_eq!(*target, document.id);
}

#[tokio::test]
async fn errors_heartbeats_and_explicit_join() {
    let addr = start(StubSource::default()).await;
    let mut c = connect(addr, "").await;

    send(&mut c, &ClientMessage::Chat { body: "hi".into() }).await;
    assert!(matches!(recv(&mut c).await, ServerMessage::Error { payload, .. } if payload.code == "not_joined"));

    c.send(Message::text("{\"type\":\"screen_share\",\"payload\":{}}\n")).await.unwrap();
    assert!(matches!(recv(&mut c).await, ServerMessage::Error { payload, .. } if payload.code == "bad_message"));

    send(&mut c, &ClientMessage::Join { user: "carol".parse().unwrap(), since: None }).await;
    assert!(matches!(recv(&mut c).await, ServerMessage::State { .. }));
    send(&mut c, &ClientMessage::Join { user: "carol".parse().unwrap(), since: None }).await;
    assert!(matches!(recv(&mut c).await, ServerMessage::Error { payload, .. } if payload.code == "already_joined"));

    send(&mut c, &ClientMessage::Chat { body: "   ".into() }).await;
    assert!(matches!(recv(&mut c).await, ServerMessage::Error { payload, .. } if payload.code == "empty_body"));

    // Two commands in one frame.
    let frame = encode_line(&ClientMessage::Chat { body: "one".into() }) + &encode_line(&ClientMessage::Heartbeat);
    c.send(Message::text(frame)).await.unwrap();
    assert_eq!(recv_activity(&mut c).await.seq, 1);
    assert!(matches!(recv(&mut c).await, ServerMessage::Heartbeat { seq: 1, .. }));

    send(&mut c, &ClientMessage::Leave).await;
    send(&mut c, &ClientMessage::Chat { body: "gone".into() }).await;
    assert!(matches!(recv(&mut c).await, ServerMessage::Error { payload, .. } if payload.code == "not_joined"));
}

#[tokio::test]
async fn reconnect_with_since_backfills() {
    let addr = start(StubSource::default()).await;
    let mut a = connect(addr, "?user=alice").await;
    recv(&mut a).await;
    for body in ["one", "two", "three"] {
        send(&mut a, &ClientMessage::Chat { body: body.into() }).await;
        recv_activity(&mut a).await;
    }
    let mut b = connect(addr, "?user=bob&since=1").await;
    assert!(matches!(recv(&mut b).await, ServerMessage::State { seq: 3, .. }));
    assert_eq!(recv_activity(&mut b).await.seq, 2);
    assert_eq!(recv_activity(&mut b).await.seq, 3);
}

#[tokio::test]
async fn closing_the_socket_leaves() {
    let addr = start(StubSource::default()).await;
    let mut a = connect(addr, "?user=alice").await;
    recv(&mut a).await;
    let mut b = connect(addr, "?user=bob").await;
    recv(&mut b).await;
    recv(&mut a).await;
    b.close(None).await.unwrap();
    match recv(&mut a).await {
        ServerMessage::Update { payload: AwarenessUpdate::Presence(p), .. } => {
            assert_eq!((p.actor.as_str(), p.kind), ("bob", PresenceChange::Left))
        }
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn bad_upgrade_parameters_are_rejected() {
    let addr = start(StubSource::default()).await;
    let err = connect_async(format!("ws://{addr}/ws/w1?user=has%20space")).await.unwrap_err();
    match err {
        tokio_tungstenite::tungstenite::Error::Http(resp) => assert_eq!(resp.status(), 400),
        other => panic!("{other:?}"),
    }
}
