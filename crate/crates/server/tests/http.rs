mod common;

use std::sync::Arc;

use axum::http::{Method, StatusCode};
use collab_ir_core::repository::{DirStorage, Recovery, Repository, RepositoryConfig};
use collab_ir_core::session::SessionConfig;
use collab_ir_core::WorkspaceId;
use collab_ir_server::Service;
use common::*;
use serde_json::{json, Value};

fn events(svc: &Service, ws: &str) -> u64 {
    svc.repo.snapshot(&ws.parse::<WorkspaceId>().unwrap()).unwrap().last_seq
}

async fn setup() -> (Service, axum::Router, String) {
    let svc = memory_service(StubSource::default().with(
        "http://docs.test/exporters",
        "Exporters",
        "Cassava exporters in West Africa: cassava, cassava.",
    ));
    let router = svc.router();
    let (status, _) = call(&router, Method::POST, "/workspaces", None, Some(json!({"id": "w1"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, body) = call(&router, Method::POST, "/workspaces/w1/problems", Some("u1"), Some(cassava_body())).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    (svc, router, body["id"].as_str().unwrap().to_string())
}

#[tokio::test]
async fn healthz_and_unknown_routes() {
    let router = memory_service(StubSource::default()).router();
    let (status, body) = call(&router, Method::GET, "/healthz", None, None).await;
    assert_eq!((status, body), (StatusCode::OK, json!({"status": "ok"})));
    let (status, body) = call(&router, Method::GET, "/nope", None, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "not_found");
}

#[tokio::test]
async fn cassava_problem_is_created() {
    let (svc, router, id) = setup().await;
    let (status, body) = call(&router, Method::GET, &format!("/problems/{id}"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    let p = &body["problem"];
    assert_eq!(p["statement"], CASSAVA_STATEMENT);
    assert_eq!(p["objective"], CASSAVA_OBJECTIVE);
    assert_eq!(p["domains"].as_array().unwrap().len(), 5);
    assert_eq!(p["sources"][2]["locator"], "http://www.e-agriculture.org");
    assert_eq!(p["sub_problems"], json!([]));
    assert_eq!(body["workspace"], "w1");
    assert_eq!(events(&svc, "w1"), 1);

    let (status, view) = call(&router, Method::GET, "/workspaces/w1", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["last_seq"], 1);
    assert_eq!(view["tally"]["externalization"], 1);
    assert_eq!(view["members"], json!([]));
}

#[tokio::test]
async fn malformed_requests_are_400() {
    let (svc, router, _) = setup().await;
    let before = events(&svc, "w1");

    let (status, body) = call(&router, Method::POST, "/workspaces/w1/problems", None, Some(cassava_body())).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::BAD_REQUEST, Some("missing_user")));

    let (status, body) = raw_call(&router, Method::POST, "/workspaces/w1/problems", Some("u1"), "{not json").await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_body")));

    let (status, body) =
        call(&router, Method::POST, "/workspaces/w1/problems", Some("u1"), Some(json!({"statement": "  "}))).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::BAD_REQUEST, Some("empty_statement")));

    let bad_source = json!({"statement": "x", "sources": [{"name": "n", "locator": "not a url"}]});
    let (status, body) = call(&router, Method::POST, "/workspaces/w1/problems", Some("u1"), Some(bad_source)).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_source")));

    let (status, body) =
        call(&router, Method::POST, "/workspaces/w1/problems", Some("bad user"), Some(cassava_body())).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_user")));

    let (status, body) = call(&router, Method::GET, "/search?q=x&limit=lots", None, None).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_query")));

    let (status, body) = call(&router, Method::POST, "/workspaces", None, Some(json!({"id": "has space"}))).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_identifier")));
    let (status, body) = call(&router, Method::POST, "/workspaces", None, Some(json!({"id": "w1"}))).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::CONFLICT, Some("workspace_exists")));

    assert_eq!(events(&svc, "w1"), before, "rejected requests log nothing");
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let (_, router, _) = setup().await;
    let ghost = "00000000-0000-4000-8000-000000000000";
    for path in [
        "/problems/bad/collaborators".to_string(),
        format!("/problems/{ghost}/collaborators"),
        format!("/problems/{ghost}"),
        format!("/problems/{ghost}/reports"),
        "/workspaces/nope".to_string(),
        format!("/documents/{ghost}"),
    ] {
        let (status, body) = call(&router, Method::GET, &path, None, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{path}");
        assert!(body["error"]["code"].as_str().unwrap().starts_with("unknown_"), "{path}: {body}");
        assert!(body["error"]["message"].is_string());
    }
    let (status, _) = call(&router, Method::GET, "/workspaces/nope/history", Some("u1"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(
        &router,
        Method::POST,
        &format!("/problems/{ghost}/subproblems"),
        Some("u1"),
        Some(json!({"statement": "x"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let ann = json!({"target": {"type": "problem", "id": ghost}, "body": "x", "kind": "clarification"});
    let (status, _) = call(&router, Method::POST, "/annotations", Some("u1"), Some(ann)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn empty_search_is_empty_list() {
    let (_, router, _) = setup().await;
    let (status, body) = call(&router, Method::GET, "/search?q=&limit=5", None, None).await;
    assert_eq!((status, body), (StatusCode::OK, json!([])));
    let (status, body) = call(&router, Method::GET, "/search?q=cassava+import&limit=5", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body[0]["problem"]["statement"], CASSAVA_STATEMENT);
    assert!(body[0]["score"].as_f64().unwrap() > 0.0);
}

#[tokio::test]
async fn mutations_log_exactly_one_event_and_reads_none() {
    let (svc, router, id) = setup().await;
    let mut expected = events(&svc, "w1");

    let sub = json!({"statement": CASSAVA_SUB_PROBLEMS[0]});
    let (status, body) =
        call(&router, Method::POST, &format!("/problems/{id}/subproblems"), Some("u2"), Some(sub)).await;
    assert_eq!(status, StatusCode::CREATED);
    expected += 1;
    assert_eq!(body["seq"], expected);
    let child = body["id"].as_str().unwrap().to_string();

    let patch = json!({"add_keywords": ["exporters"], "objective": "to find a cassava supplier"});
    let (status, body) = call(&router, Method::PATCH, &format!("/problems/{id}"), Some("u1"), Some(patch)).await;
    assert_eq!(status, StatusCode::OK);
    expected += 1;
    assert_eq!(body["problem"]["sub_problems"], json!([child]));

    let ann = json!({"target": {"type": "problem", "id": id}, "body": "focus on Nigeria", "kind": "clarification"});
    let (status, _) = call(&router, Method::POST, "/annotations", Some("u3"), Some(ann)).await;
    assert_eq!(status, StatusCode::CREATED);
    expected += 1;

    let bad = json!({"target": {"type": "problem", "id": id}, "body": "great", "kind": "evaluation"});
    let (status, body) = call(&router, Method::POST, "/annotations", Some("u3"), Some(bad)).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::BAD_REQUEST, Some("kind_target_mismatch")));

    let ws: WorkspaceId = "w1".parse().unwrap();
    let _sub = svc.engine.join(&ws, &"u1".parse().unwrap(), None).unwrap();
    let opened = svc.engine.open_document(&ws, &"u1".parse().unwrap(), "http://docs.test/exporters", "").await.unwrap();
    expected += 1;
    let doc = opened.document.id.to_string();

    for (path, body) in [
        (format!("/documents/{doc}/tags"), json!({"tag": "exporters"})),
        (format!("/documents/{doc}/metadata"), json!({"key": "country", "value": "Nigeria"})),
        (format!("/documents/{doc}/classes"), json!({"class": "trade"})),
    ] {
        let (status, reply) = call(&router, Method::POST, &path, Some("u2"), Some(body)).await;
        assert_eq!(status, StatusCode::CREATED, "{path}");
        expected += 1;
        assert_eq!(reply["seq"], expected);
    }
    let eval = json!({"target": {"type": "document", "id": doc}, "body": "reliable", "kind": "evaluation"});
    let (status, _) = call(&router, Method::POST, "/annotations", Some("u2"), Some(eval)).await;
    assert_eq!(status, StatusCode::CREATED);
    expected += 1;
    assert_eq!(events(&svc, "w1"), expected);

    for path in [
        "/workspaces/w1".to_string(),
        format!("/problems/{id}"),
        format!("/problems/{id}/reports"),
        format!("/problems/{id}/collaborators?k=3"),
        format!("/documents/{doc}"),
        "/search?q=cassava".to_string(),
        "/healthz".to_string(),
    ] {
        let (status, _) = call(&router, Method::GET, &path, Some("u1"), None).await;
        assert_eq!(status, StatusCode::OK, "{path}");
    }
    assert_eq!(events(&svc, "w1"), expected, "reads log nothing");

    let (status, body) = call(&router, Method::GET, "/workspaces/w1/history", Some("u1"), None).await;
    assert_eq!(status, StatusCode::OK);
    expected += 1;
    assert_eq!(body["seq"], expected);
    assert_eq!(body["visits"].as_array().unwrap().len(), 1);
    assert_eq!(events(&svc, "w1"), expected, "history view is logged");
    let (_, view) = call(&router, Method::GET, "/workspaces/w1", None, None).await;
    assert_eq!(view["tally"]["internalization"], 2);

    let (status, _) = call(&router, Method::GET, "/workspaces/w1/history", None, None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, doc_view) = call(&router, Method::GET, &format!("/documents/{doc}"), None, None).await;
    assert_eq!(doc_view["notes"]["tags"], json!(["exporters"]));
    assert_eq!(doc_view["notes"]["metadata"]["country"], "Nigeria");
}

#[tokio::test]
async fn reports_follow_document_opens() {
    let (svc, router, id) = setup().await;
    let ws: WorkspaceId = "w1".parse().unwrap();
    let _sub = svc.engine.join(&ws, &"u1".parse().unwrap(), None).unwrap();
    svc.engine.open_document(&ws, &"u1".parse().unwrap(), "http://docs.test/exporters", "").await.unwrap();

    let (status, body) = call(&router, Method::GET, &format!("/problems/{id}/reports"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    let report = &body[0];
    assert_eq!(report["counts"][0]["count"], 3);
    assert_eq!(report["counts"][1]["count"], 1);
    assert_eq!(report["coverage"], 1.0);
}

#[tokio::test]
async fn collaborators_come_from_similar_workspaces() {
    let (_, router, first) = setup().await;
    let sub = json!({"statement": CASSAVA_SUB_PROBLEMS[2]});
    call(&router, Method::POST, &format!("/problems/{first}/subproblems"), Some("expert"), Some(sub)).await;

    call(&router, Method::POST, "/workspaces", None, Some(json!({"id": "w2"}))).await;
    let second = json!({"statement": "cassava flour imports", "keywords": ["cassava"], "domains": ["importation"]});
    let (_, body) = call(&router, Method::POST, "/workspaces/w2/problems", Some("newcomer"), Some(second)).await;
    let id = body["id"].as_str().unwrap();

    let (status, recs) = call(&router, Method::GET, &format!("/problems/{id}/collaborators?k=5"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    let users: Vec<&str> = recs.as_array().unwrap().iter().map(|r| r["user"].as_str().unwrap()).collect();
    assert_eq!(users, ["expert", "u1"]);
    assert!(recs.as_array().unwrap().iter().all(|r| r["online"] == false));
    assert!(!users.contains(&"newcomer"));
}

#[tokio::test]
async fn restart_serves_identical_reads() {
    let dir = tempfile::tempdir().unwrap();
    let open = || {
        let storage = Arc::new(DirStorage::open(dir.path(), false).unwrap());
        let repo = Repository::open(storage, RepositoryConfig::default(), Recovery::Strict).unwrap();
        Service::new(Arc::new(repo), Arc::new(StubSource::default()), SessionConfig::default())
    };

    let svc = open();
    let router = svc.router();
    call(&router, Method::POST, "/workspaces", None, Some(json!({"id": "w1"}))).await;
    let (_, body) = call(&router, Method::POST, "/workspaces/w1/problems", Some("u1"), Some(cassava_body())).await;
    let id = body["id"].as_str().unwrap().to_string();
    for s in CASSAVA_SUB_PROBLEMS {
        call(&router, Method::POST, &format!("/problems/{id}/subproblems"), Some("u2"), Some(json!({"statement": s})))
            .await;
    }
    let reads = [
        "/workspaces/w1".to_string(),
        format!("/problems/{id}"),
        format!("/problems/{id}/reports"),
        format!("/problems/{id}/collaborators"),
        "/search?q=cassava+exporters&limit=5".to_string(),
    ];
    let mut before: Vec<(StatusCode, Value)> = Vec::new();
    for path in &reads {
        before.push(call(&router, Method::GET, path, None, None).await);
    }
    drop(router);
    drop(svc);

    let router = open().router();
    for (path, expected) in reads.iter().zip(&before) {
        assert_eq!(&call(&router, Method::GET, path, None, None).await, expected, "{path}");
    }
}
