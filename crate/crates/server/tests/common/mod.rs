#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use async_trait::async_trait;
use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use collab_ir_core::fetcher::{DocumentSource, FetchResult, FetchStatus};
use collab_ir_core::repository::{Repository, RepositoryConfig};
use collab_ir_core::session::SessionConfig;
use collab_ir_server::Service;
use serde_json::Value;
use tower::ServiceExt;
use url::Url;

/// Serves canned pages; anything else is a 404.
#[derive(Default, Clone)]
pub struct StubSource {
    pub pages: HashMap<String, (String, String)>,
}

impl StubSource {
    pub fn with(mut self, url: &str, title: &str, text: &str) -> Self {
        self.pages.insert(url.to_string(), (title.to_string(), text.to_string()));
        self
    }
}

#[async_trait]
impl DocumentSource for StubSource {
    async fn fetch(&self, url: &Url) -> FetchResult {
        let page = self.pages.get(url.as_str()).cloned().or_else(|| {
            // Unknown pages under /gen/ get deterministic text derived from the path.
            url.path().strip_prefix("/gen/").map(|p| (p.to_string(), format!("cassava {p} page text")))
        });
        match page {
            Some((title, text)) => {
                FetchResult { url: url.clone(), status: FetchStatus::Ok, byte_size: text.len() as u64, title, text }
            }
            None => FetchResult {
                url: url.clone(),
                status: FetchStatus::HttpError(404),
                title: String::new(),
                text: String::new(),
                byte_size: 0,
            },
        }
    }
}

pub fn memory_service(source: StubSource) -> Service {
    let repo = Arc::new(Repository::in_memory(RepositoryConfig::default()));
    Service::new(repo, Arc::new(source), SessionConfig::default())
}

pub async fn call(
    router: &Router,
    method: Method,
    path: &str,
    user: Option<&str>,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(path);
    if let Some(u) = user {
        req = req.header("X-User-Id", u);
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub async fn raw_call(
    router: &Router,
    method: Method,
    path: &str,
    user: Option<&str>,
    body: &str,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(path).header("content-type", "application/json");
    if let Some(u) = user {
        req = req.header("X-User-Id", u);
    }
    let resp = router.clone().oneshot(req.body(Body::from(body.to_string())).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

pub const CASSAVA_STATEMENT: &str = "cassava plantation in West Africa";
pub const CASSAVA_OBJECTIVE: &str = "to know from which company to import cassava from";

pub const CASSAVA_SUB_PROBLEMS: [&str; 7] = [
    "major exporters of cassava in West Africa",
    "countries in West Africa that produce cassava and the regions engaged in the production as well as problems related to production in such areas",
    "major importers of cassava from West Africa",
    "various products made from cassava and the companies involved",
    "qualities of cassava production in West Africa",
    "cassava exporting agents in West Africa",
    "local consumption of cassava in Nigeria",
];

pub const CASSAVA_DOMAINS: [&str; 5] =
    ["agriculture", "nutrition", "international business", "exportation", "importation"];

pub fn cassava_body() -> Value {
    serde_json::json!({
        "statement": CASSAVA_STATEMENT,
        "objective": CASSAVA_OBJECTIVE,
        "domains": CASSAVA_DOMAINS,
        "keywords": ["cassava", "West Africa", "import"],
        "sources": [
            { "name": "Google", "locator": "https://www.google.com" },
            { "name": "IITA", "locator": "http://www.iita.org" },
            { "name": "e-agriculture", "locator": "http://www.e-agriculture.org" }
        ],
        "indicators": [
            { "attribute": "product", "value": "cassava" },
            { "attribute": "region", "value": "West Africa" }
        ]
    })
}
