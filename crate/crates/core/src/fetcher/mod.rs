//! Server-side document retrieval and text extraction.
//!
//! Failures never escape as errors: they are reported through
//! [`FetchStatus`] so a failed fetch still yields a well-formed record.

mod html;

use std::time::Duration;

use async_trait::async_trait;
use reqwest::header::{CONTENT_LENGTH, CONTENT_TYPE};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tokio::time::Instant;
use url::Url;

pub use html::{extract, Extracted};

pub const USER_AGENT: &str = concat!("collab-ir-fetcher/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "code")]
pub enum FetchStatus {
    Ok,
    HttpError(u16),
    NetworkError,
    TooLarge,
    UnsupportedType,
}

impl FetchStatus {
    pub fn is_ok(self) -> bool {
        self == FetchStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchResult {
    pub url: Url,
    pub status: FetchStatus,
    pub title: String,
    pub text: String,
    pub byte_size: u64,
}

impl FetchResult {
    fn failed(url: &Url, status: FetchStatus, byte_size: u64) -> Self {
        Self { url: url.clone(), status, title: String::new(), text: String::new(), byte_size }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchConfig {
    pub timeout: Duration,
    pub max_bytes: u64,
    pub max_inflight: usize,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self { timeout: Duration::from_secs(15), max_bytes: 5 * 1024 * 1024, max_inflight: 16 }
    }
}

/// Anything that can turn a URL into extracted text.
#[async_trait]
pub trait DocumentSource: Send + Sync {
    async fn fetch(&self, url: &Url) -> FetchResult;
}

/// How a response body should be turned into text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BodyKind {
    Html,
    Plain,
    Sniff,
}

fn classify_content_type(value: Option<&str>) -> Option<BodyKind> {
    let Some(value) = value else {
        return Some(BodyKind::Sniff);
    };
    let mime = value.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    match mime.as_str() {
        "text/html" | "application/xhtml+xml" => Some(BodyKind::Html),
        "text/plain" => Some(BodyKind::Plain),
        "" => Some(BodyKind::Sniff),
        _ => None,
    }
}

/// Builds a [`FetchResult`] from response bytes. Identical input gives
/// identical output.
pub fn extract_body(url: &Url, content_type: Option<&str>, body: &[u8]) -> FetchResult {
    let Some(kind) = classify_content_type(content_type) else {
        return FetchResult::failed(url, FetchStatus::UnsupportedType, body.len() as u64);
    };
    let decoded = String::from_utf8_lossy(body);
    let is_html = match kind {
        BodyKind::Html => true,
        BodyKind::Plain => false,
        BodyKind::Sniff => decoded.trim_start().starts_with('<'),
    };
    let (title, text) = if is_html {
        let e = extract(&decoded);
        (e.title, e.text)
    } else {
        (String::new(), decoded.into_owned())
    };
    FetchResult { url: url.clone(), status: FetchStatus::Ok, title, text, byte_size: body.len() as u64 }
}

enum Attempt {
    Done(FetchResult),
    NetworkError,
}

/// HTTP fetcher with a size cap, an overall timeout, one retry on network
/// errors and a bound on concurrent requests.
pub struct Fetcher {
    client: reqwest::Client,
    config: FetchConfig,
    permits: Semaphore,
}

impl Fetcher {
    pub fn new(config: FetchConfig) -> Result<Self, reqwest::Error> {
        let client = reqwest::Client::builder().user_agent(USER_AGENT).build()?;
        let permits = Semaphore::new(config.max_inflight.max(1));
        Ok(Self { client, config, permits })
    }

    pub fn config(&self) -> &FetchConfig {
        &self.config
    }

    /// Fetches `url`, giving up once `timeout` has elapsed in total.
    pub async fn fetch_with_timeout(&self, url: &Url, timeout: Duration) -> FetchResult {
        if !matches!(url.scheme(), "http" | "https") {
            return FetchResult::failed(url, FetchStatus::NetworkError, 0);
        }
        let deadline = Instant::now() + timeout;
        let Ok(Ok(_permit)) = tokio::time::timeout_at(deadline, self.permits.acquire()).await else {
            return FetchResult::failed(url, FetchStatus::NetworkError, 0);
        };

        for attempt in 0..2 {
            match tokio::time::timeout_at(deadline, self.attempt(url)).await {
                Ok(Attempt::Done(result)) => return result,
                Ok(Attempt::NetworkError) if attempt == 0 => {
                    tracing::debug!(%url, "network error, retrying once");
                }
                Ok(Attempt::NetworkError) => break,
                Err(_) => {
                    tracing::debug!(%url, "fetch timed out");
                    break;
                }
            }
        }
        FetchResult::failed(url, FetchStatus::NetworkError, 0)
    }

    async fn attempt(&self, url: &Url) -> Attempt {
        let mut response = match self.client.get(url.clone()).send().await {
            Ok(r) => r,
            Err(_) => return Attempt::NetworkError,
        };
        let status = response.status();
        if !status.is_success() {
            return Attempt::Done(FetchResult::failed(url, FetchStatus::HttpError(status.as_u16()), 0));
        }
        let content_type = response.headers().get(CONTENT_TYPE).and_then(|v| v.to_str().ok()).map(str::to_string);
        if classify_content_type(content_type.as_deref()).is_none() {
            return Attempt::Done(FetchResult::failed(url, FetchStatus::UnsupportedType, 0));
        }
        let declared =
            response.headers().get(CONTENT_LENGTH).and_then(|v| v.to_str().ok()).and_then(|v| v.parse::<u64>().ok());
        if let Some(len) = declared {
            if len > self.config.max_bytes {
                return Attempt::Done(FetchResult::failed(url, FetchStatus::TooLarge, len));
            }
        }

        let mut body = Vec::new();
        loop {
            match response.chunk().await {
                Ok(Some(chunk)) => {
                    if (body.len() + chunk.len()) as u64 > self.config.max_bytes {
                        let seen = (body.len() + chunk.len()) as u64;
                        return Attempt::Done(FetchResult::failed(url, FetchStatus::TooLarge, seen));
                    }
                    body.extend_from_slice(&chunk);
                }
                Ok(None) => break,
                Err(_) => return Attempt::NetworkError,
            }
        }
        Attempt::Done(extract_body(url, content_type.as_deref(), &body))
    }
}

#[async_trait]
impl DocumentSource for Fetcher {
    async fn fetch(&self, url: &Url) -> FetchResult {
        self.fetch_with_timeout(url, self.config.timeout).await
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn url() -> Url {
        "http://example.test/page".parse().unwrap()
    }

    #[test]
    fn html_body_is_extracted() {
        let r = extract_body(&url(), Some("text/html; charset=utf-8"), b"<title>T</title><p>cassava</p>");
        assert_eq!(r.status, FetchStatus::Ok);
        assert_eq!(r.title, "T");
        assert!(r.text.contains("cassava"));
    }

    #[test]
    fn plain_text_passes_through() {
        let r = extract_body(&url(), Some("text/plain"), b"<p> is literal here");
        assert_eq!(r.text, "<p> is literal here");
        assert_eq!(r.title, "");
    }

    #[test]
    fn other_types_are_unsupported() {
        let r = extract_body(&url(), Some("application/pdf"), b"%PDF-1.4");
        assert_eq!(r.status, FetchStatus::UnsupportedType);
        assert!(r.text.is_empty());
    }

    #[test]
    fn missing_content_type_is_sniffed() {
        assert_eq!(extract_body(&url(), None, b"  <p>x</p>").text, "x");
        assert_eq!(extract_body(&url(), None, b"just text").text, "just text");
    }

    #[test]
    fn status_serializes_with_code() {
        let json = serde_json::to_string(&FetchStatus::HttpError(404)).unwrap();
        assert_eq!(json, r#"{"type":"http_error","code":404}"#);
        assert_eq!(serde_json::to_string(&FetchStatus::Ok).unwrap(), r#"{"type":"ok"}"#);
    }
}
