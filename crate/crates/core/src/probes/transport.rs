use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum TransportError {
    /// Network access is disabled.
    #[error("network access disabled: {0}")]
    Offline(String),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("connection failed: {0}")]
    Connect(String),
    /// A fixture transport was asked for something it has no record of.
    #[error("unexpected request: {0}")]
    Unexpected(String),
    #[error("transport error: {0}")]
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    /// Lowercased header names.
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn new(status: u16, body: impl Into<Vec<u8>>) -> Self {
        HttpResponse {
            status,
            headers: BTreeMap::new(),
            body: body.into(),
        }
    }

    pub fn with_header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.insert(name.to_ascii_lowercase(), value.into());
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }

    pub fn json(&self) -> Option<serde_json::Value> {
        serde_json::from_slice(&self.body).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DnsAnswer {
    NameServers(Vec<String>),
    /// The name exists but has no NS records of its own.
    NoRecords,
    NxDomain,
}

/// Network access used by the probes. Redirects are never followed.
pub trait Transport: Send + Sync {
    fn http_get(&self, url: &str, headers: &[(&str, &str)]) -> Result<HttpResponse, TransportError>;
    fn dns_ns(&self, domain: &str) -> Result<DnsAnswer, TransportError>;
}

/// Refuses every request.
#[derive(Debug, Default, Clone, Copy)]
pub struct OfflineTransport;

impl Transport for OfflineTransport {
    fn http_get(&self, url: &str, _: &[(&str, &str)]) -> Result<HttpResponse, TransportError> {
        Err(TransportError::Offline(url.to_string()))
    }

    fn dns_ns(&self, domain: &str) -> Result<DnsAnswer, TransportError> {
        Err(TransportError::Offline(format!("dns {domain}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FixtureHttp {
    Response(FixtureResponse),
    Error { error: TransportError },
}

/// File form of a canned response. `body_json` is serialized as the body
/// when `body` is absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureResponse {
    pub status: u16,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub body: Option<String>,
    #[serde(default)]
    pub body_json: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FixtureDns {
    Answer(DnsAnswer),
    Error { error: TransportError },
}

/// JSON document accepted by [`FixtureTransport::from_json`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FixtureSet {
    #[serde(default)]
    pub http: BTreeMap<String, FixtureHttp>,
    #[serde(default)]
    pub dns: BTreeMap<String, FixtureDns>,
}

/// Canned responses keyed by URL and DNS name. Unknown requests fail with
/// [`TransportError::Unexpected`]. Records hit counts and the largest
/// number of requests in flight at once.
#[derive(Default)]
pub struct FixtureTransport {
    http: BTreeMap<String, Result<HttpResponse, TransportError>>,
    dns: BTreeMap<String, Result<DnsAnswer, TransportError>>,
    hits: Mutex<BTreeMap<String, usize>>,
    requests: Mutex<Vec<String>>,
    in_flight: AtomicUsize,
    high_water: AtomicUsize,
    latency: Option<Duration>,
}

impl FixtureTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_set(set: FixtureSet) -> Self {
        let mut t = FixtureTransport::new();
        for (url, entry) in set.http {
            let result = match entry {
                FixtureHttp::Response(r) => {
                    let body = match (r.body, r.body_json) {
                        (Some(b), _) => b.into_bytes(),
                        (None, Some(v)) => serde_json::to_vec(&v).unwrap_or_default(),
                        (None, None) => Vec::new(),
                    };
                    let mut resp = HttpResponse::new(r.status, body);
                    for (k, v) in r.headers {
                        resp = resp.with_header(&k, v);
                    }
                    Ok(resp)
                }
                FixtureHttp::Error { error } => Err(error),
            };
            t.http.insert(url, result);
        }
        for (name, entry) in set.dns {
            let result = match entry {
                FixtureDns::Answer(a) => Ok(a),
                FixtureDns::Error { error } => Err(error),
            };
            t.dns.insert(name.to_ascii_lowercase(), result);
        }
        t
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::from_set(serde_json::from_str(text)?))
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = Some(latency);
        self
    }

    pub fn respond(mut self, url: &str, response: HttpResponse) -> Self {
        self.http.insert(url.to_string(), Ok(response));
        self
    }

    pub fn respond_json(self, url: &str, status: u16, body: serde_json::Value) -> Self {
        self.respond(url, HttpResponse::new(status, serde_json::to_vec(&body).unwrap()))
    }

    pub fn status(self, url: &str, status: u16) -> Self {
        self.respond(url, HttpResponse::new(status, Vec::new()))
    }

    pub fn fail(mut self, url: &str, error: TransportError) -> Self {
        self.http.insert(url.to_string(), Err(error));
        self
    }

    pub fn dns(mut self, domain: &str, answer: DnsAnswer) -> Self {
        self.dns.insert(domain.to_ascii_lowercase(), Ok(answer));
        self
    }

    pub fn dns_fail(mut self, domain: &str, error: TransportError) -> Self {
        self.dns.insert(domain.to_ascii_lowercase(), Err(error));
        self
    }

    /// Requests made for `key` (a URL, or `dns:<name>`).
    pub fn hits(&self, key: &str) -> usize {
        self.hits.lock().get(key).copied().unwrap_or(0)
    }

    pub fn total_hits(&self) -> usize {
        self.hits.lock().values().sum()
    }

    /// Every request key, in arrival order.
    pub fn requests(&self) -> Vec<String> {
        self.requests.lock().clone()
    }

    pub fn max_in_flight(&self) -> usize {
        self.high_water.load(Ordering::SeqCst)
    }

    fn enter(&self, key: &str) -> InFlight<'_> {
        *self.hits.lock().entry(key.to_string()).or_default() += 1;
        self.requests.lock().push(key.to_string());
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.high_water.fetch_max(now, Ordering::SeqCst);
        if let Some(latency) = self.latency {
            std::thread::sleep(latency);
        }
        InFlight(&self.in_flight)
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

impl Transport for FixtureTransport {
    fn http_get(&self, url: &str, _: &[(&str, &str)]) -> Result<HttpResponse, TransportError> {
        let _guard = self.enter(url);
        self.http
            .get(url)
            .cloned()
            .unwrap_or_else(|| Err(TransportError::Unexpected(url.to_string())))
    }

    fn dns_ns(&self, domain: &str) -> Result<DnsAnswer, TransportError> {
        let key = format!("dns:{}", domain.to_ascii_lowercase());
        let _guard = self.enter(&key);
        self.dns
            .get(&domain.to_ascii_lowercase())
            .cloned()
            .unwrap_or_else(|| Err(TransportError::Unexpected(key)))
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(at: DateTime<Utc>) -> Self {
        ManualClock(Mutex::new(at))
    }

    pub fn advance(&self, by: chrono::Duration) {
        *self.0.lock() += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock()
    }
}
