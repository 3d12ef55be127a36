//! Evidence gathering: domain availability (DNS + RDAP), GitHub repository
//! status, npm name availability and CocoaPods trunk lookups.
//!
//! All network access goes through a [`Transport`]. Results can be cached
//! ([`ProbeCache`]) and run in bounded parallel batches ([`Prober::bulk`]).
//!
//! A subject is only ever reported `available` when an authoritative
//! not-found answer (RDAP 404, registry 404) is part of its evidence.

mod cache;
mod domain;
mod github;
mod http;
mod registry;
mod transport;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{ProbeCache, DEFAULT_TTL_DAYS};
pub use domain::{registrable_domain, url_host, DomainError};
pub use github::{github_repo_from_url, valid_github_image, valid_github_namespace};
pub use http::HttpTransport;
pub use registry::valid_npm_name;
pub use transport::{
    Clock, DnsAnswer, FixtureDns, FixtureHttp, FixtureResponse, FixtureSet, FixtureTransport,
    HttpResponse, ManualClock, OfflineTransport, SystemClock, Transport, TransportError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbeError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("rate limited until epoch {reset_epoch}")]
    RateLimited { reset_epoch: i64 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid subject: {0}")]
    InvalidSubject(String),
    #[error("unexpected HTTP {status} from {url}")]
    UnexpectedStatus { url: String, status: u16 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvailabilityState {
    Registered,
    Available,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub probe: String,
    pub observation: String,
    pub timestamp: DateTime<Utc>,
    /// An authoritative "does not exist" answer from the owning registry.
    #[serde(default)]
    pub authoritative_not_found: bool,
}

impl Evidence {
    pub fn observed(probe: &str, observation: impl Into<String>, at: DateTime<Utc>) -> Self {
        Evidence {
            probe: probe.to_string(),
            observation: observation.into(),
            timestamp: at,
            authoritative_not_found: false,
        }
    }

    pub fn not_found(probe: &str, observation: impl Into<String>, at: DateTime<Utc>) -> Self {
        Evidence {
            authoritative_not_found: true,
            ..Evidence::observed(probe, observation, at)
        }
    }
}

/// Three-state availability backed by evidence. Construct with
/// [`Availability::conclude`], which downgrades an unsupported `available`
/// claim to `indeterminate`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AvailabilityRepr")]
pub struct Availability {
    subject: String,
    state: AvailabilityState,
    evidence: Vec<Evidence>,
    checked_at: DateTime<Utc>,
}

#[derive(Deserialize)]
struct AvailabilityRepr {
    subject: String,
    state: AvailabilityState,
    evidence: Vec<Evidence>,
    checked_at: DateTime<Utc>,
}

impl TryFrom<AvailabilityRepr> for Availability {
    type Error = String;

    fn try_from(r: AvailabilityRepr) -> Result<Self, String> {
        let a = Availability::conclude(r.subject, r.state, r.evidence, r.checked_at);
        if a.state != r.state {
            return Err(format!("{}: `available` without a not-found observation", a.subject));
        }
        Ok(a)
    }
}

impl Availability {
    pub fn conclude(
        subject: impl Into<String>,
        claimed: AvailabilityState,
        evidence: Vec<Evidence>,
        checked_at: DateTime<Utc>,
    ) -> Self {
        let supported = evidence.iter().any(|e| e.authoritative_not_found);
        let state = match claimed {
            AvailabilityState::Available if !supported => AvailabilityState::Indeterminate,
            other => other,
        };
        Availability {
            subject: subject.into(),
            state,
            evidence,
            checked_at,
        }
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn state(&self) -> AvailabilityState {
        self.state
    }

    pub fn is_available(&self) -> bool {
        self.state == AvailabilityState::Available
    }

    pub fn evidence(&self) -> &[Evidence] {
        &self.evidence
    }

    pub fn checked_at(&self) -> DateTime<Utc> {
        self.checked_at
    }

    pub fn summary(&self) -> String {
        let notes: Vec<String> = self
            .evidence
            .iter()
            .map(|e| format!("{}: {}", e.probe, e.observation))
            .collect();
        notes.join("; ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GitHubState {
    Exists,
    Redirected,
    UserMissing,
    RepoMissing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retirement {
    /// Would need a repository creation attempt to find out.
    Unknown,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GitHubRepoStatus {
    pub namespace: String,
    pub image_name: String,
    pub state: GitHubState,
    /// `namespace/image` the repository moved to.
    pub redirect_target: Option<String>,
    pub stars: Option<u64>,
    pub retirement: Retirement,
}

impl GitHubRepoStatus {
    fn base(ns: &str, image: &str, state: GitHubState, retirement: Retirement) -> Self {
        GitHubRepoStatus {
            namespace: ns.to_string(),
            image_name: image.to_string(),
            state,
            redirect_target: None,
            stars: None,
            retirement,
        }
    }

    pub fn exists(ns: &str, image: &str, stars: u64) -> Self {
        GitHubRepoStatus {
            stars: Some(stars),
            ..Self::base(ns, image, GitHubState::Exists, Retirement::NotApplicable)
        }
    }

    pub fn redirected(ns: &str, image: &str, target: &str, stars: u64) -> Self {
        GitHubRepoStatus {
            redirect_target: Some(target.to_string()),
            stars: Some(stars),
            ..Self::base(ns, image, GitHubState::Redirected, Retirement::Unknown)
        }
    }

    pub fn user_missing(ns: &str, image: &str) -> Self {
        Self::base(ns, image, GitHubState::UserMissing, Retirement::Unknown)
    }

    pub fn repo_missing(ns: &str, image: &str) -> Self {
        Self::base(ns, image, GitHubState::RepoMissing, Retirement::NotApplicable)
    }

    /// True for the states where someone else could take over the URL.
    pub fn is_hijack_candidate(&self) -> bool {
        matches!(self.state, GitHubState::UserMissing | GitHubState::Redirected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PodOwner {
    pub pod_name: String,
    pub owner_name: String,
    pub email: String,
    pub email_domain: String,
}

impl PodOwner {
    pub fn new(pod_name: &str, owner_name: &str, email: &str) -> Result<Self, ProbeError> {
        if email.matches('@').count() != 1 {
            return Err(ProbeError::MalformedResponse(format!("owner email {email:?}")));
        }
        let email_domain = registrable_domain(email)
            .map_err(|e| ProbeError::MalformedResponse(format!("owner email {email:?}: {e}")))?;
        Ok(PodOwner {
            pod_name: pod_name.to_string(),
            owner_name: owner_name.to_string(),
            email: email.to_string(),
            email_domain,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "probe", content = "subject", rename_all = "snake_case")]
pub enum ProbeRequest {
    Domain(String),
    GitHubRepo { namespace: String, image: String },
    Npm(String),
    PodOwners(String),
    PodName(String),
}

impl fmt::Display for ProbeRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeRequest::Domain(d) => write!(f, "domain:{d}"),
            ProbeRequest::GitHubRepo { namespace, image } => write!(f, "github:{namespace}/{image}"),
            ProbeRequest::Npm(n) => write!(f, "npm:{n}"),
            ProbeRequest::PodOwners(p) => write!(f, "pod-owners:{p}"),
            ProbeRequest::PodName(p) => write!(f, "pod-name:{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOutcome {
    Availability(Availability),
    GitHub(GitHubRepoStatus),
    Owners(Vec<PodOwner>),
}

/// Completed probe outcomes, looked up by subject.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProbeResults {
    outcomes: BTreeMap<ProbeRequest, ProbeOutcome>,
}

impl ProbeResults {
    pub fn new() -> Self {
        Self::default()
    }

    /// Splits a [`Prober::bulk`] result into outcomes and failures.
    pub fn from_bulk(
        results: BTreeMap<ProbeRequest, Result<ProbeOutcome, ProbeError>>,
    ) -> (Self, BTreeMap<ProbeRequest, ProbeError>) {
        let mut ok = ProbeResults::new();
        let mut failed = BTreeMap::new();
        for (req, res) in results {
            match res {
                Ok(outcome) => {
                    ok.outcomes.insert(req, outcome);
                }
                Err(e) => {
                    failed.insert(req, e);
                }
            }
        }
        (ok, failed)
    }

    pub fn insert(&mut self, request: ProbeRequest, outcome: ProbeOutcome) {
        self.outcomes.insert(request, outcome);
    }

    pub fn insert_availability(&mut self, request: ProbeRequest, availability: Availability) {
        self.insert(request, ProbeOutcome::Availability(availability));
    }

    pub fn insert_github(&mut self, status: GitHubRepoStatus) {
        let req = ProbeRequest::GitHubRepo {
            namespace: status.namespace.clone(),
            image: status.image_name.clone(),
        };
        self.insert(req, ProbeOutcome::GitHub(status));
    }

    pub fn get(&self, request: &ProbeRequest) -> Option<&ProbeOutcome> {
        self.outcomes.get(request)
    }

    fn availability(&self, request: ProbeRequest) -> Option<&Availability> {
        match self.outcomes.get(&request)? {
            ProbeOutcome::Availability(a) => Some(a),
            _ => None,
        }
    }

    pub fn domain(&self, domain: &str) -> Option<&Availability> {
        self.availability(ProbeRequest::Domain(domain.to_string()))
    }

    pub fn npm(&self, name: &str) -> Option<&Availability> {
        self.availability(ProbeRequest::Npm(name.to_string()))
    }

    pub fn pod_name(&self, name: &str) -> Option<&Availability> {
        self.availability(ProbeRequest::PodName(name.to_string()))
    }

    pub fn github(&self, namespace: &str, image: &str) -> Option<&GitHubRepoStatus> {
        let req = ProbeRequest::GitHubRepo {
            namespace: namespace.to_string(),
            image: image.to_string(),
        };
        match self.outcomes.get(&req)? {
            ProbeOutcome::GitHub(s) => Some(s),
            _ => None,
        }
    }

    pub fn pod_owners(&self, pod: &str) -> Option<&[PodOwner]> {
        match self.outcomes.get(&ProbeRequest::PodOwners(pod.to_string()))? {
            ProbeOutcome::Owners(o) => Some(o),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoints {
    pub github_api: String,
    pub npm_registry: String,
    pub trunk_api: String,
    pub rdap_bootstrap: String,
}

impl Default for Endpoints {
    fn default() -> Self {
        Endpoints {
            github_api: "https://api.github.com".into(),
            npm_registry: "https://registry.npmjs.org".into(),
            trunk_api: "https://trunk.cocoapods.org/api/v1".into(),
            rdap_bootstrap: "https://data.iana.org/rdap/dns.json".into(),
        }
    }
}

/// TLD -> RDAP base URL.
type RdapBootstrap = BTreeMap<String, String>;

pub struct Prober {
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    cache: Option<Arc<ProbeCache>>,
    github_token: Option<String>,
    endpoints: Endpoints,
    rdap: Mutex<Option<Arc<RdapBootstrap>>>,
}

impl Prober {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        Prober {
            transport,
            clock: Arc::new(SystemClock),
            cache: None,
            github_token: None,
            endpoints: Endpoints::default(),
            rdap: Mutex::new(None),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_cache(mut self, cache: Arc<ProbeCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_github_token(mut self, token: Option<String>) -> Self {
        self.github_token = token.filter(|t| !t.is_empty());
        self
    }

    pub fn with_endpoints(mut self, endpoints: Endpoints) -> Self {
        self.endpoints = endpoints;
        self
    }

    pub fn endpoints(&self) -> &Endpoints {
        &self.endpoints
    }

    fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    /// Runs one probe, consulting the cache first. Errors are not cached.
    pub fn run(&self, request: &ProbeRequest) -> Result<ProbeOutcome, ProbeError> {
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(request, self.now()) {
                return Ok(hit);
            }
        }
        let outcome = match request {
            ProbeRequest::Domain(d) => ProbeOutcome::Availability(self.probe_domain(d)?),
            ProbeRequest::GitHubRepo { namespace, image } => {
                ProbeOutcome::GitHub(self.probe_github(namespace, image)?)
            }
            ProbeRequest::Npm(n) => ProbeOutcome::Availability(self.probe_npm(n)?),
            ProbeRequest::PodOwners(p) => ProbeOutcome::Owners(self.probe_pod_owners(p)?),
            ProbeRequest::PodName(p) => ProbeOutcome::Availability(self.probe_pod_name(p)?),
        };
        if let Some(cache) = &self.cache {
            cache.put(request.clone(), outcome.clone(), self.now());
        }
        Ok(outcome)
    }

    fn run_availability(&self, request: ProbeRequest) -> Result<Availability, ProbeError> {
        match self.run(&request)? {
            ProbeOutcome::Availability(a) => Ok(a),
            other => unreachable!("{request} produced {other:?}"),
        }
    }

    /// Availability of a registrable domain. Subdomains are reduced first.
    pub fn check_domain(&self, domain: &str) -> Result<Availability, ProbeError> {
        let domain = registrable_domain(domain)?;
        self.run_availability(ProbeRequest::Domain(domain))
    }

    pub fn check_github_repo(&self, namespace: &str, image: &str) -> Result<GitHubRepoStatus, ProbeError> {
        let req = ProbeRequest::GitHubRepo {
            namespace: namespace.to_string(),
            image: image.to_string(),
        };
        match self.run(&req)? {
            ProbeOutcome::GitHub(s) => Ok(s),
            other => unreachable!("{req} produced {other:?}"),
        }
    }

    pub fn check_npm_name(&self, name: &str) -> Result<Availability, ProbeError> {
        self.run_availability(ProbeRequest::Npm(name.to_string()))
    }

    /// Trunk 404 on the pod endpoint means anyone can claim the name.
    pub fn check_pod_name(&self, pod: &str) -> Result<Availability, ProbeError> {
        self.run_availability(ProbeRequest::PodName(pod.to_string()))
    }

    pub fn fetch_pod_owners(&self, pod: &str) -> Result<Vec<PodOwner>, ProbeError> {
        let req = ProbeRequest::PodOwners(pod.to_string());
        match self.run(&req)? {
            ProbeOutcome::Owners(o) => Ok(o),
            other => unreachable!("{req} produced {other:?}"),
        }
    }

    /// Runs every distinct request with at most `limit` in flight. One
    /// subject's failure is reported in its own slot and does not affect
    /// the others.
    pub fn bulk(
        &self,
        requests: &[ProbeRequest],
        limit: usize,
    ) -> BTreeMap<ProbeRequest, Result<ProbeOutcome, ProbeError>> {
        let unique: Vec<&ProbeRequest> = requests
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let workers = limit.max(1).min(unique.len());
        let next = AtomicUsize::new(0);
        let results = Mutex::new(BTreeMap::new());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(req) = unique.get(i) else { break };
                    let outcome = self.run(req);
                    results.lock().insert((*req).clone(), outcome);
                });
            }
        });
        results.into_inner()
    }

    fn probe_domain(&self, domain: &str) -> Result<Availability, ProbeError> {
        let mut evidence = Vec::new();
        match self.transport.dns_ns(domain) {
            Ok(DnsAnswer::NameServers(ns)) => {
                evidence.push(Evidence::observed("dns", format!("NS {}", ns.join(", ")), self.now()))
            }
            Ok(DnsAnswer::NoRecords) => {
                evidence.push(Evidence::observed("dns", "no NS records", self.now()))
            }
            Ok(DnsAnswer::NxDomain) => evidence.push(Evidence::observed("dns", "NXDOMAIN", self.now())),
            Err(TransportError::Timeout(_)) => {
                evidence.push(Evidence::observed("dns", "timeout", self.now()))
            }
            Err(e) => return Err(e.into()),
        }

        let tld = domain.rsplit('.').next().unwrap_or(domain);
        let bootstrap = match self.rdap_bootstrap() {
            Ok(b) => b,
            Err(note) => {
                evidence.push(Evidence::observed("rdap", note?, self.now()));
                return Ok(self.indeterminate(domain, evidence));
            }
        };
        let Some(base) = bootstrap.get(tld) else {
            evidence.push(Evidence::observed("rdap", format!("no RDAP service for .{tld}"), self.now()));
            return Ok(self.indeterminate(domain, evidence));
        };

        let url = format!("{}/domain/{domain}", base.trim_end_matches('/'));
        let claimed = match self.transport.http_get(&url, &[("accept", "application/rdap+json")]) {
            Ok(resp) if resp.status == 200 => {
                let is_domain_object = resp.json().is_some_and(|v| {
                    v.get("objectClassName").and_then(|c| c.as_str()) == Some("domain")
                        || v.get("ldhName").is_some()
                });
                if is_domain_object {
                    evidence.push(Evidence::observed("rdap", format!("{url}: registration object"), self.now()));
                    AvailabilityState::Registered
                } else {
                    evidence.push(Evidence::observed("rdap", format!("{url}: 200 without a domain object"), self.now()));
                    AvailabilityState::Indeterminate
                }
            }
            Ok(resp) if resp.status == 404 => {
                evidence.push(Evidence::not_found("rdap", format!("{url}: 404 not found"), self.now()));
                AvailabilityState::Available
            }
            Ok(resp) => {
                evidence.push(Evidence::observed("rdap", format!("{url}: HTTP {}", resp.status), self.now()));
                AvailabilityState::Indeterminate
            }
            Err(TransportError::Timeout(_)) => {
                evidence.push(Evidence::observed("rdap", format!("{url}: timeout"), self.now()));
                AvailabilityState::Indeterminate
            }
            Err(e) => return Err(e.into()),
        };
        Ok(Availability::conclude(domain, claimed, evidence, self.now()))
    }

    fn indeterminate(&self, subject: &str, evidence: Vec<Evidence>) -> Availability {
        Availability::conclude(subject, AvailabilityState::Indeterminate, evidence, self.now())
    }

    /// The IANA bootstrap table, fetched once per prober. `Err(Ok(note))`
    /// means the table is unavailable for a non-fatal reason.
    fn rdap_bootstrap(&self) -> Result<Arc<RdapBootstrap>, Result<String, ProbeError>> {
        if let Some(b) = self.rdap.lock().as_ref() {
            return Ok(b.clone());
        }
        let url = &self.endpoints.rdap_bootstrap;
        let resp = match self.transport.http_get(url, &[]) {
            Ok(r) => r,
            Err(TransportError::Timeout(_)) => return Err(Ok(format!("bootstrap {url}: timeout"))),
            Err(e) => return Err(Err(e.into())),
        };
        if resp.status != 200 {
            return Err(Ok(format!("bootstrap {url}: HTTP {}", resp.status)));
        }
        let table = resp
            .json()
            .and_then(|v| parse_rdap_bootstrap(&v))
            .ok_or_else(|| Err(ProbeError::MalformedResponse(format!("bootstrap {url}"))))?;
        let table = Arc::new(table);
        *self.rdap.lock() = Some(table.clone());
        Ok(table)
    }
}

/// `{"services": [[["com", "net"], ["https://rdap.example/"]], ...]}`
fn parse_rdap_bootstrap(v: &serde_json::Value) -> Option<RdapBootstrap> {
    let mut table = RdapBootstrap::new();
    for service in v.get("services")?.as_array()? {
        let pair = service.as_array()?;
        let tlds = pair.first()?.as_array()?;
        let urls = pair.get(1)?.as_array()?;
        // Prefer https when a service lists several base URLs.
        let base = urls
            .iter()
            .filter_map(|u| u.as_str())
            .find(|u| u.starts_with("https://"))
            .or_else(|| urls.iter().find_map(|u| u.as_str()))?;
        for tld in tlds.iter().filter_map(|t| t.as_str()) {
            table.insert(tld.to_ascii_lowercase(), base.to_string());
        }
    }
    Some(table)
}
