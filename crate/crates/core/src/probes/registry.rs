//! npm registry and CocoaPods trunk lookups.

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

use super::{Availability, AvailabilityState, Evidence, PodOwner, ProbeError, Prober, TransportError};

/// Everything except RFC 3986 unreserved characters.
const PATH_SEGMENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

fn encode_segment(s: &str) -> String {
    utf8_percent_encode(s, PATH_SEGMENT).to_string()
}

/// Names the npm check accepts: lowercase, no `.`, optionally `@scope/name`.
pub fn valid_npm_name(name: &str) -> bool {
    let plain = |s: &str| {
        !s.is_empty()
            && s.bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'-' | b'_' | b'~'))
    };
    match name.strip_prefix('@') {
        Some(scoped) => match scoped.split_once('/') {
            Some((scope, pkg)) => plain(scope) && plain(pkg),
            None => false,
        },
        None => plain(name),
    }
}

impl Prober {
    /// Maps a registry answer for `subject` to an availability, treating
    /// timeouts as inconclusive.
    fn registry_availability(&self, probe: &str, subject: &str, url: &str) -> Result<Availability, ProbeError> {
        let (claimed, evidence) = match self.transport.http_get(url, &[("accept", "application/json")]) {
            Ok(resp) if resp.status == 404 => (
                AvailabilityState::Available,
                Evidence::not_found(probe, format!("{url}: 404 not found"), self.now()),
            ),
            Ok(resp) if resp.status == 200 => (
                AvailabilityState::Registered,
                Evidence::observed(probe, format!("{url}: 200"), self.now()),
            ),
            Ok(resp) => (
                AvailabilityState::Indeterminate,
                Evidence::observed(probe, format!("{url}: HTTP {}", resp.status), self.now()),
            ),
            Err(TransportError::Timeout(_)) => (
                AvailabilityState::Indeterminate,
                Evidence::observed(probe, format!("{url}: timeout"), self.now()),
            ),
            Err(e) => return Err(e.into()),
        };
        Ok(Availability::conclude(subject, claimed, vec![evidence], self.now()))
    }

    pub(super) fn probe_npm(&self, name: &str) -> Result<Availability, ProbeError> {
        if !valid_npm_name(name) {
            return Err(ProbeError::InvalidSubject(format!("npm name {name:?}")));
        }
        let url = format!(
            "{}/{}",
            self.endpoints.npm_registry.trim_end_matches('/'),
            name.replace('/', "%2F")
        );
        self.registry_availability("npm", name, &url)
    }

    fn trunk_pod_url(&self, pod: &str) -> Result<String, ProbeError> {
        if pod.trim().is_empty() {
            return Err(ProbeError::InvalidSubject("empty pod name".into()));
        }
        Ok(format!(
            "{}/pods/{}",
            self.endpoints.trunk_api.trim_end_matches('/'),
            encode_segment(pod)
        ))
    }

    pub(super) fn probe_pod_name(&self, pod: &str) -> Result<Availability, ProbeError> {
        let url = self.trunk_pod_url(pod)?;
        self.registry_availability("trunk", pod, &url)
    }

    pub(super) fn probe_pod_owners(&self, pod: &str) -> Result<Vec<PodOwner>, ProbeError> {
        let url = self.trunk_pod_url(pod)?;
        let resp = self.transport.http_get(&url, &[("accept", "application/json")])?;
        match resp.status {
            404 => {
                log::warn!("trunk has no pod named {pod}");
                Ok(Vec::new())
            }
            200 => {
                let body = resp
                    .json()
                    .ok_or_else(|| ProbeError::MalformedResponse(format!("{url}: body is not JSON")))?;
                let owners = body
                    .get("owners")
                    .and_then(|o| o.as_array())
                    .ok_or_else(|| ProbeError::MalformedResponse(format!("{url}: missing owners")))?;
                owners
                    .iter()
                    .map(|o| {
                        let email = o.get("email").and_then(|e| e.as_str()).ok_or_else(|| {
                            ProbeError::MalformedResponse(format!("{url}: owner without email"))
                        })?;
                        let name = o.get("name").and_then(|n| n.as_str()).unwrap_or_default();
                        PodOwner::new(pod, name, email)
                    })
                    .collect()
            }
            status => Err(ProbeError::UnexpectedStatus { url, status }),
        }
    }
}
