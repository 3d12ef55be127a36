//! Live transport: reqwest for HTTP, the system resolver for DNS.

use std::collections::BTreeMap;
use std::time::Duration;

use hickory_resolver::error::ResolveErrorKind;
use hickory_resolver::proto::op::ResponseCode;
use hickory_resolver::proto::rr::RecordType;
use hickory_resolver::Resolver;
use reqwest::blocking::Client;
use reqwest::redirect::Policy;

use super::transport::{DnsAnswer, HttpResponse, Transport, TransportError};

const USER_AGENT: &str = concat!("depsentry/", env!("CARGO_PKG_VERSION"));

pub struct HttpTransport {
    client: Client,
    resolver: Resolver,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        let client = Client::builder()
            .redirect(Policy::none())
            .timeout(timeout)
            .user_agent(USER_AGENT)
            .build()
            .map_err(|e| TransportError::Other(e.to_string()))?;
        let resolver =
            Resolver::from_system_conf().map_err(|e| TransportError::Other(e.to_string()))?;
        Ok(HttpTransport { client, resolver })
    }
}

impl Transport for HttpTransport {
    fn http_get(&self, url: &str, headers: &[(&str, &str)]) -> Result<HttpResponse, TransportError> {
        let mut request = self.client.get(url);
        for (name, value) in headers {
            request = request.header(*name, *value);
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout(url.to_string())
            } else if e.is_connect() {
                TransportError::Connect(format!("{url}: {e}"))
            } else {
                TransportError::Other(format!("{url}: {e}"))
            }
        })?;
        let status = response.status().as_u16();
        let headers: BTreeMap<String, String> = response
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_string())))
            .collect();
        let body = response
            .bytes()
            .map_err(|e| TransportError::Other(format!("{url}: {e}")))?
            .to_vec();
        Ok(HttpResponse { status, headers, body })
    }

    fn dns_ns(&self, domain: &str) -> Result<DnsAnswer, TransportError> {
        match self.resolver.lookup(domain, RecordType::NS) {
            Ok(lookup) => Ok(DnsAnswer::NameServers(
                lookup.iter().map(|r| r.to_string().trim_end_matches('.').to_string()).collect(),
            )),
            Err(e) => match e.kind() {
                ResolveErrorKind::NoRecordsFound { response_code, .. } => {
                    if *response_code == ResponseCode::NXDomain {
                        Ok(DnsAnswer::NxDomain)
                    } else {
                        Ok(DnsAnswer::NoRecords)
                    }
                }
                ResolveErrorKind::Timeout => Err(TransportError::Timeout(format!("dns {domain}"))),
                _ => Err(TransportError::Other(format!("dns {domain}: {e}"))),
            },
        }
    }
}
