use std::sync::Arc;
use std::time::Duration;

use chrono::TimeZone;
use serde_json::json;

use depsentry::probes::{
    AvailabilityState, DnsAnswer, FixtureTransport, GitHubState, HttpResponse, ManualClock,
    ProbeCache, ProbeError, ProbeRequest, Prober, Retirement, TransportError,
};

const BOOTSTRAP: &str = "https://data.iana.org/rdap/dns.json";

fn with_bootstrap(t: FixtureTransport) -> FixtureTransport {
    t.respond_json(
        BOOTSTRAP,
        200,
        json!({"services": [
            [["com"], ["https://rdap.verisign.test/com/v1/"]],
            [["test"], ["https://rdap.registry.test/"]]
        ]}),
    )
}

fn prober(t: FixtureTransport) -> (Arc<FixtureTransport>, Prober) {
    let t = Arc::new(t);
    let clock = Arc::new(ManualClock::new(chrono::Utc.with_ymd_and_hms(2025, 6, 1, 0, 0, 0).unwrap()));
    (t.clone(), Prober::new(t).with_clock(clock))
}

#[test]
fn rdap_not_found_is_available() {
    let (_, p) = prober(
        with_bootstrap(FixtureTransport::new())
            .dns("abandoned-example.test", DnsAnswer::NxDomain)
            .status("https://rdap.registry.test/domain/abandoned-example.test", 404),
    );
    let a = p.check_domain("abandoned-example.test").unwrap();
    assert_eq!(a.state(), AvailabilityState::Available);
    assert!(a.evidence().iter().any(|e| e.authoritative_not_found));
}

#[test]
fn rdap_registration_object_is_registered() {
    let (_, p) = prober(
        with_bootstrap(FixtureTransport::new())
            .dns("example.com", DnsAnswer::NameServers(vec!["a.iana-servers.net".into()]))
            .respond_json(
                "https://rdap.verisign.test/com/v1/domain/example.com",
                200,
                json!({"objectClassName": "domain", "ldhName": "EXAMPLE.COM"}),
            ),
    );
    assert_eq!(p.check_domain("www.example.com").unwrap().state(), AvailabilityState::Registered);
}

#[test]
fn nxdomain_with_rdap_timeout_is_indeterminate() {
    let (_, p) = prober(
        with_bootstrap(FixtureTransport::new())
            .dns("gone.test", DnsAnswer::NxDomain)
            .fail("https://rdap.registry.test/domain/gone.test", TransportError::Timeout("rdap".into())),
    );
    let a = p.check_domain("gone.test").unwrap();
    assert_eq!(a.state(), AvailabilityState::Indeterminate);
}

#[test]
fn unknown_tld_and_bad_bootstrap_are_indeterminate() {
    let (_, p) = prober(
        with_bootstrap(FixtureTransport::new()).dns("x.example-tld", DnsAnswer::NxDomain),
    );
    assert_eq!(p.check_domain("x.example-tld").unwrap().state(), AvailabilityState::Indeterminate);

    let (_, p) = prober(
        FixtureTransport::new()
            .dns("gone.test", DnsAnswer::NxDomain)
            .status(BOOTSTRAP, 503),
    );
    assert_eq!(p.check_domain("gone.test").unwrap().state(), AvailabilityState::Indeterminate);
}

#[test]
fn network_down_is_an_error_not_a_verdict() {
    let (_, p) = prober(FixtureTransport::new().dns_fail("x.test", TransportError::Connect("down".into())));
    assert!(matches!(p.check_domain("x.test"), Err(ProbeError::Transport(_))));
    assert!(matches!(p.check_domain("co.uk"), Err(ProbeError::Domain(_))));
}

#[test]
fn github_redirect_with_stars() {
    let (_, p) = prober(
        FixtureTransport::new()
            .respond(
                "https://api.github.com/repos/oldorg/proceedings",
                HttpResponse::new(301, "").with_header("Location", "https://api.github.com/repositories/42"),
            )
            .respond_json(
                "https://api.github.com/repositories/42",
                200,
                json!({"full_name": "neworg/proceedings", "stargazers_count": 3805}),
            ),
    );
    let s = p.check_github_repo("oldorg", "proceedings").unwrap();
    assert_eq!(s.state, GitHubState::Redirected);
    assert_eq!(s.redirect_target.as_deref(), Some("neworg/proceedings"));
    assert_eq!(s.stars, Some(3805));
    assert_eq!(s.retirement, Retirement::Unknown);
}

#[test]
fn github_missing_user_and_repo() {
    let (_, p) = prober(
        FixtureTransport::new()
            .status("https://api.github.com/repos/ghost/lib", 404)
            .status("https://api.github.com/users/ghost", 404)
            .status("https://api.github.com/repos/alive/gone", 404)
            .respond_json("https://api.github.com/users/alive", 200, json!({"login": "alive"}))
            .respond_json(
                "https://api.github.com/repos/alive/here",
                200,
                json!({"full_name": "alive/here", "stargazers_count": 7}),
            ),
    );
    let missing = p.check_github_repo("ghost", "lib").unwrap();
    assert_eq!((missing.state, missing.stars, missing.retirement), (GitHubState::UserMissing, None, Retirement::Unknown));
    assert_eq!(p.check_github_repo("alive", "gone").unwrap().state, GitHubState::RepoMissing);
    let here = p.check_github_repo("alive", "here").unwrap();
    assert_eq!((here.state, here.stars), (GitHubState::Exists, Some(7)));
    assert!(matches!(p.check_github_repo("-bad", "x"), Err(ProbeError::InvalidSubject(_))));
}

#[test]
fn github_rate_limit_surfaces() {
    let (_, p) = prober(FixtureTransport::new().respond(
        "https://api.github.com/repos/a/b",
        HttpResponse::new(403, "")
            .with_header("x-ratelimit-remaining", "0")
            .with_header("x-ratelimit-reset", "1750000000"),
    ));
    assert_eq!(
        p.check_github_repo("a", "b"),
        Err(ProbeError::RateLimited { reset_epoch: 1_750_000_000 })
    );
}

#[test]
fn npm_states() {
    let (t, p) = prober(
        FixtureTransport::new()
            .status("https://registry.npmjs.org/corp-internal-auth", 404)
            .status("https://registry.npmjs.org/left-pad", 200)
            .status("https://registry.npmjs.org/flaky", 503)
            .status("https://registry.npmjs.org/@corp%2Ftelemetry", 404),
    );
    assert_eq!(p.check_npm_name("corp-internal-auth").unwrap().state(), AvailabilityState::Available);
    assert_eq!(p.check_npm_name("left-pad").unwrap().state(), AvailabilityState::Registered);
    assert_eq!(p.check_npm_name("flaky").unwrap().state(), AvailabilityState::Indeterminate);
    assert!(p.check_npm_name("@corp/telemetry").unwrap().is_available());
    assert!(matches!(p.check_npm_name("Upper"), Err(ProbeError::InvalidSubject(_))));
    assert_eq!(t.hits("https://registry.npmjs.org/@corp%2Ftelemetry"), 1);
}

#[test]
fn trunk_owners() {
    let (_, p) = prober(
        FixtureTransport::new()
            .respond_json(
                "https://trunk.cocoapods.org/api/v1/pods/Legacy",
                200,
                json!({"owners": [
                    {"name": "Ann", "email": "ann@abandoned-example.test"},
                    {"name": "Bob", "email": "bob@mail.Example.co.uk"}
                ]}),
            )
            .status("https://trunk.cocoapods.org/api/v1/pods/Nope", 404)
            .respond_json(
                "https://trunk.cocoapods.org/api/v1/pods/Bad",
                200,
                json!({"owners": [{"name": "X", "email": "not-an-email"}]}),
            ),
    );
    let owners = p.fetch_pod_owners("Legacy").unwrap();
    let domains: Vec<&str> = owners.iter().map(|o| o.email_domain.as_str()).collect();
    assert_eq!(domains, ["abandoned-example.test", "example.co.uk"]);
    assert!(p.fetch_pod_owners("Nope").unwrap().is_empty());
    assert!(matches!(p.fetch_pod_owners("Bad"), Err(ProbeError::MalformedResponse(_))));
    assert!(p.check_pod_name("Nope").unwrap().is_available());
}

#[test]
fn cache_ttl_controls_reuse() {
    let url = "https://registry.npmjs.org/left-pad";
    let (t, p) = prober(FixtureTransport::new().status(url, 200));
    let p = p.with_cache(Arc::new(ProbeCache::in_memory(chrono::Duration::days(7))));
    p.check_npm_name("left-pad").unwrap();
    p.check_npm_name("left-pad").unwrap();
    assert_eq!(t.hits(url), 1);

    let (t, p) = prober(FixtureTransport::new().status(url, 200));
    let p = p.with_cache(Arc::new(ProbeCache::in_memory(chrono::Duration::zero())));
    p.check_npm_name("left-pad").unwrap();
    p.check_npm_name("left-pad").unwrap();
    assert_eq!(t.hits(url), 2);
}

#[test]
fn cache_expires_with_the_clock() {
    let url = "https://registry.npmjs.org/left-pad";
    let t = Arc::new(FixtureTransport::new().status(url, 200));
    let clock = Arc::new(ManualClock::new(chrono::Utc.with_ymd_and_hms(2025, 6, 1, 0, 0, 0).unwrap()));
    let p = Prober::new(t.clone())
        .with_clock(clock.clone())
        .with_cache(Arc::new(ProbeCache::in_memory(chrono::Duration::days(7))));
    p.check_npm_name("left-pad").unwrap();
    clock.advance(chrono::Duration::days(6));
    p.check_npm_name("left-pad").unwrap();
    assert_eq!(t.hits(url), 1);
    clock.advance(chrono::Duration::days(2));
    p.check_npm_name("left-pad").unwrap();
    assert_eq!(t.hits(url), 2);
}

fn hundred_subjects() -> (FixtureTransport, Vec<ProbeRequest>) {
    let mut t = FixtureTransport::new();
    let mut reqs = Vec::new();
    for i in 0..100 {
        let name = format!("pkg-{i}");
        let url = format!("https://registry.npmjs.org/{name}");
        t = if i % 7 == 0 {
            t.fail(&url, TransportError::Connect("reset".into()))
        } else {
            t.status(&url, if i % 2 == 0 { 404 } else { 200 })
        };
        reqs.push(ProbeRequest::Npm(name));
    }
    (t, reqs)
}

#[test]
fn bulk_respects_limit_and_isolates_failures() {
    let (t, reqs) = hundred_subjects();
    let (t, p) = prober(t.with_latency(Duration::from_millis(2)));
    let results = p.bulk(&reqs, 8);
    assert_eq!(results.len(), 100);
    assert!(t.max_in_flight() <= 8, "max in flight {}", t.max_in_flight());
    assert!(t.max_in_flight() > 1);
    for (i, req) in reqs.iter().enumerate() {
        assert_eq!(results[req].is_err(), i % 7 == 0, "{req}");
    }
}

#[test]
fn bulk_is_deterministic() {
    let run = || {
        let (t, reqs) = hundred_subjects();
        let (_, p) = prober(t);
        p.bulk(&reqs, 4)
    };
    assert_eq!(run(), run());
}

#[test]
fn bulk_dedupes_requests() {
    let url = "https://registry.npmjs.org/left-pad";
    let (t, p) = prober(FixtureTransport::new().status(url, 200));
    let reqs = vec![ProbeRequest::Npm("left-pad".into()); 5];
    assert_eq!(p.bulk(&reqs, 3).len(), 1);
    assert_eq!(t.hits(url), 1);
}
