//! Runs availability probes against canned responses instead of the network.
//!
//! `cargo run --example offline_probes [fixture.json]`

use std::path::PathBuf;
use std::sync::Arc;

use depsentry::probes::{FixtureTransport, ProbeRequest, Prober};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/transport/online.json")
    });
    let transport = Arc::new(FixtureTransport::from_json(&std::fs::read_to_string(fixture)?)?);
    let prober = Prober::new(transport);

    let requests = [
        ProbeRequest::Domain("example.com".into()),
        ProbeRequest::Domain("maintained.com".into()),
        ProbeRequest::GitHubRepo {
            namespace: "oldorg".into(),
            image: "proceedings".into(),
        },
        ProbeRequest::Npm("@corp/telemetry".into()),
        ProbeRequest::Npm("flaky".into()),
        ProbeRequest::PodOwners("Legacy".into()),
    ];
    for (request, outcome) in prober.bulk(&requests, 4) {
        match outcome {
            Ok(outcome) => println!("{request}: {}", serde_json::to_string(&outcome)?),
            Err(e) => println!("{request}: error: {e}"),
        }
    }
    Ok(())
}
