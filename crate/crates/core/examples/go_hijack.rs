//! Checks the module hosts of a go.mod for abandoned domains and namespaces.
//!
//! `cargo run --example go_hijack [go.mod] [fixture.json]`

use std::path::PathBuf;
use std::sync::Arc;

use depsentry::manifest::parse_go_mod;
use depsentry::probes::{FixtureTransport, ProbeResults, Prober};
use depsentry::risk::{evaluate_go_manifest, probes_for_manifest};
use depsentry::specindex::SpecIndex;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut args = std::env::args().skip(1);
    let gomod = args.next().map(PathBuf::from).unwrap_or_else(|| fixtures.join("manifests/go.mod.listing3"));
    let fixture = args.next().map(PathBuf::from).unwrap_or_else(|| fixtures.join("transport/online.json"));

    let manifest = parse_go_mod(&std::fs::read_to_string(gomod)?);
    let empty = SpecIndex::from_records([], chrono::Utc::now(), "");
    let requests = probes_for_manifest(&manifest, &empty)?;
    let prober = Prober::new(Arc::new(FixtureTransport::from_json(&std::fs::read_to_string(fixture)?)?));
    let (probes, failed) = ProbeResults::from_bulk(prober.bulk(&requests, 8));
    for (request, error) in &failed {
        eprintln!("{request}: {error}");
    }
    for f in evaluate_go_manifest(&manifest, &probes)? {
        println!("{} {} {}: {}", f.severity, f.rule_id, f.subject, f.rationale);
    }
    Ok(())
}
