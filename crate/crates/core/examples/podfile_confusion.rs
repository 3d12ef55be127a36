//! Classifies each pod of a Podfile by how source order exposes it.
//!
//! `cargo run --example podfile_confusion [Podfile] [specs-dir]`

use std::path::PathBuf;

use depsentry::manifest::parse_podfile;
use depsentry::resolution::analyze_podfile;
use depsentry::specindex::build_index;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut args = std::env::args().skip(1);
    let podfile = args.next().map(PathBuf::from).unwrap_or_else(|| fixtures.join("manifests/Podfile.listing1"));
    let tree = args.next().map(PathBuf::from).unwrap_or_else(|| fixtures.join("specs/listing"));

    let index = build_index(&tree)?;
    let manifest = parse_podfile(&std::fs::read_to_string(&podfile)?);
    for verdict in analyze_podfile(&manifest, &index)? {
        let target = verdict
            .attacker_version_needed
            .map(|v| format!(" (attacker publishes {v})"))
            .unwrap_or_default();
        println!("{:<20} {}{target}", verdict.dependency, verdict.classification.as_str());
        println!("    {}", verdict.rationale);
    }
    Ok(())
}
