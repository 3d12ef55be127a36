//! Builds an index from a Specs tree, saves it, and looks up framework names.
//!
//! `cargo run --example build_spec_index [specs-dir] [framework...]`

use std::path::PathBuf;

use depsentry::specindex::{build_index, integrity_profile, load_index, lookup_framework, save_index};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let tree = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/specs/public"));
    let index = build_index(&tree)?;
    println!(
        "{} pods, {} versions, {} skipped, digest {}",
        index.pods.len(),
        index.version_count(),
        index.skipped_podspecs,
        index.source_tree_digest
    );
    for record in index.pods.values() {
        println!("  {:<24} {:?}", record.name, integrity_profile(record));
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("public.csix");
    save_index(&index, &path)?;
    let loaded = load_index(&path)?;
    println!("reloaded equal: {}", loaded == index);

    let names: Vec<String> = args.collect();
    for name in names.iter().map(String::as_str).chain(names.is_empty().then_some("Alamofire")) {
        println!("framework {name} -> {:?}", lookup_framework(&loaded, name));
    }
    Ok(())
}
