//! Parses every manifest kind and prints the dependency entries.
//!
//! `cargo run --example parse_manifests [manifest...]`

use std::path::{Path, PathBuf};

use depsentry::manifest::{parse_manifest, ManifestKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut paths: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if paths.is_empty() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/manifests");
        let mut found: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        found.sort();
        paths = found;
    }
    for path in paths {
        let Some(kind) = ManifestKind::detect(&path) else {
            eprintln!("{}: unrecognised manifest name", path.display());
            continue;
        };
        let manifest = parse_manifest(kind, &std::fs::read_to_string(&path)?)?;
        println!("{} ({})", path.display(), kind.as_str());
        for source in &manifest.sources_in_order {
            println!("  source {source}");
        }
        for entry in &manifest.entries {
            let reqs: Vec<String> = entry.requirements.iter().map(ToString::to_string).collect();
            println!("  {} [{}]", entry.name, reqs.join(", "));
        }
        for w in &manifest.parse_warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
