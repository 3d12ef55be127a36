//! Lists the frameworks and npm package names leaked by an app bundle.
//!
//! `cargo run --example scan_bundle [path/to/App.app]`

use std::path::PathBuf;

use depsentry::bundle::scan_bundle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let app = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/bundles/app5/Payload/Demo.app")
    });
    let scan = scan_bundle(&app)?;
    for f in &scan.frameworks {
        let marker = if f.is_cocoapods { "cocoapods" } else { "-" };
        println!(
            "{:<24} {:<10} {}",
            f.framework_name,
            f.bundle_version.as_deref().unwrap_or("?"),
            marker
        );
    }
    for npm in &scan.npm_names {
        println!("npm {} ({})", npm.package_name, npm.source_path);
    }
    for w in &scan.scan_warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}
