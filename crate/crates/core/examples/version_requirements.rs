//! Evaluates version requirements, including the pessimistic `~>` operator.
//!
//! `cargo run --example version_requirements -- '~> 1.2' 1.1 1.2.9 1.3 2.0`

use depsentry::manifest::{best_match, parse_requirement, satisfies, VersionString};
use depsentry::resolution::attacker_target_version;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let req = parse_requirement(&args.next().unwrap_or_else(|| "~> 2.27".into()))?;
    let mut versions: Vec<VersionString> = args.map(|a| VersionString::parse(&a)).collect::<Result<_, _>>()?;
    if versions.is_empty() {
        versions = ["2.26.9", "2.27", "2.27.4", "2.28.0", "3.0"]
            .iter()
            .map(|v| VersionString::parse(v))
            .collect::<Result<_, _>>()?;
    }
    for v in &versions {
        println!("{v:<10} {}", if satisfies(v, &req) { "satisfies" } else { "-" });
    }
    let reqs = [req];
    match best_match(&versions, &reqs) {
        Some(v) => println!("best match for {}: {v}", reqs[0]),
        None => println!("nothing satisfies {}", reqs[0]),
    }
    println!("smallest version an attacker must publish: {}", attacker_target_version(&reqs)?);
    Ok(())
}
