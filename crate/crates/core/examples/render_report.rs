//! Scans the demo bundle and renders the report as text and JSON.
//!
//! `cargo run --example render_report`

use std::io::Write;
use std::path::PathBuf;

use depsentry::bundle::scan_bundle;
use depsentry::report::{exit_code, render_json, render_text, Report, ReportInput};
use depsentry::risk::{evaluate_bundle, Severity};
use depsentry::specindex::build_index;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let app = fixtures.join("bundles/app5/Payload/Demo.app");
    let index = build_index(&fixtures.join("specs/public"))?;

    let findings = evaluate_bundle(&scan_bundle(&app)?, &index, None);
    let report = Report::new(vec![ReportInput::new("app", app.display().to_string())], findings, chrono::Utc::now());
    print!("{}", render_text(&report));
    println!();
    std::io::stdout().write_all(&render_json(&report))?;
    println!("exit code with --fail-on high: {}", exit_code(&report.findings, Severity::High));
    Ok(())
}
