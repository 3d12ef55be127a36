use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use depsentry::report::Report;
use depsentry::risk::{RuleId, Severity};

const NOW: &str = "2025-06-01T00:00:00Z";

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fx(rel: &str) -> String {
    fixtures().join(rel).display().to_string()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("depsentry").chain(args.iter().copied());
    let code = depsentry::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn build_index(tree: &str, dir: &Path) -> String {
    let out = dir.join(format!("{tree}.csix")).display().to_string();
    let (code, _, err) = run(&["index", "build", &fx(&format!("specs/{tree}")), "-o", &out, "--now", NOW]);
    assert_eq!(code, 0, "{err}");
    out
}

fn report(stdout: &str) -> Report {
    Report::from_json(stdout.as_bytes()).unwrap()
}

fn count(r: &Report, rule: RuleId) -> usize {
    r.findings.iter().filter(|f| f.rule_id == rule).count()
}

#[test]
fn index_build_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("i.csix").display().to_string();
    let (code, stdout, _) = run(&["index", "build", &fx("specs/listing"), "-o", &out, "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["pods"], 2);
    assert!(Path::new(&out).is_file());
    let (code, _, err) = run(&["index", "build", "/nonexistent/specs", "-o", &out]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn listing_one_fails_listing_two_passes() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index("listing", dir.path());
    let (code, stdout, err) = run(&[
        "scan", "manifest", &fx("manifests/Podfile.listing1"), "--index", &index, "--format", "json", "--offline",
    ]);
    assert_eq!(code, 1, "{err}");
    assert!(count(&report(&stdout), RuleId::ConfusionPodManifest) >= 2);

    let (code, stdout, err) = run(&[
        "scan", "manifest", &fx("manifests/Podfile.listing2"), "--index", &index, "--format", "json", "--offline",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(report(&stdout).findings.is_empty());
}

#[test]
fn fail_on_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index("listing", dir.path());
    let args = ["scan", "manifest", &fx("manifests/Podfile.listing1"), "--index", &index];
    let (code, _, _) = run(&[&args[..], &["--fail-on", "critical"]].concat());
    assert_eq!(code, 0);
    let (code, _, _) = run(&[&args[..], &["--fail-on", "info"]].concat());
    assert_eq!(code, 1);
    let (code, _, _) = run(&[&args[..], &["--fail-on", "severe"]].concat());
    assert_eq!(code, 2);
}

#[test]
fn empty_bundle_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index("public", dir.path());
    let empty = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(&[
        "scan", "app", &empty.path().display().to_string(), "--index", &index, "--format", "json",
    ]);
    assert_eq!(code, 0);
    assert!(report(&stdout).findings.is_empty());
}

#[test]
fn bundle_offline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index("public", dir.path());
    let args = [
        "scan", "app", &fx("bundles/app5/Payload/Demo.app"), "--index", &index, "--format", "json", "--offline",
        "--now", NOW,
    ];
    let (code, first, _) = run(&args);
    let (_, second, _) = run(&args);
    assert_eq!(code, 1);
    assert_eq!(first, second);
    let r = report(&first);
    assert_eq!(r.findings.len(), 1);
    assert_eq!(r.findings[0].subject, "CorpAuth");
    assert_eq!(r.findings[0].attacker_version_needed.as_ref().unwrap().as_str(), "2.3.1");
}

#[test]
fn bundle_online_with_allowlist() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index("public", dir.path());
    let allow = dir.path().join("private.txt");
    std::fs::write(&allow, "corp-internal-bridge\n").unwrap();
    let base = [
        "scan", "app", &fx("bundles/app5/Payload/Demo.app"), "--index", &index, "--format", "json", "--online",
        "--transport-fixture", &fx("transport/online.json"),
    ];
    let (code, stdout, err) = run(&base);
    assert_eq!(code, 1, "{err}");
    let r = report(&stdout);
    assert_eq!(r.findings[0].severity, Severity::Critical);
    assert_eq!(count(&r, RuleId::ConfusionNpm), 2);

    let allow = allow.display().to_string();
    let (_, stdout, _) = run(&[&base[..], &["--private-names", &allow]].concat());
    let r = report(&stdout);
    assert_eq!(count(&r, RuleId::ConfusionNpm), 1);
    assert!(r.findings.iter().all(|f| f.subject != "corp-internal-bridge"));
}

#[test]
fn ipa_archives_are_unpacked() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index("public", dir.path());
    let ipa = dir.path().join("Demo.ipa");
    let mut zip = zip::ZipWriter::new(std::fs::File::create(&ipa).unwrap());
    let root = fixtures().join("bundles/app5");
    for entry in walkdir::WalkDir::new(&root).sort_by_file_name() {
        let entry = entry.unwrap();
        let rel = entry.path().strip_prefix(&root).unwrap().to_string_lossy().replace('\\', "/");
        if rel.is_empty() {
            continue;
        }
        let opts = zip::write::SimpleFileOptions::default();
        if entry.file_type().is_dir() {
            zip.add_directory(rel, opts).unwrap();
        } else {
            zip.start_file(rel, opts).unwrap();
            zip.write_all(&std::fs::read(entry.path()).unwrap()).unwrap();
        }
    }
    zip.finish().unwrap();

    let (code, stdout, err) = run(&["scan", "app", &ipa.display().to_string(), "--index", &index, "--format", "json"]);
    assert_eq!(code, 1, "{err}");
    assert_eq!(count(&report(&stdout), RuleId::ConfusionPod), 1);
}

#[test]
fn go_listing_online_and_offline() {
    let file = fx("manifests/go.mod.listing3");
    let (code, stdout, err) = run(&[
        "scan", "manifest", &file, "--kind", "go_mod", "--online", "--format", "json", "--transport-fixture",
        &fx("transport/online.json"),
    ]);
    assert_eq!(code, 1, "{err}");
    assert_eq!(count(&report(&stdout), RuleId::GoHijack), 1);

    let (code, stdout, err) = run(&["scan", "manifest", &file, "--offline", "--format", "json"]);
    assert_eq!(code, 0);
    assert!(report(&stdout).findings.is_empty());
    assert!(err.contains("--online"));
}

#[test]
fn usage_errors() {
    let file = fx("manifests/Podfile.listing1");
    assert_eq!(run(&["scan", "manifest", &file]).0, 2, "index required");
    assert_eq!(run(&["scan", "manifest", &file, "--kind", "pubspec"]).0, 2);
    assert_eq!(run(&["scan", "manifest", "/nonexistent/Podfile", "--index", "x"]).0, 2);
    assert_eq!(run(&["scan", "manifest", &fx("manifests/go.mod.listing3"), "--online", "--offline"]).0, 2);
    assert_eq!(run(&["check", "domain", "example.com", "--offline"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn check_commands() {
    let t = fx("transport/online.json");
    let (code, stdout, _) = run(&["check", "github", "oldorg/proceedings", "--format", "json", "--transport-fixture", &t]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["stars"], 3805);
    assert_eq!(v["state"], "redirected");

    let (code, stdout, _) = run(&["check", "domain", "mail.example.com", "--transport-fixture", &t]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("example.com: available"), "{stdout}");

    let (code, _, err) = run(&["check", "npm", "flaky", "--transport-fixture", &t]);
    assert_eq!(code, 3, "{err}");
    assert_eq!(run(&["check", "npm", "Bad.Name", "--transport-fixture", &t]).0, 2);
    assert_eq!(run(&["check", "github", "no-slash", "--transport-fixture", &t]).0, 2);
}

#[test]
fn pod_owner_takeover_report() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index("public", dir.path());
    let t = fx("transport/online.json");
    let (code, stdout, _) = run(&["check", "pod-owners", "Legacy", "--format", "json", "--transport-fixture", &t]);
    assert_eq!(code, 0);
    let owners: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(owners.as_array().unwrap().len(), 2);

    let (code, stdout, err) = run(&[
        "check", "pod-owners", "Legacy", "--index", &index, "--format", "json", "--transport-fixture", &t,
    ]);
    assert_eq!(code, 1, "{err}");
    let r = report(&stdout);
    assert_eq!(r.findings[0].rule_id, RuleId::HijackOwnerDomain);
    assert_eq!(count(&r, RuleId::HijackSourceDomain), 1);
    assert_eq!(count(&r, RuleId::PinMissing), 1);
}

#[test]
fn cache_file_is_written_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("probes.jsonl").display().to_string();
    let t = fx("transport/online.json");
    let (code, first, _) = run(&["check", "npm", "corp-internal-bridge", "--cache", &cache, "--transport-fixture", &t]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(&cache).unwrap().lines().count(), 1);
    let (_, second, _) = run(&["check", "npm", "corp-internal-bridge", "--cache", &cache, "--transport-fixture", &t]);
    assert_eq!(first, second);
    assert_eq!(std::fs::read_to_string(&cache).unwrap().lines().count(), 1);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index("listing", dir.path());
    let status = |podfile: &str| {
        Command::new(env!("CARGO_BIN_EXE_depsentry"))
            .args(["--offline", "scan", "manifest", &fx(podfile), "--index", &index])
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(status("manifests/Podfile.listing1"), Some(1));
    assert_eq!(status("manifests/Podfile.listing2"), Some(0));
}
