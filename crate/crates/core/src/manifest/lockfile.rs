//! Podfile.lock reader.
//!
//! The file is YAML, but CocoaPods writes a fixed, shallow shape, so a small
//! indentation-driven reader covers it without a YAML dependency.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    is_commit_hash, DependencyEntry, Ecosystem, ExplicitLocation, LocationKind, Manifest,
    ManifestError, ManifestKind, Requirement, VersionString,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Pods,
    Dependencies,
    SpecRepos,
    ExternalSources,
    CheckoutOptions,
    SpecChecksums,
    Unknown,
}

fn section_for(key: &str) -> Option<Section> {
    Some(match key {
        "PODS" => Section::Pods,
        "DEPENDENCIES" => Section::Dependencies,
        "SPEC REPOS" => Section::SpecRepos,
        "EXTERNAL SOURCES" => Section::ExternalSources,
        "CHECKOUT OPTIONS" => Section::CheckoutOptions,
        "SPEC CHECKSUMS" => Section::SpecChecksums,
        _ => return None,
    })
}

#[derive(Default)]
struct LockData {
    pods: Vec<(String, Option<String>, Vec<String>)>,
    direct: BTreeSet<String>,
    spec_repos: BTreeMap<String, String>,
    external: BTreeMap<String, BTreeMap<String, String>>,
    checkout: BTreeMap<String, BTreeMap<String, String>>,
    checksums: BTreeMap<String, String>,
}

pub fn parse_podfile_lock(text: &str) -> Result<Manifest, ManifestError> {
    let mut manifest = Manifest::empty(ManifestKind::PodfileLock);
    let mut data = LockData::default();
    let mut recognized = false;
    let mut section = Section::Unknown;
    // Current second-level key for SPEC REPOS / EXTERNAL SOURCES / CHECKOUT OPTIONS.
    let mut group: Option<String> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let indent = raw_line.len() - raw_line.trim_start().len();
        let line = raw_line.trim();

        if indent == 0 {
            group = None;
            let Some((key, value)) = line.split_once(':') else {
                section = Section::Unknown;
                manifest.warn(line_no, format!("unrecognized top-level line: {line}"));
                continue;
            };
            let value = unquote(value.trim());
            match key {
                "COCOAPODS" => {
                    recognized = true;
                    section = Section::Unknown;
                    manifest.properties.insert("cocoapods".into(), value.to_string());
                }
                "PODFILE CHECKSUM" => {
                    recognized = true;
                    section = Section::Unknown;
                    manifest.properties.insert("podfile_checksum".into(), value.to_string());
                }
                _ => match section_for(key) {
                    Some(s) => {
                        recognized = true;
                        section = s;
                    }
                    None => {
                        section = Section::Unknown;
                        manifest.warn(line_no, format!("unknown section {key:?} skipped"));
                    }
                },
            }
            continue;
        }

        match section {
            Section::Pods => {
                let Some(item) = line.strip_prefix('-') else {
                    manifest.warn(line_no, format!("unexpected line in PODS: {line}"));
                    continue;
                };
                let item = unquote(item.trim().trim_end_matches(':'));
                let (name, version) = split_name_paren(item);
                if indent <= 2 {
                    data.pods.push((name.to_string(), version.map(str::to_string), Vec::new()));
                } else if let Some(last) = data.pods.last_mut() {
                    last.2.push(name.to_string());
                }
            }
            Section::Dependencies => {
                if let Some(item) = line.strip_prefix('-') {
                    let (name, _) = split_name_paren(unquote(item.trim()));
                    data.direct.insert(name.to_string());
                }
            }
            Section::SpecRepos => {
                if let Some(item) = line.strip_prefix('-') {
                    if let Some(repo) = &group {
                        data.spec_repos.insert(unquote(item.trim()).to_string(), repo.clone());
                    }
                } else {
                    group = Some(unquote(line.trim_end_matches(':')).to_string());
                    manifest.sources_in_order.push(group.clone().unwrap_or_default());
                }
            }
            Section::ExternalSources | Section::CheckoutOptions => {
                if let Some(option) = line.strip_prefix(':') {
                    let Some(pod) = &group else { continue };
                    if let Some((key, value)) = option.split_once(':') {
                        let target = if section == Section::ExternalSources {
                            &mut data.external
                        } else {
                            &mut data.checkout
                        };
                        target
                            .entry(pod.clone())
                            .or_default()
                            .insert(key.trim().to_string(), unquote(value.trim()).to_string());
                    }
                } else {
                    group = Some(unquote(line.trim_end_matches(':')).to_string());
                }
            }
            Section::SpecChecksums => {
                if let Some((name, sum)) = line.split_once(':') {
                    data.checksums
                        .insert(unquote(name.trim()).to_string(), unquote(sum.trim()).to_string());
                }
            }
            Section::Unknown => {}
        }
    }

    if !recognized {
        return Err(ManifestError::MalformedLock);
    }

    for (name, version, deps) in data.pods {
        let mut entry = DependencyEntry::new(name, Ecosystem::Cocoapods);
        if let Some(v) = version {
            match VersionString::parse(&v) {
                Ok(parsed) => entry.requirements.push(Requirement::exact(parsed)),
                Err(err) => manifest
                    .parse_warnings
                    .push(format!("{}: {err}", entry.name)),
            }
        }
        entry.depends_on = deps;
        let root = entry.root_name().to_string();
        entry.indirect = !data.direct.contains(&entry.name) && !data.direct.contains(&root);
        entry.resolved_source = data.spec_repos.get(&root).cloned();
        entry.checksum = data.checksums.get(&root).cloned();
        if let Some(ext) = data.external.get(&root) {
            entry.explicit_location = location_from_options(ext);
        }
        if let Some(commit) = data
            .checkout
            .get(&root)
            .and_then(|opts| opts.get("commit"))
            .map(|c| c.to_ascii_lowercase())
        {
            if is_commit_hash(&commit) {
                entry.pinned_revision = Some(commit);
            }
        }
        manifest.entries.push(entry);
    }

    Ok(manifest)
}

fn location_from_options(opts: &BTreeMap<String, String>) -> Option<ExplicitLocation> {
    if let Some(p) = opts.get("path") {
        return Some(ExplicitLocation::new(LocationKind::LocalPath, p));
    }
    if let Some(g) = opts.get("git") {
        return Some(ExplicitLocation::new(LocationKind::GitUrl, g));
    }
    opts.get("podspec").map(|p| {
        let kind = if p.contains("://") {
            LocationKind::SourceRepoUrl
        } else {
            LocationKind::LocalPath
        };
        ExplicitLocation::new(kind, p)
    })
}

/// `Name (detail)` -> (`Name`, Some(`detail`)).
fn split_name_paren(item: &str) -> (&str, Option<&str>) {
    match item.find(" (") {
        Some(pos) if item.ends_with(')') => {
            (item[..pos].trim(), Some(item[pos + 2..item.len() - 1].trim()))
        }
        _ => (item.trim(), None),
    }
}

fn unquote(s: &str) -> &str {
    let b = s.as_bytes();
    if b.len() >= 2 && (b[0] == b'"' || b[0] == b'\'') && b[b.len() - 1] == b[0] {
        &s[1..s.len() - 1]
    } else {
        s
    }
}
