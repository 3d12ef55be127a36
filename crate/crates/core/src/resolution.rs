//! CocoaPods source-precedence model.
//!
//! Sources are consulted strictly in declaration order. A pod name that is
//! missing from the public Specs index is confusable whenever the public
//! source is consulted before the private one that actually hosts it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::BundleScan;
use crate::manifest::{
    is_public_source, satisfies_all, LocationKind, Manifest, ManifestKind, Operator, Requirement,
    VersionString, PUBLIC_CDN_SOURCE,
};
use crate::specindex::{lookup_framework, SpecIndex};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolutionError {
    #[error("expected a {expected} manifest, got {found}")]
    WrongManifestKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error("no version satisfies {0}")]
    UnsatisfiableRequirements(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    ExplicitLocationSafe,
    LocalPathSafe,
    /// A private source is consulted before any public one (or no public
    /// source is declared), so a public name squat is never reached.
    PrivatePrecedenceSafe,
    PublicOnly,
    ShadowableMultisource,
    UnregisteredConfusable,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::ExplicitLocationSafe => "explicit_location_safe",
            Classification::LocalPathSafe => "local_path_safe",
            Classification::PrivatePrecedenceSafe => "private_precedence_safe",
            Classification::PublicOnly => "public_only",
            Classification::ShadowableMultisource => "shadowable_multisource",
            Classification::UnregisteredConfusable => "unregistered_confusable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionVerdict {
    pub dependency: String,
    pub classification: Classification,
    pub attacker_version_needed: Option<VersionString>,
    pub rationale: String,
}

impl ResolutionVerdict {
    fn new(dependency: &str, classification: Classification, rationale: impl Into<String>) -> Self {
        ResolutionVerdict {
            dependency: dependency.to_string(),
            classification,
            attacker_version_needed: None,
            rationale: rationale.into(),
        }
    }
}

fn describe(reqs: &[Requirement]) -> String {
    let parts: Vec<String> = reqs.iter().map(ToString::to_string).collect();
    if parts.is_empty() {
        "any version".into()
    } else {
        parts.join(", ")
    }
}

/// The smallest candidate version that satisfies every requirement.
///
/// Candidates are the lower bounds the requirements name (`> x` becomes `x`
/// with its last component bumped) plus `0.0.1` for unconstrained entries.
/// If none fits, a few finer-grained versions around each bound are tried.
pub fn attacker_target_version(reqs: &[Requirement]) -> Result<VersionString, ResolutionError> {
    let sentinel = VersionString::from_components(&[0, 0, 1]);
    let mut primary = vec![sentinel];
    for req in reqs {
        let Some(v) = &req.version else { continue };
        match req.op {
            Operator::Exact | Operator::Gte | Operator::Pessimistic => primary.push(v.clone()),
            Operator::Gt => primary.push(bump_last(v.components())),
            Operator::Lt | Operator::Lte | Operator::Any => {}
        }
    }
    if let Some(v) = smallest_satisfying(primary, reqs) {
        return Ok(v);
    }

    let mut fallback = vec![VersionString::from_components(&[0])];
    for v in reqs.iter().filter_map(|r| r.version.as_ref()) {
        let core = v.components();
        fallback.push(VersionString::from_components(core));
        fallback.push(bump_last(core));
        let mut extended = core.to_vec();
        extended.push(1);
        fallback.push(VersionString::from_components(&extended));
    }
    smallest_satisfying(fallback, reqs)
        .ok_or_else(|| ResolutionError::UnsatisfiableRequirements(describe(reqs)))
}

fn bump_last(components: &[u64]) -> VersionString {
    let mut c = components.to_vec();
    if let Some(last) = c.last_mut() {
        *last = last.saturating_add(1);
    }
    VersionString::from_components(&c)
}

fn smallest_satisfying(candidates: Vec<VersionString>, reqs: &[Requirement]) -> Option<VersionString> {
    candidates.into_iter().filter(|v| satisfies_all(v, reqs)).min()
}

/// Classifies every pod in a Podfile against the public index.
pub fn analyze_podfile(
    manifest: &Manifest,
    public_index: &SpecIndex,
) -> Result<Vec<ResolutionVerdict>, ResolutionError> {
    if manifest.kind != ManifestKind::Podfile {
        return Err(ResolutionError::WrongManifestKind {
            expected: ManifestKind::Podfile.as_str(),
            found: manifest.kind.as_str(),
        });
    }

    let declared: Vec<&str> = if manifest.sources_in_order.is_empty() {
        vec![PUBLIC_CDN_SOURCE]
    } else {
        manifest.sources_in_order.iter().map(String::as_str).collect()
    };
    let first_public = declared.iter().position(|s| is_public_source(s));

    let mut verdicts = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let name = entry.name.as_str();
        let root = entry.root_name();
        let in_public = public_index.contains_pod(root);

        // An explicit `:source =>` naming the public repository pins the pod
        // to it rather than protecting it.
        let sources: Vec<&str> = match &entry.explicit_location {
            Some(loc) if loc.kind == LocationKind::LocalPath => {
                verdicts.push(ResolutionVerdict::new(
                    name,
                    Classification::LocalPathSafe,
                    format!("installed from local path {}", loc.value),
                ));
                continue;
            }
            Some(loc) if loc.kind == LocationKind::SourceRepoUrl && is_public_source(&loc.value) => {
                vec![loc.value.as_str()]
            }
            Some(loc) => {
                verdicts.push(ResolutionVerdict::new(
                    name,
                    Classification::ExplicitLocationSafe,
                    format!("explicit location {} bypasses source search", loc.value),
                ));
                continue;
            }
            None => declared.clone(),
        };
        let public_pos = if entry.explicit_location.is_some() { Some(0) } else { first_public };

        let verdict = match public_pos {
            None => ResolutionVerdict::new(
                name,
                Classification::PrivatePrecedenceSafe,
                "no public source is declared",
            ),
            Some(pos) if !in_public && pos > 0 => ResolutionVerdict::new(
                name,
                Classification::PrivatePrecedenceSafe,
                format!(
                    "not in the public index, but {} is searched before the public source",
                    sources[0]
                ),
            ),
            Some(_) if !in_public => {
                let target = attacker_target_version(&entry.requirements);
                let rationale = match &target {
                    Ok(v) => format!(
                        "not in the public index and the public source is searched first; \
                         publishing {root} {v} publicly would satisfy {} on the next `pod update`",
                        describe(&entry.requirements)
                    ),
                    Err(e) => format!(
                        "not in the public index and the public source is searched first ({e})"
                    ),
                };
                ResolutionVerdict {
                    attacker_version_needed: target.ok(),
                    ..ResolutionVerdict::new(name, Classification::UnregisteredConfusable, rationale)
                }
            }
            Some(pos) if sources.len() > 1 && pos + 1 < sources.len() => ResolutionVerdict::new(
                name,
                Classification::ShadowableMultisource,
                "public pod exists and the public source is searched before a private one; \
                 a same-named private pod would be shadowed",
            ),
            Some(_) => ResolutionVerdict::new(
                name,
                Classification::PublicOnly,
                "resolved from the public source",
            ),
        };
        verdicts.push(verdict);
    }
    Ok(verdicts)
}

/// Compares leaked CocoaPods framework names against the public index.
pub fn confusion_report_for_bundle(scan: &BundleScan, public_index: &SpecIndex) -> Vec<ResolutionVerdict> {
    scan.frameworks
        .iter()
        .filter(|f| f.is_cocoapods)
        .map(|f| {
            let pods = lookup_framework(public_index, &f.framework_name);
            if pods.is_empty() {
                let version = f
                    .bundle_version
                    .as_deref()
                    .and_then(|v| VersionString::parse(v).ok());
                let rationale = match &version {
                    Some(v) => format!(
                        "framework {} is built by CocoaPods but no public pod provides it; \
                         the bundle leaks version {v}",
                        f.framework_name
                    ),
                    None => format!(
                        "framework {} is built by CocoaPods but no public pod provides it",
                        f.framework_name
                    ),
                };
                ResolutionVerdict {
                    attacker_version_needed: version,
                    ..ResolutionVerdict::new(
                        &f.framework_name,
                        Classification::UnregisteredConfusable,
                        rationale,
                    )
                }
            } else {
                let list: Vec<&str> = pods.iter().map(String::as_str).collect();
                ResolutionVerdict::new(
                    &f.framework_name,
                    Classification::PublicOnly,
                    format!("provided by public pod {}", list.join(", ")),
                )
            }
        })
        .collect()
}

/// Lockfile entries fetched from a non-public spec repository whose names
/// are free in the public index. Whether they are reachable depends on the
/// Podfile's source order, which the lockfile does not record.
pub fn lockfile_private_unregistered(
    manifest: &Manifest,
    public_index: &SpecIndex,
) -> Result<Vec<ResolutionVerdict>, ResolutionError> {
    if manifest.kind != ManifestKind::PodfileLock {
        return Err(ResolutionError::WrongManifestKind {
            expected: ManifestKind::PodfileLock.as_str(),
            found: manifest.kind.as_str(),
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for entry in &manifest.entries {
        let root = entry.root_name();
        let private_repo = entry
            .resolved_source
            .as_deref()
            .filter(|s| !is_public_lock_repo(s));
        let Some(repo) = private_repo else { continue };
        if entry.explicit_location.is_some() || public_index.contains_pod(root) || !seen.insert(root) {
            continue;
        }
        out.push(ResolutionVerdict {
            attacker_version_needed: entry.requirements.iter().find_map(|r| r.version.clone()),
            ..ResolutionVerdict::new(
                root,
                Classification::UnregisteredConfusable,
                format!("resolved from {repo} and not in the public index; exposure depends on source order"),
            )
        });
    }
    Ok(out)
}

fn is_public_lock_repo(repo: &str) -> bool {
    repo == "trunk" || is_public_source(repo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::parse_requirement;

    fn reqs(texts: &[&str]) -> Vec<Requirement> {
        texts.iter().map(|t| parse_requirement(t).unwrap()).collect()
    }

    fn target(texts: &[&str]) -> Result<String, ResolutionError> {
        attacker_target_version(&reqs(texts)).map(|v| v.to_string())
    }

    #[test]
    fn forced_and_lower_bounds() {
        assert_eq!(target(&["1.4.2"]).unwrap(), "1.4.2");
        assert_eq!(target(&["~> 2.27"]).unwrap(), "2.27");
        assert_eq!(target(&[">= 1.0"]).unwrap(), "1.0");
        assert_eq!(target(&["> 1.9"]).unwrap(), "1.10");
        assert_eq!(target(&[]).unwrap(), "0.0.1");
        assert_eq!(target(&[""]).unwrap(), "0.0.1");
        assert_eq!(target(&["< 2.0"]).unwrap(), "0.0.1");
    }

    #[test]
    fn fallbacks() {
        assert_eq!(target(&["> 1.0", "< 1.0.5"]).unwrap(), "1.0.1");
        assert_eq!(target(&["< 0.0.1"]).unwrap(), "0");
    }

    #[test]
    fn unsatisfiable() {
        assert!(matches!(
            target(&[">= 1.0", "< 1.0"]),
            Err(ResolutionError::UnsatisfiableRequirements(_))
        ));
        assert!(target(&["1.0", "2.0"]).is_err());
    }

    #[test]
    fn wrong_kind() {
        let m = Manifest::empty(ManifestKind::GoMod);
        let index = SpecIndex::from_records([], chrono::Utc::now(), "");
        assert!(matches!(
            analyze_podfile(&m, &index),
            Err(ResolutionError::WrongManifestKind { .. })
        ));
        assert!(lockfile_private_unregistered(&m, &index).is_err());
    }
}
