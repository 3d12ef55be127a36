//! Normalized dependency manifests.
//!
//! Every supported file (Podfile, Podfile.lock, Cartfile.resolved,
//! Package.resolved, go.mod) parses into the same [`Manifest`] model so the
//! analyzers downstream never look at file syntax.

mod cartfile;
mod gomod;
mod lockfile;
mod podfile;
mod swiftpm;
pub mod version;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cartfile::parse_cartfile_resolved;
pub use gomod::{go_host, github_coordinates, parse_go_mod};
pub use lockfile::parse_podfile_lock;
pub use podfile::{is_public_source, parse_podfile, PUBLIC_CDN_SOURCE, PUBLIC_GIT_SOURCE};
pub use swiftpm::parse_package_resolved;
pub use version::{
    best_match, parse_requirement, satisfies, satisfies_all, Operator, Requirement, VersionError,
    VersionString,
};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("no recognizable Podfile.lock section")]
    MalformedLock,
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("unknown Package.resolved schema version {0}")]
    UnknownSchemaVersion(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ecosystem {
    Cocoapods,
    Carthage,
    Swiftpm,
    Gomod,
    Npm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestKind {
    Podfile,
    PodfileLock,
    CartfileResolved,
    PackageResolved,
    GoMod,
}

impl ManifestKind {
    pub const ALL: [ManifestKind; 5] = [
        ManifestKind::Podfile,
        ManifestKind::PodfileLock,
        ManifestKind::CartfileResolved,
        ManifestKind::PackageResolved,
        ManifestKind::GoMod,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ManifestKind::Podfile => "podfile",
            ManifestKind::PodfileLock => "podfile_lock",
            ManifestKind::CartfileResolved => "cartfile_resolved",
            ManifestKind::PackageResolved => "package_resolved",
            ManifestKind::GoMod => "go_mod",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }

    /// Guesses the manifest kind from a file name (`Podfile.listing1` is a
    /// Podfile, `Podfile.lock` is not).
    pub fn detect(path: &Path) -> Option<Self> {
        let name = path.file_name()?.to_str()?;
        let lower = name.to_ascii_lowercase();
        if lower.starts_with("podfile.lock") {
            Some(ManifestKind::PodfileLock)
        } else if lower.starts_with("podfile") {
            Some(ManifestKind::Podfile)
        } else if lower.starts_with("cartfile.resolved") {
            Some(ManifestKind::CartfileResolved)
        } else if lower.starts_with("package.resolved") || lower.ends_with(".resolved") {
            Some(ManifestKind::PackageResolved)
        } else if lower.starts_with("go.mod") || lower.ends_with(".mod") {
            Some(ManifestKind::GoMod)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    SourceRepoUrl,
    GitUrl,
    LocalPath,
    /// A go `replace` target that is another module path.
    ModulePath,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplicitLocation {
    pub kind: LocationKind,
    pub value: String,
}

impl ExplicitLocation {
    pub fn new(kind: LocationKind, value: impl Into<String>) -> Self {
        Self {
            kind,
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyEntry {
    pub name: String,
    pub ecosystem: Ecosystem,
    #[serde(default)]
    pub requirements: Vec<Requirement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_location: Option<ExplicitLocation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_revision: Option<String>,
    /// Lockfile spec checksum (`SPEC CHECKSUMS`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checksum: Option<String>,
    /// Spec repository the lockfile says the pod was resolved from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_source: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub depends_on: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub indirect: bool,
}

impl DependencyEntry {
    pub fn new(name: impl Into<String>, ecosystem: Ecosystem) -> Self {
        Self {
            name: name.into(),
            ecosystem,
            requirements: Vec::new(),
            explicit_location: None,
            pinned_revision: None,
            checksum: None,
            resolved_source: None,
            depends_on: Vec::new(),
            indirect: false,
        }
    }

    /// Pod name without the subspec part (`Firebase/Core` -> `Firebase`).
    pub fn root_name(&self) -> &str {
        self.name.split('/').next().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ManifestKind,
    pub sources_in_order: Vec<String>,
    pub entries: Vec<DependencyEntry>,
    pub parse_warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub properties: BTreeMap<String, String>,
}

impl Manifest {
    pub fn empty(kind: ManifestKind) -> Self {
        Self {
            kind,
            sources_in_order: Vec::new(),
            entries: Vec::new(),
            parse_warnings: Vec::new(),
            properties: BTreeMap::new(),
        }
    }

    pub fn entry(&self, name: &str) -> Option<&DependencyEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    fn warn(&mut self, line_no: usize, message: impl std::fmt::Display) {
        self.parse_warnings.push(format!("line {line_no}: {message}"));
    }
}

/// Dispatches to the parser for `kind`.
pub fn parse_manifest(kind: ManifestKind, text: &str) -> Result<Manifest, ManifestError> {
    match kind {
        ManifestKind::Podfile => Ok(parse_podfile(text)),
        ManifestKind::PodfileLock => parse_podfile_lock(text),
        ManifestKind::CartfileResolved => Ok(parse_cartfile_resolved(text)),
        ManifestKind::PackageResolved => parse_package_resolved(text),
        ManifestKind::GoMod => Ok(parse_go_mod(text)),
    }
}

/// True for 7-40 character lowercase hex strings, the shape of a git commit
/// (full or abbreviated).
pub fn is_commit_hash(s: &str) -> bool {
    (7..=40).contains(&s.len()) && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}
