//! Queryable index over a CocoaPods Specs checkout.
//!
//! Only `*.podspec.json` files are read, and only the fields needed for
//! name lookups and integrity checks: `name`, `version`, `source`,
//! `module_name`, `header_dir` and `prepare_command`.

mod store;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use crate::manifest::{is_commit_hash, VersionString};

pub use store::{load_index, save_index, FORMAT_VERSION, MAGIC};

#[derive(Debug, Error)]
pub enum SpecIndexError {
    #[error("not a directory: {0}")]
    NotADirectory(PathBuf),
    #[error("no podspecs found under {0}")]
    EmptyTree(PathBuf),
    #[error("I/O error at byte {offset}: {reason}")]
    Io { offset: u64, reason: String },
    #[error("unsupported index format (magic {magic:?}, version {version})")]
    FormatVersionMismatch { magic: String, version: u16 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Git,
    HttpArchive,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PodVersionSpec {
    /// Raw version string. Nonconforming strings are kept; see
    /// [`PodVersionSpec::parsed_version`].
    pub version: String,
    pub source_kind: SourceKind,
    pub source_url: String,
    pub git_tag: Option<String>,
    pub git_commit: Option<String>,
    pub archive_sha: Option<String>,
    pub module_name: Option<String>,
    pub header_dir: Option<String>,
    pub has_prepare_command: bool,
}

impl PodVersionSpec {
    pub fn git(version: impl Into<String>, url: impl Into<String>) -> Self {
        PodVersionSpec {
            version: version.into(),
            source_kind: SourceKind::Git,
            source_url: url.into(),
            git_tag: None,
            git_commit: None,
            archive_sha: None,
            module_name: None,
            header_dir: None,
            has_prepare_command: false,
        }
    }

    pub fn http(version: impl Into<String>, url: impl Into<String>) -> Self {
        PodVersionSpec {
            source_kind: SourceKind::HttpArchive,
            ..PodVersionSpec::git(version, url)
        }
    }

    pub fn parsed_version(&self) -> Option<VersionString> {
        VersionString::parse(&self.version).ok()
    }

    pub fn is_pinned(&self) -> bool {
        self.git_commit.is_some() || self.archive_sha.is_some()
    }

    /// The name CocoaPods gives the built framework for this version.
    pub fn framework_name<'a>(&'a self, pod_name: &'a str) -> &'a str {
        self.module_name
            .as_deref()
            .or(self.header_dir.as_deref())
            .unwrap_or(pod_name)
    }

    fn from_json(value: &Value, dir_version: &str) -> Option<PodVersionSpec> {
        let obj = value.as_object()?;
        obj.get("name").and_then(Value::as_str).filter(|n| !n.is_empty())?;
        let version = match obj.get("version") {
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            None => dir_version.to_string(),
            _ => return None,
        };
        let text = |key: &str| {
            obj.get(key)
                .and_then(Value::as_str)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        };
        let source = obj.get("source").and_then(Value::as_object);
        let source_str = |key: &str| {
            source
                .and_then(|s| s.get(key))
                .and_then(Value::as_str)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        };

        let mut spec = if let Some(url) = source_str("git") {
            let mut spec = PodVersionSpec::git(version, url);
            spec.git_tag = source_str("tag");
            spec.git_commit = source_str("commit")
                .map(|c| c.to_ascii_lowercase())
                .filter(|c| is_commit_hash(c));
            spec
        } else if let Some(url) = source_str("http") {
            let mut spec = PodVersionSpec::http(version, url);
            spec.archive_sha = source_str("sha256")
                .or_else(|| source_str("sha1"))
                .map(|s| s.to_ascii_lowercase())
                .filter(|s| s.bytes().all(|b| b.is_ascii_hexdigit()));
            spec
        } else {
            let url = source
                .and_then(|s| s.values().find_map(Value::as_str))
                .unwrap_or_default();
            PodVersionSpec {
                source_kind: SourceKind::Other,
                ..PodVersionSpec::git(version, url)
            }
        };
        spec.module_name = text("module_name");
        spec.header_dir = text("header_dir");
        spec.has_prepare_command = obj
            .get("prepare_command")
            .is_some_and(|v| !v.is_null() && v.as_str() != Some(""));
        Some(spec)
    }
}

/// Parseable versions in semantic order first, then the rest lexicographically.
pub fn compare_version_strings(a: &str, b: &str) -> Ordering {
    match (VersionString::parse(a), VersionString::parse(b)) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrityProfile {
    AllVersionsPinned,
    SomeVersionsPinned,
    NeverPinned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PodRecord {
    pub name: String,
    /// Ascending, unique by version string.
    pub versions: Vec<PodVersionSpec>,
    pub effective_framework_names: BTreeSet<String>,
}

impl PodRecord {
    /// Sorts versions, drops repeated version strings (first one wins) and
    /// computes the framework names.
    pub fn new(name: impl Into<String>, versions: Vec<PodVersionSpec>) -> Self {
        let mut seen = BTreeSet::new();
        let mut versions: Vec<_> = versions
            .into_iter()
            .filter(|v| seen.insert(v.version.clone()))
            .collect();
        versions.sort_by(|a, b| compare_version_strings(&a.version, &b.version));
        let mut record = PodRecord {
            name: name.into(),
            versions,
            effective_framework_names: BTreeSet::new(),
        };
        record.effective_framework_names = effective_framework_names(&record);
        record
    }

    pub fn version(&self, version: &str) -> Option<&PodVersionSpec> {
        self.versions.iter().find(|v| v.version == version)
    }
}

/// Union over versions of `module_name`, else `header_dir`, else the pod name.
pub fn effective_framework_names(record: &PodRecord) -> BTreeSet<String> {
    record
        .versions
        .iter()
        .map(|v| v.framework_name(&record.name).to_string())
        .collect()
}

pub fn integrity_profile(record: &PodRecord) -> IntegrityProfile {
    let pinned = record.versions.iter().filter(|v| v.is_pinned()).count();
    if pinned == 0 {
        IntegrityProfile::NeverPinned
    } else if pinned == record.versions.len() {
        IntegrityProfile::AllVersionsPinned
    } else {
        IntegrityProfile::SomeVersionsPinned
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecIndex {
    pub pods: BTreeMap<String, PodRecord>,
    pub framework_name_index: BTreeMap<String, BTreeSet<String>>,
    pub built_at: DateTime<Utc>,
    pub source_tree_digest: String,
    /// Podspec files that could not be read or parsed.
    pub skipped_podspecs: usize,
}

impl SpecIndex {
    pub fn from_records(
        records: impl IntoIterator<Item = PodRecord>,
        built_at: DateTime<Utc>,
        source_tree_digest: impl Into<String>,
    ) -> Self {
        let pods: BTreeMap<String, PodRecord> =
            records.into_iter().map(|r| (r.name.clone(), r)).collect();
        SpecIndex {
            framework_name_index: invert(&pods),
            pods,
            built_at,
            source_tree_digest: source_tree_digest.into(),
            skipped_podspecs: 0,
        }
    }

    pub fn pod(&self, name: &str) -> Option<&PodRecord> {
        self.pods.get(name)
    }

    pub fn contains_pod(&self, name: &str) -> bool {
        self.pods.contains_key(name)
    }

    pub fn version_count(&self) -> usize {
        self.pods.values().map(|p| p.versions.len()).sum()
    }

    /// True when `framework_name_index` is exactly the inverse of every
    /// pod's framework names.
    pub fn inversion_holds(&self) -> bool {
        self.framework_name_index == invert(&self.pods)
            && self
                .pods
                .values()
                .all(|p| p.effective_framework_names == effective_framework_names(p))
    }
}

fn invert(pods: &BTreeMap<String, PodRecord>) -> BTreeMap<String, BTreeSet<String>> {
    let mut index: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for pod in pods.values() {
        for fw in &pod.effective_framework_names {
            index.entry(fw.clone()).or_default().insert(pod.name.clone());
        }
    }
    index
}

/// Exact, case-sensitive lookup. An empty set means no public pod builds a
/// framework with this name.
pub fn lookup_framework(index: &SpecIndex, framework_name: &str) -> BTreeSet<String> {
    index
        .framework_name_index
        .get(framework_name)
        .cloned()
        .unwrap_or_default()
}

struct ParsedFile {
    rel_path: String,
    file_digest: String,
    pod_dir: String,
    spec: Option<PodVersionSpec>,
}

pub fn build_index(specs_tree: &Path) -> Result<SpecIndex, SpecIndexError> {
    build_index_at(specs_tree, Utc::now())
}

/// [`build_index`] with a caller-supplied build timestamp.
pub fn build_index_at(
    specs_tree: &Path,
    built_at: DateTime<Utc>,
) -> Result<SpecIndex, SpecIndexError> {
    if !specs_tree.is_dir() {
        return Err(SpecIndexError::NotADirectory(specs_tree.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(specs_tree).sort_by_file_name() {
        let entry = entry.map_err(|e| SpecIndexError::Io {
            offset: 0,
            reason: e.to_string(),
        })?;
        let is_podspec = entry.file_type().is_file()
            && entry.file_name().to_str().is_some_and(|n| n.ends_with(".podspec.json"));
        if is_podspec {
            files.push(entry.into_path());
        }
    }

    let parsed: Vec<ParsedFile> = files
        .par_iter()
        .filter_map(|path| parse_file(specs_tree, path))
        .collect();

    let mut digest = Sha256::new();
    let mut by_pod: BTreeMap<String, Vec<PodVersionSpec>> = BTreeMap::new();
    let mut skipped = files.len() - parsed.len();
    for file in parsed {
        digest.update(file.rel_path.as_bytes());
        digest.update([0]);
        digest.update(file.file_digest.as_bytes());
        digest.update([b'\n']);
        match file.spec {
            Some(spec) => by_pod.entry(file.pod_dir).or_default().push(spec),
            None => {
                log::warn!("skipping unparseable podspec {}", file.rel_path);
                skipped += 1;
            }
        }
    }
    if by_pod.is_empty() {
        return Err(SpecIndexError::EmptyTree(specs_tree.to_path_buf()));
    }

    let mut index = SpecIndex::from_records(
        by_pod.into_iter().map(|(name, versions)| PodRecord::new(name, versions)),
        built_at,
        hex::encode(digest.finalize()),
    );
    index.skipped_podspecs = skipped;
    Ok(index)
}

/// `<PodName>/<Version>/<PodName>.podspec.json`; the pod is named after its
/// directory. Returns `None` only when the file cannot be read at all.
fn parse_file(root: &Path, path: &Path) -> Option<ParsedFile> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            log::warn!("cannot read {}: {e}", path.display());
            return None;
        }
    };
    let rel_path = path
        .strip_prefix(root)
        .ok()?
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/");
    let version_dir = path.parent()?;
    let pod_dir = version_dir.parent()?.file_name()?.to_string_lossy().into_owned();
    let dir_version = version_dir.file_name()?.to_string_lossy().into_owned();
    let spec = serde_json::from_slice::<Value>(&bytes)
        .ok()
        .and_then(|v| PodVersionSpec::from_json(&v, &dir_version));
    Some(ParsedFile {
        rel_path,
        file_digest: hex::encode(Sha256::digest(&bytes)),
        pod_dir,
        spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(version: &str) -> PodVersionSpec {
        PodVersionSpec::git(version, "https://github.com/o/r.git")
    }

    #[test]
    fn default_names() {
        let r = PodRecord::new("Bar", vec![plain("1.0"), plain("2.0")]);
        assert_eq!(effective_framework_names(&r), BTreeSet::from(["Bar".to_string()]));
    }

    #[test]
    fn header_dir_union() {
        let mut v1 = plain("1.0");
        v1.header_dir = Some("BazCore".into());
        let r = PodRecord::new("Baz", vec![v1, plain("1.1")]);
        assert_eq!(
            r.effective_framework_names,
            BTreeSet::from(["Baz".to_string(), "BazCore".to_string()])
        );
    }

    #[test]
    fn module_name_beats_header_dir() {
        let mut v = plain("1.0");
        v.module_name = Some("QuxM".into());
        v.header_dir = Some("QuxH".into());
        let r = PodRecord::new("Qux", vec![v]);
        assert!(r.effective_framework_names.contains("QuxM"));
        assert!(!r.effective_framework_names.contains("QuxH"));
        assert!(!r.effective_framework_names.contains("Qux"));
    }

    #[test]
    fn integrity_quantifiers() {
        let mut pinned = plain("1.0");
        pinned.git_commit = Some("abcdef0".into());
        let mut pinned2 = plain("1.1");
        pinned2.git_commit = Some("abcdef1".into());
        assert_eq!(
            integrity_profile(&PodRecord::new("A", vec![pinned.clone(), pinned2])),
            IntegrityProfile::AllVersionsPinned
        );
        let mut archive = PodVersionSpec::http("3.0", "https://x.test/a.zip");
        archive.archive_sha = Some("00ff".into());
        assert_eq!(
            integrity_profile(&PodRecord::new("A", vec![plain("1.0"), plain("2.0"), archive])),
            IntegrityProfile::SomeVersionsPinned
        );
        assert_eq!(
            integrity_profile(&PodRecord::new("A", vec![plain("1.0")])),
            IntegrityProfile::NeverPinned
        );
    }

    #[test]
    fn version_order_and_uniqueness() {
        let r = PodRecord::new(
            "A",
            vec![plain("1.10"), plain("weird"), plain("1.2"), plain("1.2"), plain("1.0-beta"), plain("abc")],
        );
        let order: Vec<&str> = r.versions.iter().map(|v| v.version.as_str()).collect();
        assert_eq!(order, ["1.0-beta", "1.2", "1.10", "abc", "weird"]);
    }

    #[test]
    fn podspec_json_fields() {
        let json: Value = serde_json::from_str(
            r#"{"name":"X","version":"1.0","source":{"git":"https://g.test/x.git","commit":"ABCDEF0123"},
                "module_name":"XKit","prepare_command":"make"}"#,
        )
        .unwrap();
        let spec = PodVersionSpec::from_json(&json, "1.0").unwrap();
        assert_eq!(spec.git_commit.as_deref(), Some("abcdef0123"));
        assert_eq!(spec.module_name.as_deref(), Some("XKit"));
        assert!(spec.has_prepare_command && spec.is_pinned());

        let json: Value = serde_json::from_str(
            r#"{"name":"X","version":"1.0","source":{"git":"https://g.test/x.git","commit":"main"}}"#,
        )
        .unwrap();
        assert_eq!(PodVersionSpec::from_json(&json, "1.0").unwrap().git_commit, None);

        let json: Value =
            serde_json::from_str(r#"{"name":"X","source":{"svn":"svn://s.test/x"}}"#).unwrap();
        let spec = PodVersionSpec::from_json(&json, "0.3").unwrap();
        assert_eq!((spec.source_kind, spec.version.as_str()), (SourceKind::Other, "0.3"));
        assert_eq!(spec.source_url, "svn://s.test/x");

        assert!(PodVersionSpec::from_json(&Value::Null, "1").is_none());
    }
}
