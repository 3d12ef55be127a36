//! Dependency evidence from an extracted iOS app bundle.
//!
//! Two kinds of evidence are collected: `<name>.framework` directories under
//! any `Frameworks` directory (with their `Info.plist` metadata), and npm
//! package names leaked through bundled file paths.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::plist::parse_plist;

pub const COCOAPODS_ID_PREFIX: &str = "org.cocoapods.";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("not a directory: {0}")]
    NotADirectory(PathBuf),
    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameworkRecord {
    pub framework_name: String,
    pub bundle_identifier: Option<String>,
    pub bundle_version: Option<String>,
    pub is_cocoapods: bool,
    /// Relative to the scanned root, `/`-separated.
    pub plist_path: String,
}

impl FrameworkRecord {
    pub fn new(
        framework_name: impl Into<String>,
        bundle_identifier: Option<String>,
        bundle_version: Option<String>,
        plist_path: impl Into<String>,
    ) -> Self {
        let is_cocoapods = bundle_identifier
            .as_deref()
            .is_some_and(|id| id.starts_with(COCOAPODS_ID_PREFIX));
        FrameworkRecord {
            framework_name: framework_name.into(),
            bundle_identifier,
            bundle_version,
            is_cocoapods,
            plist_path: plist_path.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NpmNameRecord {
    pub package_name: String,
    pub source_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleScan {
    pub bundle_path: PathBuf,
    /// Sorted by framework name.
    pub frameworks: Vec<FrameworkRecord>,
    /// Sorted by package name, one record per name.
    pub npm_names: Vec<NpmNameRecord>,
    pub scan_warnings: Vec<String>,
}

impl BundleScan {
    pub fn framework(&self, name: &str) -> Option<&FrameworkRecord> {
        self.frameworks.iter().find(|f| f.framework_name == name)
    }
}

/// Walks `path` and collects framework records and npm names. Symlinks are
/// not followed.
pub fn scan_bundle(path: &Path) -> Result<BundleScan, BundleError> {
    let meta = fs::metadata(path).map_err(|e| BundleError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if !meta.is_dir() {
        return Err(BundleError::NotADirectory(path.to_path_buf()));
    }

    let mut warnings = Vec::new();
    let mut file_paths = Vec::new();
    let mut framework_dirs: Vec<(String, PathBuf)> = Vec::new();

    for entry in WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| BundleError::Io {
            path: e.path().unwrap_or(path).to_path_buf(),
            reason: e.to_string(),
        })?;
        let Ok(rel) = entry.path().strip_prefix(path) else {
            continue;
        };
        let rel_str = to_slash(rel);
        if rel_str.is_empty() {
            continue;
        }
        if entry.file_type().is_file() {
            file_paths.push(rel_str);
        } else if entry.file_type().is_dir() {
            if let Some(name) = framework_name(rel) {
                framework_dirs.push((name, entry.path().to_path_buf()));
            }
        }
    }

    let mut by_name: BTreeMap<String, FrameworkRecord> = BTreeMap::new();
    for (name, dir) in framework_dirs {
        let plist_rel = to_slash(&dir.join("Info.plist").strip_prefix(path).unwrap_or(&dir));
        if let Some(existing) = by_name.get(&name) {
            warnings.push(format!(
                "duplicate framework {name}: {} ignored, keeping {}",
                plist_rel, existing.plist_path
            ));
            continue;
        }
        let record = read_framework(&name, &dir.join("Info.plist"), plist_rel, &mut warnings);
        by_name.insert(name, record);
    }

    Ok(BundleScan {
        bundle_path: path.to_path_buf(),
        frameworks: by_name.into_values().collect(),
        npm_names: extract_npm_names(&file_paths),
        scan_warnings: warnings,
    })
}

fn to_slash(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Name of a framework directory whose parent is `Frameworks`, unless it
/// sits inside a `.bundle` resource directory.
fn framework_name(rel: &Path) -> Option<String> {
    let file_name = rel.file_name()?.to_str()?;
    let stem = file_name.strip_suffix(".framework")?;
    if stem.is_empty() {
        return None;
    }
    let parent = rel.parent()?;
    if parent.file_name()?.to_str()? != "Frameworks" {
        return None;
    }
    let in_resource_bundle = parent
        .components()
        .any(|c| c.as_os_str().to_str().is_some_and(|s| s.ends_with(".bundle")));
    (!in_resource_bundle).then(|| stem.to_string())
}

fn read_framework(
    name: &str,
    plist: &Path,
    plist_rel: String,
    warnings: &mut Vec<String>,
) -> FrameworkRecord {
    let fields = match fs::read(plist) {
        Ok(bytes) => match parse_plist(&bytes) {
            Ok(map) => Some(map),
            Err(e) => {
                warnings.push(format!("{plist_rel}: {e}"));
                None
            }
        },
        Err(e) => {
            warnings.push(format!("{plist_rel}: {e}"));
            None
        }
    };
    let get = |key: &str| fields.as_ref().and_then(|m| m.get(key).cloned());
    FrameworkRecord::new(name, get("CFBundleIdentifier"), get("CFBundleVersion"), plist_rel)
}

/// npm package names leaked by paths under `node_modules/` or
/// `www/plugins/`. Names with a `.` or an uppercase letter are dropped.
/// When a name appears in several paths, the smallest path is kept.
pub fn extract_npm_names<S: AsRef<str>>(paths: &[S]) -> Vec<NpmNameRecord> {
    let mut found: BTreeMap<String, String> = BTreeMap::new();
    for path in paths {
        let path = path.as_ref();
        let segs: Vec<&str> = path.split('/').collect();
        for i in 0..segs.len() {
            let start = if segs[i] == "node_modules" {
                i + 1
            } else if segs[i] == "www" && segs.get(i + 1) == Some(&"plugins") {
                i + 2
            } else {
                continue;
            };
            let Some(name) = package_at(&segs, start) else {
                continue;
            };
            match found.get_mut(&name) {
                Some(existing) if existing.as_str() <= path => {}
                Some(existing) => *existing = path.to_string(),
                None => {
                    found.insert(name, path.to_string());
                }
            }
        }
    }
    found
        .into_iter()
        .map(|(package_name, source_path)| NpmNameRecord {
            package_name,
            source_path,
        })
        .collect()
}

/// The package directory starting at `segs[start]`. It must be a directory,
/// i.e. followed by at least one more segment.
fn package_at(segs: &[&str], start: usize) -> Option<String> {
    let first = *segs.get(start)?;
    let (name, last) = if first.starts_with('@') {
        let second = *segs.get(start + 1)?;
        if first.len() < 2 || second.is_empty() {
            return None;
        }
        (format!("{first}/{second}"), start + 1)
    } else {
        (first.to_string(), start)
    };
    if last + 1 >= segs.len() || first.is_empty() {
        return None;
    }
    if name.contains('.') || name.chars().any(|c| c.is_uppercase()) {
        return None;
    }
    Some(name)
}
