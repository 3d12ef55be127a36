use serde_json::Value;

use super::{
    is_commit_hash, DependencyEntry, Ecosystem, ExplicitLocation, LocationKind, Manifest,
    ManifestError, ManifestKind, Requirement, VersionString,
};

/// Parses SwiftPM's `Package.resolved` (schema versions 1, 2 and 3).
pub fn parse_package_resolved(text: &str) -> Result<Manifest, ManifestError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| ManifestError::MalformedJson(e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| ManifestError::MalformedJson("top level is not an object".into()))?;
    let version = obj
        .get("version")
        .and_then(Value::as_i64)
        .ok_or_else(|| ManifestError::MalformedJson("missing integer `version`".into()))?;

    // v1 nests pins under `object` and names fields differently.
    let (pins, name_key, url_key) = match version {
        1 => (
            obj.get("object").and_then(|o| o.get("pins")),
            "package",
            "repositoryURL",
        ),
        2 | 3 => (obj.get("pins"), "identity", "location"),
        other => return Err(ManifestError::UnknownSchemaVersion(other)),
    };
    let pins = pins
        .and_then(Value::as_array)
        .ok_or_else(|| ManifestError::MalformedJson("missing `pins` array".into()))?;

    let mut manifest = Manifest::empty(ManifestKind::PackageResolved);
    manifest.properties.insert("schema_version".into(), version.to_string());

    for (idx, pin) in pins.iter().enumerate() {
        let Some(name) = pin.get(name_key).and_then(Value::as_str) else {
            manifest.parse_warnings.push(format!("pin {idx}: missing `{name_key}`"));
            continue;
        };
        let mut entry = DependencyEntry::new(name, Ecosystem::Swiftpm);
        if let Some(url) = pin.get(url_key).and_then(Value::as_str) {
            let kind = if pin.get("kind").and_then(Value::as_str) == Some("localSourceControl") {
                LocationKind::LocalPath
            } else {
                LocationKind::GitUrl
            };
            entry.explicit_location = Some(ExplicitLocation::new(kind, url));
        }
        let state = pin.get("state");
        match state.and_then(|s| s.get("revision")).and_then(Value::as_str) {
            Some(rev) if is_commit_hash(&rev.to_ascii_lowercase()) => {
                entry.pinned_revision = Some(rev.to_ascii_lowercase());
            }
            Some(rev) => manifest
                .parse_warnings
                .push(format!("pin {name}: revision {rev:?} is not a commit hash")),
            None => manifest.parse_warnings.push(format!("pin {name}: no revision")),
        }
        if let Some(v) = state.and_then(|s| s.get("version")).and_then(Value::as_str) {
            if let Ok(version) = VersionString::parse(v) {
                entry.requirements.push(Requirement::exact(version));
            }
        }
        manifest.entries.push(entry);
    }

    Ok(manifest)
}
