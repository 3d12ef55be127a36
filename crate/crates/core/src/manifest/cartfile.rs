use std::sync::OnceLock;

use regex::Regex;

use super::{
    is_commit_hash, DependencyEntry, Ecosystem, ExplicitLocation, LocationKind, Manifest,
    ManifestKind, Requirement, VersionString,
};

fn line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"^(github|git|binary)\s+"([^"]+)"\s+"([^"]*)"$"#).unwrap())
}

/// Parses `Cartfile.resolved`. A revision counts as a pin only when it has
/// commit-hash shape; tags are mutable references.
pub fn parse_cartfile_resolved(text: &str) -> Manifest {
    let mut manifest = Manifest::empty(ManifestKind::CartfileResolved);

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some(caps) = line_re().captures(line) else {
            manifest.warn(line_no, format!("unrecognized line: {line}"));
            continue;
        };
        let (origin, target, rev) = (&caps[1], &caps[2], &caps[3]);

        let (name, url) = match origin {
            "github" if !target.contains("://") => {
                (target.trim_end_matches(".git").to_string(), format!("https://github.com/{target}"))
            }
            _ => (target.to_string(), target.to_string()),
        };
        let mut entry = DependencyEntry::new(name, Ecosystem::Carthage);
        let kind = if origin == "binary" {
            LocationKind::SourceRepoUrl
        } else {
            LocationKind::GitUrl
        };
        entry.explicit_location = Some(ExplicitLocation::new(kind, url));

        if is_commit_hash(rev) {
            entry.pinned_revision = Some(rev.to_string());
        } else if let Ok(version) = VersionString::parse(rev.strip_prefix('v').unwrap_or(rev)) {
            entry.requirements.push(Requirement::exact(version));
        } else {
            manifest.warn(line_no, format!("revision {rev:?} is neither a version nor a commit"));
        }
        manifest.entries.push(entry);
    }

    manifest
}
