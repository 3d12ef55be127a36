//! Line-oriented Podfile subset.
//!
//! Podfiles are Ruby programs. Only `source` and `pod` statements are
//! understood; everything else (targets, platform, hooks) is flattened away
//! and reported as a warning.

use std::sync::OnceLock;

use regex::Regex;

use super::{
    is_commit_hash, parse_requirement, DependencyEntry, Ecosystem, ExplicitLocation,
    LocationKind, Manifest, ManifestKind,
};

pub const PUBLIC_CDN_SOURCE: &str = "https://cdn.cocoapods.org/";
pub const PUBLIC_GIT_SOURCE: &str = "https://github.com/CocoaPods/Specs.git";

/// Whether `url` names the public CocoaPods trunk (CDN or the Specs git repo).
pub fn is_public_source(url: &str) -> bool {
    let norm = url
        .trim()
        .trim_end_matches('/')
        .trim_end_matches(".git")
        .to_ascii_lowercase();
    let norm = norm
        .strip_prefix("https://")
        .or_else(|| norm.strip_prefix("http://"))
        .unwrap_or(&norm);
    matches!(
        norm,
        "trunk" | "cdn.cocoapods.org" | "github.com/cocoapods/specs" | "www.github.com/cocoapods/specs"
    )
}

fn source_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"^source\s*\(?\s*(?:'([^']*)'|"([^"]*)")\s*\)?$"#).unwrap())
}

fn pod_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^pod(?:\s+|\s*\()(.*)$").unwrap())
}

pub fn parse_podfile(text: &str) -> Manifest {
    let mut manifest = Manifest::empty(ManifestKind::Podfile);

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw_line).trim();
        if line.is_empty() {
            continue;
        }

        if let Some(caps) = source_line().captures(line) {
            let url = caps.get(1).or_else(|| caps.get(2)).map_or("", |m| m.as_str());
            manifest.sources_in_order.push(url.to_string());
            continue;
        }

        if let Some(caps) = pod_line().captures(line) {
            let mut args = caps[1].trim();
            if line[3..].trim_start().starts_with('(') {
                args = args.strip_suffix(')').unwrap_or(args);
            }
            match parse_pod_args(args, line_no, &mut manifest) {
                Some(entry) => manifest.entries.push(entry),
                None => manifest.warn(line_no, format!("unparseable pod declaration: {line}")),
            }
            continue;
        }

        let keyword = line.split_whitespace().next().unwrap_or(line);
        let message = match keyword {
            "target" | "abstract_target" => format!("target block flattened: {line}"),
            "end" => "block end ignored".to_string(),
            _ if line.ends_with(" do") || line.contains(" do |") => {
                format!("ruby block not evaluated: {line}")
            }
            _ => format!("unrecognized statement: {line}"),
        };
        manifest.warn(line_no, message);
    }

    manifest
}

fn parse_pod_args(args: &str, line_no: usize, manifest: &mut Manifest) -> Option<DependencyEntry> {
    let parts = split_top_level(args);
    let mut iter = parts.into_iter();
    let name = unquote(iter.next()?.trim())?;
    if name.is_empty() {
        return None;
    }

    let mut entry = DependencyEntry::new(name, Ecosystem::Cocoapods);
    let mut git = None;
    let mut path = None;
    let mut source = None;
    let mut podspec = None;

    for part in iter {
        let part = part.trim();
        if let Some(text) = unquote(part) {
            match parse_requirement(&text) {
                Ok(req) => entry.requirements.push(req),
                Err(err) => manifest.warn(line_no, err),
            }
            continue;
        }
        let Some((key, value)) = split_option(part) else {
            manifest.warn(line_no, format!("unrecognized pod argument: {part}"));
            continue;
        };
        let value = unquote(value.trim());
        match (key, value) {
            ("git", Some(v)) => git = Some(v),
            ("path", Some(v)) => path = Some(v),
            ("source", Some(v)) => source = Some(v),
            ("podspec", Some(v)) => podspec = Some(v),
            ("commit", Some(v)) => {
                let v = v.to_ascii_lowercase();
                if is_commit_hash(&v) {
                    entry.pinned_revision = Some(v);
                } else {
                    manifest.warn(line_no, format!("commit {v:?} is not a hex hash"));
                }
            }
            _ => {}
        }
    }

    entry.explicit_location = if let Some(p) = path {
        Some(ExplicitLocation::new(LocationKind::LocalPath, p))
    } else if let Some(g) = git {
        Some(ExplicitLocation::new(LocationKind::GitUrl, g))
    } else if let Some(s) = source {
        Some(ExplicitLocation::new(LocationKind::SourceRepoUrl, s))
    } else {
        podspec.map(|p| {
            let kind = if p.contains("://") {
                LocationKind::SourceRepoUrl
            } else {
                LocationKind::LocalPath
            };
            ExplicitLocation::new(kind, p)
        })
    };
    if entry.requirements.is_empty() {
        entry.requirements.push(super::Requirement::any());
    }
    Some(entry)
}

/// `:key => value` or `key: value`.
fn split_option(part: &str) -> Option<(&str, &str)> {
    if let Some(rest) = part.strip_prefix(':') {
        let (key, value) = rest.split_once("=>")?;
        return Some((key.trim(), value));
    }
    let (key, value) = part.split_once(':')?;
    let key = key.trim();
    (!key.is_empty() && key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_'))
        .then_some((key, value))
}

fn unquote(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    if bytes.len() >= 2 {
        let q = bytes[0];
        if (q == b'\'' || q == b'"') && bytes[bytes.len() - 1] == q {
            let inner = &s[1..s.len() - 1];
            if !inner.contains(q as char) {
                return Some(inner.to_string());
            }
        }
    }
    None
}

/// Splits on commas outside quotes and brackets.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None => match c {
                '\'' | '"' => quote = Some(c),
                '[' | '{' | '(' => depth += 1,
                ']' | '}' | ')' => depth -= 1,
                ',' if depth <= 0 => {
                    parts.push(&s[start..i]);
                    start = i + 1;
                }
                _ => {}
            },
        }
    }
    parts.push(&s[start..]);
    parts
}

/// Drops a trailing `#` comment that is not inside a string literal.
fn strip_comment(line: &str) -> &str {
    let mut quote: Option<char> = None;
    for (i, c) in line.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None => match c {
                '\'' | '"' => quote = Some(c),
                '#' => return &line[..i],
                _ => {}
            },
        }
    }
    line
}
