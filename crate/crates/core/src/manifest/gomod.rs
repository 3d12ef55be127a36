use super::{DependencyEntry, Ecosystem, ExplicitLocation, LocationKind, Manifest, ManifestKind};

/// Host part of a module path (its first segment).
pub fn go_host(module_path: &str) -> &str {
    module_path.split('/').next().unwrap_or(module_path)
}

/// `github.com/<namespace>/<image>/...` -> (`namespace`, `image`).
pub fn github_coordinates(module_path: &str) -> Option<(String, String)> {
    let mut segs = module_path.split('/');
    let host = segs.next()?;
    if !host.eq_ignore_ascii_case("github.com") {
        return None;
    }
    let ns = segs.next().filter(|s| !s.is_empty())?;
    let image = segs.next().filter(|s| !s.is_empty())?;
    Some((ns.to_string(), image.trim_end_matches(".git").to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verb {
    Require,
    Replace,
    Exclude,
    Retract,
    Other,
}

fn verb_for(word: &str) -> Option<Verb> {
    Some(match word {
        "require" => Verb::Require,
        "replace" => Verb::Replace,
        "exclude" => Verb::Exclude,
        "retract" => Verb::Retract,
        "module" | "go" | "toolchain" | "godebug" | "tool" | "ignore" => Verb::Other,
        _ => return None,
    })
}

struct Replacement {
    old_path: String,
    old_version: Option<String>,
    location: ExplicitLocation,
    line_no: usize,
}

pub fn parse_go_mod(text: &str) -> Manifest {
    let mut manifest = Manifest::empty(ManifestKind::GoMod);
    let mut replacements = Vec::new();
    let mut block: Option<Verb> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let (code, comment) = match raw_line.find("//") {
            Some(pos) => (&raw_line[..pos], Some(raw_line[pos + 2..].trim())),
            None => (raw_line, None),
        };
        let line = code.trim();
        if line.is_empty() {
            continue;
        }

        if let Some(verb) = block {
            if line == ")" {
                block = None;
            } else {
                directive(verb, line, comment, line_no, &mut manifest, &mut replacements);
            }
            continue;
        }

        let (word, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        let Some(verb) = verb_for(word) else {
            manifest.warn(line_no, format!("unknown directive: {line}"));
            continue;
        };

        if verb == Verb::Other {
            match word {
                "module" => {
                    manifest.properties.insert("module".into(), unquote(rest).to_string());
                }
                "go" => {
                    manifest.properties.insert("go".into(), rest.to_string());
                }
                _ => {}
            }
            continue;
        }

        if rest == "(" {
            block = Some(verb);
        } else if let Some(inner) = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            let inner = inner.trim();
            if !inner.is_empty() {
                directive(verb, inner, comment, line_no, &mut manifest, &mut replacements);
            }
        } else {
            directive(verb, rest, comment, line_no, &mut manifest, &mut replacements);
        }
    }

    if block.is_some() {
        manifest.parse_warnings.push("unterminated block at end of file".into());
    }

    for rep in replacements {
        let mut applied = false;
        for entry in manifest.entries.iter_mut().filter(|e| e.name == rep.old_path) {
            if rep.old_version.is_none() || rep.old_version == entry.pinned_revision {
                entry.explicit_location = Some(rep.location.clone());
                applied = true;
            }
        }
        if !applied {
            manifest.warn(rep.line_no, format!("replace for {} matches no require", rep.old_path));
        }
    }

    manifest
}

fn directive(
    verb: Verb,
    spec: &str,
    comment: Option<&str>,
    line_no: usize,
    manifest: &mut Manifest,
    replacements: &mut Vec<Replacement>,
) {
    match verb {
        Verb::Require => {
            let fields: Vec<&str> = spec.split_whitespace().collect();
            if fields.len() != 2 {
                manifest.warn(line_no, format!("malformed require: {spec}"));
                return;
            }
            let mut entry = DependencyEntry::new(unquote(fields[0]), Ecosystem::Gomod);
            entry.pinned_revision = Some(fields[1].to_string());
            entry.indirect = comment.is_some_and(|c| c.split(';').any(|p| p.trim() == "indirect"));
            manifest.entries.push(entry);
        }
        Verb::Replace => {
            let Some((old, new)) = spec.split_once("=>") else {
                manifest.warn(line_no, format!("malformed replace: {spec}"));
                return;
            };
            let old: Vec<&str> = old.split_whitespace().collect();
            let new: Vec<&str> = new.split_whitespace().collect();
            if old.is_empty() || old.len() > 2 || new.is_empty() || new.len() > 2 {
                manifest.warn(line_no, format!("malformed replace: {spec}"));
                return;
            }
            let target = unquote(new[0]);
            let location = if is_local_path(target) {
                ExplicitLocation::new(LocationKind::LocalPath, target)
            } else {
                let value = match new.get(1) {
                    Some(v) => format!("{target}@{v}"),
                    None => target.to_string(),
                };
                ExplicitLocation::new(LocationKind::ModulePath, value)
            };
            replacements.push(Replacement {
                old_path: unquote(old[0]).to_string(),
                old_version: old.get(1).map(|v| v.to_string()),
                location,
                line_no,
            });
        }
        Verb::Exclude | Verb::Retract | Verb::Other => {}
    }
}

fn is_local_path(p: &str) -> bool {
    p.starts_with("./") || p.starts_with("../") || p.starts_with('/') || p == "." || p == ".."
}

fn unquote(s: &str) -> &str {
    let b = s.as_bytes();
    if b.len() >= 2 && (b[0] == b'"' || b[0] == b'`') && b[b.len() - 1] == b[0] {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING_3: &str = include_str!("../../tests/fixtures/manifests/go.mod.listing3");

    #[test]
    fn listing_three() {
        let m = parse_go_mod(LISTING_3);
        assert_eq!(m.entries.len(), 2);
        let hosts: Vec<&str> = m.entries.iter().map(|e| go_host(&e.name)).collect();
        assert_eq!(hosts, ["example.com", "github.com"]);
        assert_eq!(
            github_coordinates(&m.entries[1].name),
            Some(("myuser".to_string(), "mydependency".to_string()))
        );
        assert!(m.parse_warnings.is_empty(), "{:?}", m.parse_warnings);
    }

    #[test]
    fn inline_block_form() {
        let m = parse_go_mod("require ( a.example/x v1.0.0 )");
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.entries[0].name, "a.example/x");
        assert_eq!(m.entries[0].pinned_revision.as_deref(), Some("v1.0.0"));
    }

    #[test]
    fn empty_input() {
        let m = parse_go_mod("");
        assert!(m.entries.is_empty() && m.parse_warnings.is_empty());
    }

    #[test]
    fn replace_overrides_location() {
        let text = "module m\n\nrequire (\n\tgithub.com/old/lib v1.0.0 // indirect\n\tgolang.org/x/text v0.3.0\n)\n\nreplace github.com/old/lib => github.com/new/lib v1.1.0\nreplace golang.org/x/text v0.3.0 => ./vendor/text\nexclude golang.org/x/net v1.2.3\nreplace nothing/here => other/place v1\n";
        let m = parse_go_mod(text);
        let old = m.entry("github.com/old/lib").unwrap();
        assert!(old.indirect);
        assert_eq!(
            old.explicit_location,
            Some(ExplicitLocation::new(LocationKind::ModulePath, "github.com/new/lib@v1.1.0"))
        );
        let text_mod = m.entry("golang.org/x/text").unwrap();
        assert_eq!(text_mod.explicit_location.as_ref().unwrap().kind, LocationKind::LocalPath);
        assert_eq!(m.parse_warnings.len(), 1, "{:?}", m.parse_warnings);
        assert_eq!(m.properties["module"], "m");
    }

    #[test]
    fn malformed_lines_warn() {
        let m = parse_go_mod("require onlypath\nbogus directive\nrequire (\n");
        assert!(m.entries.is_empty());
        assert_eq!(m.parse_warnings.len(), 3);
    }
}
