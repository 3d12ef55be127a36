//! CocoaPods-style version strings and requirements.
//!
//! Versions are a dot-separated numeric core followed by an optional
//! free-form suffix (`1.2.0-beta.1`). Comparison pads the shorter core with
//! zeros, and a version with a suffix sorts below the bare numeric core.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VersionError {
    #[error("malformed version {0:?}")]
    MalformedVersion(String),
    #[error("malformed requirement {text:?}: {reason}")]
    MalformedRequirement { text: String, reason: String },
}

#[derive(Debug, Clone)]
pub struct VersionString {
    raw: String,
    components: Vec<u64>,
    suffix: Option<String>,
}

impl VersionString {
    pub fn parse(text: &str) -> Result<Self, VersionError> {
        let raw = text.trim();
        let bad = || VersionError::MalformedVersion(text.to_string());
        if raw.is_empty() || raw.chars().any(char::is_whitespace) {
            return Err(bad());
        }

        let bytes = raw.as_bytes();
        let mut components = Vec::new();
        let mut pos = 0;
        loop {
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            // Only reachable for the first component: later ones are entered
            // only when a digit follows the dot.
            if pos == start {
                return Err(bad());
            }
            let value = raw[start..pos].parse::<u64>().map_err(|_| bad())?;
            components.push(value);
            if pos + 1 < bytes.len() && bytes[pos] == b'.' && bytes[pos + 1].is_ascii_digit() {
                pos += 1;
            } else {
                break;
            }
        }

        let suffix = (pos < raw.len()).then(|| raw[pos..].to_string());
        Ok(Self {
            raw: raw.to_string(),
            components,
            suffix,
        })
    }

    /// Builds a version from numeric components only.
    pub fn from_components(components: &[u64]) -> Self {
        assert!(!components.is_empty(), "a version needs at least one component");
        let raw = components
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(".");
        Self {
            raw,
            components: components.to_vec(),
            suffix: None,
        }
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub fn components(&self) -> &[u64] {
        &self.components
    }

    pub fn suffix(&self) -> Option<&str> {
        self.suffix.as_deref()
    }

    pub fn is_prerelease(&self) -> bool {
        self.suffix.is_some()
    }

    /// Semantic comparison: zero-padded numeric core, then suffix
    /// (suffixed versions sort below the bare core). `1.0` and `1.0.0`
    /// compare equal here.
    pub fn cmp_semantic(&self, other: &Self) -> Ordering {
        let len = self.components.len().max(other.components.len());
        for i in 0..len {
            let a = self.components.get(i).copied().unwrap_or(0);
            let b = other.components.get(i).copied().unwrap_or(0);
            match a.cmp(&b) {
                Ordering::Equal => {}
                non_eq => return non_eq,
            }
        }
        match (&self.suffix, &other.suffix) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Greater,
            (Some(_), None) => Ordering::Less,
            (Some(a), Some(b)) => a.cmp(b),
        }
    }

    pub fn semantically_eq(&self, other: &Self) -> bool {
        self.cmp_semantic(other) == Ordering::Equal
    }

    /// The exclusive upper bound of `~> self`: drop the last component and
    /// bump the new last one (`2.27.3` -> `2.28`, `2.27` -> `3`).
    fn pessimistic_ceiling(&self) -> Self {
        let mut bound = self.components[..self.components.len() - 1].to_vec();
        if let Some(last) = bound.last_mut() {
            *last = last.saturating_add(1);
        }
        Self::from_components(&bound)
    }
}

impl Ord for VersionString {
    // Semantic order first; the component count breaks ties between
    // spellings such as `1.0` and `1.0.0` so the order stays total.
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_semantic(other)
            .then_with(|| self.components.len().cmp(&other.components.len()))
    }
}

impl PartialOrd for VersionString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for VersionString {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for VersionString {}

impl fmt::Display for VersionString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for VersionString {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for VersionString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for VersionString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Self::parse(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Exact,
    Gt,
    Gte,
    Lt,
    Lte,
    Pessimistic,
    Any,
}

impl Operator {
    fn symbol(self) -> &'static str {
        match self {
            Operator::Exact => "=",
            Operator::Gt => ">",
            Operator::Gte => ">=",
            Operator::Lt => "<",
            Operator::Lte => "<=",
            Operator::Pessimistic => "~>",
            Operator::Any => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub op: Operator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<VersionString>,
}

impl Requirement {
    pub fn any() -> Self {
        Self {
            op: Operator::Any,
            version: None,
        }
    }

    /// Builds a requirement, enforcing the operand invariants.
    pub fn new(op: Operator, version: Option<VersionString>) -> Result<Self, VersionError> {
        let text = match &version {
            Some(v) => format!("{} {}", op.symbol(), v),
            None => op.symbol().to_string(),
        };
        match (op, &version) {
            (Operator::Any, None) => {}
            (Operator::Any, Some(_)) => {
                return Err(VersionError::MalformedRequirement {
                    text,
                    reason: "`any` takes no version".into(),
                })
            }
            (_, None) => {
                return Err(VersionError::MalformedRequirement {
                    text,
                    reason: "operator needs a version".into(),
                })
            }
            (Operator::Pessimistic, Some(v)) if v.components().len() < 2 => {
                return Err(VersionError::MalformedRequirement {
                    text,
                    reason: "`~>` needs at least two version components".into(),
                })
            }
            _ => {}
        }
        Ok(Self { op, version })
    }

    pub fn exact(version: VersionString) -> Self {
        Self {
            op: Operator::Exact,
            version: Some(version),
        }
    }

    pub fn parse(text: &str) -> Result<Self, VersionError> {
        parse_requirement(text)
    }

    pub fn is_satisfied_by(&self, version: &VersionString) -> bool {
        satisfies(version, self)
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.version {
            None => f.write_str("any"),
            Some(v) => write!(f, "{} {}", self.op.symbol(), v),
        }
    }
}

/// Parses `~> 2.27`, `>= 1.0`, `1.4.2` (exact), or an empty string (any).
pub fn parse_requirement(text: &str) -> Result<Requirement, VersionError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Requirement::any());
    }

    // Longest operators first so `>=` is not read as `>`.
    const OPERATORS: [(&str, Operator); 6] = [
        ("~>", Operator::Pessimistic),
        (">=", Operator::Gte),
        ("<=", Operator::Lte),
        (">", Operator::Gt),
        ("<", Operator::Lt),
        ("=", Operator::Exact),
    ];
    let (op, rest) = OPERATORS
        .iter()
        .find_map(|(sym, op)| trimmed.strip_prefix(sym).map(|rest| (*op, rest)))
        .unwrap_or((Operator::Exact, trimmed));

    let operand = rest.trim();
    if operand.is_empty() {
        return Err(VersionError::MalformedRequirement {
            text: text.to_string(),
            reason: "missing version after operator".into(),
        });
    }
    let version = VersionString::parse(operand).map_err(|_| VersionError::MalformedRequirement {
        text: text.to_string(),
        reason: format!("{operand:?} is not a version"),
    })?;
    Requirement::new(op, Some(version)).map_err(|err| match err {
        VersionError::MalformedRequirement { reason, .. } => VersionError::MalformedRequirement {
            text: text.to_string(),
            reason,
        },
        other => other,
    })
}

pub fn satisfies(version: &VersionString, req: &Requirement) -> bool {
    let Some(bound) = &req.version else {
        return true;
    };
    let ord = version.cmp_semantic(bound);
    match req.op {
        Operator::Any => true,
        Operator::Exact => ord == Ordering::Equal,
        Operator::Gt => ord == Ordering::Greater,
        Operator::Gte => ord != Ordering::Less,
        Operator::Lt => ord == Ordering::Less,
        Operator::Lte => ord != Ordering::Greater,
        Operator::Pessimistic => {
            ord != Ordering::Less
                && version.cmp_semantic(&bound.pessimistic_ceiling()) == Ordering::Less
        }
    }
}

pub fn satisfies_all(version: &VersionString, reqs: &[Requirement]) -> bool {
    reqs.iter().all(|req| satisfies(version, req))
}

/// The greatest version satisfying every requirement.
pub fn best_match<'a, I>(versions: I, reqs: &[Requirement]) -> Option<VersionString>
where
    I: IntoIterator<Item = &'a VersionString>,
{
    versions
        .into_iter()
        .filter(|v| satisfies_all(v, reqs))
        .max()
        .cloned()
}
