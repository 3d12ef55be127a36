//! Property list reading for `Info.plist` files.
//!
//! Both encodings found in app bundles are supported: XML and binary
//! (`bplist00`). Dates, UIDs, sets and null objects are rejected with
//! [`PlistError::UnsupportedObject`].

mod binary;
mod xml;

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlistError {
    #[error("malformed plist at byte {offset}: {reason}")]
    MalformedPlist { offset: usize, reason: String },
    #[error("unsupported plist object `{kind}` at byte {offset}")]
    UnsupportedObject { kind: String, offset: usize },
}

impl PlistError {
    pub(crate) fn malformed(offset: usize, reason: impl Into<String>) -> Self {
        PlistError::MalformedPlist {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn unsupported(kind: impl Into<String>, offset: usize) -> Self {
        PlistError::UnsupportedObject {
            kind: kind.into(),
            offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlistValue {
    String(String),
    Integer(i128),
    Real(f64),
    Boolean(bool),
    Data(Vec<u8>),
    Array(Vec<PlistValue>),
    Dictionary(BTreeMap<String, PlistValue>),
}

impl PlistValue {
    /// Scalar values rendered as strings. Reals and data are tagged because
    /// their text form is lossy or opaque; containers yield `None`.
    pub fn to_scalar_string(&self) -> Option<String> {
        match self {
            PlistValue::String(s) => Some(s.clone()),
            PlistValue::Integer(i) => Some(i.to_string()),
            PlistValue::Boolean(b) => Some(b.to_string()),
            PlistValue::Real(r) => Some(format!("<real:{r}>")),
            PlistValue::Data(d) => Some(format!("<data:{} bytes>", d.len())),
            PlistValue::Array(_) | PlistValue::Dictionary(_) => None,
        }
    }
}

const BINARY_MAGIC: &[u8] = b"bplist";

/// Decodes a whole property list, XML or binary.
pub fn parse_plist_value(bytes: &[u8]) -> Result<PlistValue, PlistError> {
    if bytes.starts_with(BINARY_MAGIC) {
        binary::parse(bytes)
    } else {
        xml::parse(bytes)
    }
}

/// Top-level dictionary entries with scalar values, stringified.
pub fn parse_plist(bytes: &[u8]) -> Result<BTreeMap<String, String>, PlistError> {
    match parse_plist_value(bytes)? {
        PlistValue::Dictionary(dict) => Ok(dict
            .into_iter()
            .filter_map(|(k, v)| v.to_scalar_string().map(|s| (k, s)))
            .collect()),
        _ => Err(PlistError::malformed(0, "top-level object is not a dictionary")),
    }
}
