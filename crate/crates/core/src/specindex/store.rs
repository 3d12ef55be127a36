//! On-disk index format.
//!
//! ```text
//! "CSIX" | version: u16 BE | body length: u64 BE | zlib body | sha256 (32 bytes)
//! ```
//!
//! The body is newline-separated canonical JSON: one header object followed
//! by one object per pod, in name order. The digest covers every byte before
//! it.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PodRecord, SpecIndex, SpecIndexError};

pub const MAGIC: &[u8; 4] = b"CSIX";
pub const FORMAT_VERSION: u16 = 1;

const PREFIX_LEN: usize = 4 + 2 + 8;
const DIGEST_LEN: usize = 32;

#[derive(Serialize, Deserialize)]
struct Header {
    built_at: DateTime<Utc>,
    source_tree_digest: String,
    skipped_podspecs: usize,
    pod_count: usize,
}

fn io_err(offset: usize, reason: impl Into<String>) -> SpecIndexError {
    SpecIndexError::Io {
        offset: offset as u64,
        reason: reason.into(),
    }
}

fn canonical_line<T: Serialize>(value: &T) -> String {
    // Value maps are ordered by key, which gives sorted-key output.
    serde_json::to_value(value)
        .and_then(|v| serde_json::to_string(&v))
        .expect("index records always serialize")
}

pub(crate) fn encode(index: &SpecIndex) -> Vec<u8> {
    let mut body = String::new();
    body.push_str(&canonical_line(&Header {
        built_at: index.built_at,
        source_tree_digest: index.source_tree_digest.clone(),
        skipped_podspecs: index.skipped_podspecs,
        pod_count: index.pods.len(),
    }));
    for pod in index.pods.values() {
        body.push('\n');
        body.push_str(&canonical_line(pod));
    }

    let mut encoder = ZlibEncoder::new(Vec::new(), Compression::default());
    encoder.write_all(body.as_bytes()).expect("writing to a Vec cannot fail");
    let compressed = encoder.finish().expect("writing to a Vec cannot fail");

    let mut out = Vec::with_capacity(PREFIX_LEN + compressed.len() + DIGEST_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_be_bytes());
    out.extend_from_slice(&(compressed.len() as u64).to_be_bytes());
    out.extend_from_slice(&compressed);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub(crate) fn decode(bytes: &[u8]) -> Result<SpecIndex, SpecIndexError> {
    if bytes.len() < 6 {
        return Err(io_err(bytes.len(), "truncated header"));
    }
    let version = u16::from_be_bytes([bytes[4], bytes[5]]);
    if &bytes[..4] != MAGIC || version != FORMAT_VERSION {
        return Err(SpecIndexError::FormatVersionMismatch {
            magic: String::from_utf8_lossy(&bytes[..4]).into_owned(),
            version,
        });
    }
    if bytes.len() < PREFIX_LEN {
        return Err(io_err(bytes.len(), "truncated header"));
    }
    let body_len = u64::from_be_bytes(bytes[6..14].try_into().unwrap());
    let body_end = usize::try_from(body_len)
        .ok()
        .and_then(|n| n.checked_add(PREFIX_LEN))
        .filter(|end| end.checked_add(DIGEST_LEN).is_some_and(|total| total <= bytes.len()))
        .ok_or_else(|| io_err(bytes.len(), format!("truncated: body claims {body_len} bytes")))?;
    if body_end + DIGEST_LEN != bytes.len() {
        return Err(io_err(body_end + DIGEST_LEN, "trailing bytes after digest"));
    }
    if Sha256::digest(&bytes[..body_end])[..] != bytes[body_end..] {
        return Err(io_err(body_end, "digest mismatch"));
    }

    let mut body = String::new();
    ZlibDecoder::new(&bytes[PREFIX_LEN..body_end])
        .read_to_string(&mut body)
        .map_err(|e| io_err(PREFIX_LEN, format!("corrupt body: {e}")))?;
    let mut lines = body.split('\n');
    let header: Header = lines
        .next()
        .and_then(|l| serde_json::from_str(l).ok())
        .ok_or_else(|| io_err(PREFIX_LEN, "missing or bad header record"))?;
    let mut pods = Vec::with_capacity(header.pod_count);
    for (i, line) in lines.enumerate() {
        let pod: PodRecord = serde_json::from_str(line)
            .map_err(|e| io_err(PREFIX_LEN, format!("bad pod record {i}: {e}")))?;
        pods.push(pod);
    }
    if pods.len() != header.pod_count {
        return Err(io_err(
            PREFIX_LEN,
            format!("expected {} pods, found {}", header.pod_count, pods.len()),
        ));
    }

    let mut index = SpecIndex::from_records(pods, header.built_at, header.source_tree_digest);
    index.skipped_podspecs = header.skipped_podspecs;
    Ok(index)
}

/// Writes the index atomically (temp file in the same directory, then rename).
pub fn save_index(index: &SpecIndex, path: &Path) -> Result<(), SpecIndexError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(0, e.to_string()))?;
    tmp.write_all(&encode(index)).map_err(|e| io_err(0, e.to_string()))?;
    tmp.persist(path).map_err(|e| io_err(0, e.to_string()))?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<SpecIndex, SpecIndexError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(0, format!("{}: {e}", path.display())))?;
    decode(&bytes)
}
