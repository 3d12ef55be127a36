use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{ProbeOutcome, ProbeRequest};

pub const DEFAULT_TTL_DAYS: i64 = 7;

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: ProbeRequest,
    stored_at: DateTime<Utc>,
    outcome: ProbeOutcome,
}

struct Inner {
    entries: HashMap<ProbeRequest, (DateTime<Utc>, ProbeOutcome)>,
    file: Option<File>,
}

/// Probe results keyed by request, valid for `ttl` after they were stored.
/// With a backing file, every `put` appends one JSON line and later lines
/// win on reload.
pub struct ProbeCache {
    ttl: Duration,
    inner: Mutex<Inner>,
}

impl ProbeCache {
    pub fn in_memory(ttl: Duration) -> Self {
        ProbeCache {
            ttl,
            inner: Mutex::new(Inner {
                entries: HashMap::new(),
                file: None,
            }),
        }
    }

    /// Opens (or creates) an append-only cache file. Unreadable lines are
    /// skipped with a log warning.
    pub fn open(path: &Path, ttl: Duration) -> std::io::Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(l) => {
                        entries.insert(l.key, (l.stored_at, l.outcome));
                    }
                    Err(e) => log::warn!("{}:{}: skipping cache line: {e}", path.display(), n + 1),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ProbeCache {
            ttl,
            inner: Mutex::new(Inner {
                entries,
                file: Some(file),
            }),
        })
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    pub fn get(&self, key: &ProbeRequest, now: DateTime<Utc>) -> Option<ProbeOutcome> {
        let inner = self.inner.lock();
        let (stored_at, outcome) = inner.entries.get(key)?;
        (now < *stored_at + self.ttl).then(|| outcome.clone())
    }

    pub fn put(&self, key: ProbeRequest, outcome: ProbeOutcome, now: DateTime<Utc>) {
        let mut inner = self.inner.lock();
        if let Some(file) = inner.file.as_mut() {
            let line = CacheLine {
                key: key.clone(),
                stored_at: now,
                outcome: outcome.clone(),
            };
            let written = serde_json::to_string(&line)
                .map_err(std::io::Error::other)
                .and_then(|s| writeln!(file, "{s}"));
            if let Err(e) = written {
                log::warn!("cache write failed: {e}");
            }
        }
        inner.entries.insert(key, (now, outcome));
    }

    pub fn len(&self) -> usize {
        self.inner.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
