//! Content-addressed record/replay store: one JSON file per request under
//! `<dir>/<key[0..2]>/<key>.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{cache_key, CacheKey, Completion, Reasoner, ReasonerError, ReasonerRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    /// Serve hits, forward misses to the inner reasoner and persist them.
    Record,
    /// Serve hits only; a miss is an error.
    Replay,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    key: CacheKey,
    request: ReasonerRequest,
    responses: Vec<String>,
    latency_ms: u64,
}

pub struct CachedReasoner {
    dir: PathBuf,
    mode: CacheMode,
    inner: Option<Box<dyn Reasoner>>,
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl CachedReasoner {
    pub fn record(dir: impl Into<PathBuf>, inner: Box<dyn Reasoner>) -> Self {
        CachedReasoner {
            dir: dir.into(),
            mode: CacheMode::Record,
            inner: Some(inner),
        }
    }

    pub fn replay(dir: impl Into<PathBuf>) -> Self {
        CachedReasoner {
            dir: dir.into(),
            mode: CacheMode::Replay,
            inner: None,
        }
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir
            .join(&key.as_str()[..2])
            .join(format!("{key}.json"))
    }

    fn io_err(path: &Path, e: impl ToString) -> ReasonerError {
        ReasonerError::CacheIo {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    fn lookup(
        &self,
        key: &CacheKey,
        req: &ReasonerRequest,
    ) -> Result<Option<Entry>, ReasonerError> {
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Self::io_err(&path, e)),
        };
        let entry: Entry = serde_json::from_str(&text).map_err(|e| Self::io_err(&path, e))?;
        if entry.request.canonical() != req.canonical() {
            return Err(ReasonerError::CacheCollision { key: key.clone() });
        }
        Ok(Some(entry))
    }

    /// Writes to a temporary sibling and renames it into place.
    fn persist(&self, entry: &Entry) -> Result<(), ReasonerError> {
        let path = self.path_for(&entry.key);
        let parent = path.parent().expect("cache paths have a parent");
        fs::create_dir_all(parent).map_err(|e| Self::io_err(parent, e))?;
        let tmp = parent.join(format!(
            ".{}.{}.{}.tmp",
            entry.key,
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let body = serde_json::to_string_pretty(entry).map_err(|e| Self::io_err(&path, e))?;
        let mut file = fs::File::create(&tmp).map_err(|e| Self::io_err(&tmp, e))?;
        file.write_all(body.as_bytes())
            .and_then(|_| file.write_all(b"\n"))
            .and_then(|_| file.sync_all())
            .map_err(|e| Self::io_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Self::io_err(&path, e))
    }
}

impl Reasoner for CachedReasoner {
    fn complete(&self, req: &ReasonerRequest) -> Result<Completion, ReasonerError> {
        req.validate()?;
        let key = cache_key(req);
        if let Some(entry) = self.lookup(&key, req)? {
            return Ok(Completion {
                texts: entry.responses,
                latency_ms: entry.latency_ms,
                cached: true,
            });
        }
        let inner = match (self.mode, &self.inner) {
            (CacheMode::Record, Some(inner)) => inner,
            _ => return Err(ReasonerError::ReplayMiss { key }),
        };
        let started = Instant::now();
        let completion = inner.complete(req)?;
        let latency_ms = if completion.cached {
            completion.latency_ms
        } else {
            completion
                .latency_ms
                .max(started.elapsed().as_millis() as u64)
        };
        if completion.texts.len() != req.n as usize {
            return Err(ReasonerError::Malformed(format!(
                "asked for {} response(s), got {}",
                req.n,
                completion.texts.len()
            )));
        }
        let entry = Entry {
            key: key.clone(),
            request: req.clone(),
            responses: completion.texts,
            latency_ms,
        };
        // a concurrent writer may have stored the same key meanwhile
        if let Some(existing) = self.lookup(&key, req)? {
            return Ok(Completion {
                texts: existing.responses,
                latency_ms: existing.latency_ms,
                cached: false,
            });
        }
        self.persist(&entry)?;
        Ok(Completion {
            texts: entry.responses,
            latency_ms,
            cached: false,
        })
    }
}
