//! File-per-document persistence under a data directory.
//!
//! ```text
//! <root>/graphs/<id>.json
//! <root>/sessions/<id>.json
//! ```
//!
//! Each file is canonical JSON `{"body": …, "id": …, "kind": …, "version": n}`.
//! Writes go to a hidden temporary file in the same directory which is synced
//! and then renamed over the target, so readers only ever see a complete old
//! or a complete new document.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use gloss_core::authoring::json::{from_value, to_value};
use gloss_core::canonical::to_canonical_string;
use gloss_core::session::Session;
use gloss_core::NarrativeGraph;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Graph,
    Session,
}

impl Kind {
    fn dir(self) -> &'static str {
        match self {
            Kind::Graph => "graphs",
            Kind::Session => "sessions",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Graph => "graph",
            Kind::Session => "session",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredDocument {
    pub kind: Kind,
    pub id: String,
    pub version: u64,
    pub body: Value,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{kind} `{id}` not found")]
    NotFound { kind: Kind, id: String },
    #[error("{kind} `{id}` is at version {current:?}, expected {expected}")]
    VersionConflict {
        kind: Kind,
        id: String,
        expected: u64,
        current: Option<u64>,
    },
    #[error("`{0}` is not a usable document id")]
    InvalidId(String),
    #[error("document body is invalid: {0}")]
    InvalidBody(String),
    #[error("{path}: unreadable document: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Called after the temporary file is written and before it is renamed.
/// Returning an error abandons the write, as a crash at that point would.
pub type FaultHook = Arc<dyn Fn(&Path) -> io::Result<()> + Send + Sync>;

type LockTable = HashMap<(Kind, String), Arc<Mutex<()>>>;

pub struct DocumentStore {
    root: PathBuf,
    locks: Mutex<LockTable>,
    fault: Mutex<Option<FaultHook>>,
    tmp_counter: AtomicU64,
}

impl fmt::Debug for DocumentStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DocumentStore").field("root", &self.root).finish_non_exhaustive()
    }
}

fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

impl DocumentStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for kind in [Kind::Graph, Kind::Session] {
            fs::create_dir_all(root.join(kind.dir()))?;
        }
        Ok(Self {
            root,
            locks: Mutex::new(HashMap::new()),
            fault: Mutex::new(None),
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn set_fault_hook(&self, hook: Option<FaultHook>) {
        *self.fault.lock().unwrap() = hook;
    }

    fn path(&self, kind: Kind, id: &str) -> PathBuf {
        self.root.join(kind.dir()).join(format!("{id}.json"))
    }

    fn lock_for(&self, kind: Kind, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap();
        locks.entry((kind, id.to_string())).or_default().clone()
    }

    fn read(&self, path: &Path) -> Result<Option<StoredDocument>, StoreError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        serde_json::from_str(&text).map(Some).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn get(&self, kind: Kind, id: &str) -> Result<StoredDocument, StoreError> {
        check_id(id)?;
        self.read(&self.path(kind, id))?.ok_or_else(|| StoreError::NotFound {
            kind,
            id: id.to_string(),
        })
    }

    /// Every stored document of `kind`, ordered by id. Leftover temporary
    /// files are ignored.
    pub fn list(&self, kind: Kind) -> Result<Vec<StoredDocument>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join(kind.dir()))? {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name.starts_with('.') || !name.ends_with(".json") {
                continue;
            }
            if let Some(doc) = self.read(&path)? {
                out.push(doc);
            }
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }

    /// Stores `body` and returns the new version.
    ///
    /// With `expected`, the write only happens if the stored version equals it.
    /// Sessions get `current + 1` (1 when new). Graphs carry their own version:
    /// the stored one is the larger of the body's and `current + 1`, and the
    /// body is rewritten to match.
    pub fn put(&self, kind: Kind, id: &str, mut body: Value, expected: Option<u64>) -> Result<u64, StoreError> {
        check_id(id)?;
        let lock = self.lock_for(kind, id);
        let _guard = lock.lock().unwrap();
        let path = self.path(kind, id);
        let current = self.read(&path)?.map(|d| d.version);
        if let Some(expected) = expected {
            if current != Some(expected) {
                return Err(StoreError::VersionConflict {
                    kind,
                    id: id.to_string(),
                    expected,
                    current,
                });
            }
        }
        let next = current.map_or(1, |c| c + 1);
        let version = match kind {
            Kind::Session => next,
            Kind::Graph => {
                let obj = body
                    .as_object_mut()
                    .ok_or_else(|| StoreError::InvalidBody("graph body is not an object".into()))?;
                let own = obj.get("version").and_then(Value::as_u64).unwrap_or(1);
                let v = if current.is_some() { own.max(next) } else { own.max(1) };
                obj.insert("version".into(), Value::from(v));
                v
            }
        };
        let doc = StoredDocument {
            kind,
            id: id.to_string(),
            version,
            body,
        };
        self.write_atomic(&path, &to_canonical_string(&doc).expect("documents serialize"))?;
        Ok(version)
    }

    pub fn delete(&self, kind: Kind, id: &str, expected: Option<u64>) -> Result<(), StoreError> {
        check_id(id)?;
        let lock = self.lock_for(kind, id);
        let _guard = lock.lock().unwrap();
        let path = self.path(kind, id);
        let current = self.read(&path)?.map(|d| d.version);
        match (current, expected) {
            (None, _) => Err(StoreError::NotFound {
                kind,
                id: id.to_string(),
            }),
            (Some(c), Some(e)) if c != e => Err(StoreError::VersionConflict {
                kind,
                id: id.to_string(),
                expected: e,
                current,
            }),
            _ => Ok(fs::remove_file(path)?),
        }
    }

    fn write_atomic(&self, target: &Path, text: &str) -> Result<(), StoreError> {
        let dir = target.parent().expect("documents live in a kind directory");
        let name = target.file_name().and_then(|n| n.to_str()).unwrap_or("doc");
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!(".{name}.{}.{n}.tmp", std::process::id()));
        let mut file = File::create(&tmp)?;
        file.write_all(text.as_bytes())?;
        file.sync_all()?;
        drop(file);
        let hook = self.fault.lock().unwrap().clone();
        if let Some(hook) = hook {
            hook(&tmp)?;
        }
        fs::rename(&tmp, target)?;
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
        Ok(())
    }

    pub fn get_graph(&self, id: &str) -> Result<NarrativeGraph, StoreError> {
        let doc = self.get(Kind::Graph, id)?;
        from_value(doc.body).map_err(|e| StoreError::Corrupt {
            path: self.path(Kind::Graph, id),
            message: e.to_string(),
        })
    }

    /// Stores a graph and returns it as stored (with its new version).
    pub fn put_graph(&self, graph: &NarrativeGraph, expected: Option<u64>) -> Result<NarrativeGraph, StoreError> {
        let version = self.put(Kind::Graph, graph.id.as_str(), to_value(graph), expected)?;
        Ok(NarrativeGraph {
            version,
            ..graph.clone()
        })
    }

    pub fn get_session(&self, id: &str) -> Result<(Session, u64), StoreError> {
        let doc = self.get(Kind::Session, id)?;
        let session = serde_json::from_value(doc.body).map_err(|e| StoreError::Corrupt {
            path: self.path(Kind::Session, id),
            message: e.to_string(),
        })?;
        Ok((session, doc.version))
    }

    pub fn put_session(&self, session: &Session, expected: Option<u64>) -> Result<u64, StoreError> {
        let body = serde_json::to_value(session).expect("sessions serialize");
        self.put(Kind::Session, session.id.as_str(), body, expected)
    }

    pub fn sessions(&self) -> Result<Vec<Session>, StoreError> {
        self.list(Kind::Session)?
            .into_iter()
            .map(|doc| {
                serde_json::from_value(doc.body).map_err(|e| StoreError::Corrupt {
                    path: self.path(Kind::Session, &doc.id),
                    message: e.to_string(),
                })
            })
            .collect()
    }
}
