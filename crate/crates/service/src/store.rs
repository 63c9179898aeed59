//! One JSON snapshot file per session, written atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use patternwise_core::session::{Session, SESSION_SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("invalid session id `{0}`")]
    InvalidId(String),
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("corrupted session snapshot {}: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error(
        "session snapshot {} has schema version {found}, this build reads version {expected}; migrate it first",
        path.display()
    )]
    MigrationRequired {
        path: PathBuf,
        found: u64,
        expected: u32,
    },
    #[error("session store I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Session ids are generated as UUIDs; anything outside `[A-Za-z0-9-]` is
/// rejected so an id can never name a path outside the store.
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| StoreError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(SessionStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_for(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !is_valid_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.root.join(format!("{id}.json")))
    }

    /// Writes the snapshot to a temporary file in the store and renames it
    /// over the previous one.
    pub fn save(&self, session: &Session) -> Result<(), StoreError> {
        let path = self.path_for(&session.id)?;
        let io = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let json = serde_json::to_vec_pretty(session).expect("sessions always serialize");
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root).map_err(io)?;
        tmp.write_all(&json).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        let path = self.path_for(id)?;
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(id.to_string()))
            }
            Err(source) => return Err(StoreError::Io { path, source }),
        };
        let corrupt = |message: String| StoreError::Corrupt {
            path: path.clone(),
            message,
        };
        let value: serde_json::Value =
            serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| corrupt("missing schema_version".to_string()))?;
        if version != u64::from(SESSION_SCHEMA_VERSION) {
            return Err(StoreError::MigrationRequired {
                path: path.clone(),
                found: version,
                expected: SESSION_SCHEMA_VERSION,
            });
        }
        let session: Session = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
        if session.id != id {
            return Err(corrupt(format!("file holds session `{}`", session.id)));
        }
        Ok(session)
    }

    /// Ids of every stored session, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let io = |source| StoreError::Io {
            path: self.root.clone(),
            source,
        };
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().is_some_and(|e| e == "json") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    if is_valid_id(stem) {
                        ids.push(stem.to_string());
                    }
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use patternwise_core::dsl::parse_kb;
    use patternwise_core::KbCatalog;

    fn session() -> Session {
        let mut cat = KbCatalog::new();
        cat.insert(
            parse_kb("control t\nproperty a context\n  values x, y\nproperty c pattern\n  values lo, hi\npattern p\n  c = lo\n")
                .unwrap(),
        )
        .unwrap();
        let mut s = Session::start(&cat, "req", "t").unwrap();
        s.answer(&cat, "a", "x").unwrap();
        s
    }

    #[test]
    fn save_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let s = session();
        store.save(&s).unwrap();
        assert_eq!(store.load(&s.id).unwrap(), s);
        assert_eq!(store.list().unwrap(), vec![s.id.clone()]);
    }

    #[test]
    fn unknown_and_invalid_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        assert!(matches!(store.load("abc"), Err(StoreError::NotFound(_))));
        assert!(matches!(
            store.load("../etc/passwd"),
            Err(StoreError::InvalidId(_))
        ));
        assert!(matches!(store.load(""), Err(StoreError::InvalidId(_))));
    }

    #[test]
    fn corrupted_file_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        fs::write(dir.path().join("bad.json"), "{not json").unwrap();
        let err = store.load("bad").unwrap_err();
        assert!(matches!(err, StoreError::Corrupt { .. }));
        assert!(err.to_string().contains("bad.json"), "{err}");
    }

    #[test]
    fn schema_mismatch_requires_migration() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let mut value = serde_json::to_value(session()).unwrap();
        value["schema_version"] = 99.into();
        value["id"] = "old".into();
        fs::write(dir.path().join("old.json"), value.to_string()).unwrap();
        let err = store.load("old").unwrap_err();
        assert!(
            matches!(err, StoreError::MigrationRequired { found: 99, .. }),
            "{err}"
        );
        assert!(err.to_string().contains("migrate"));
    }

    #[test]
    fn concurrent_saves_of_distinct_sessions() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let sessions: Vec<Session> = (0..8).map(|_| session()).collect();
        std::thread::scope(|scope| {
            for s in &sessions {
                let store = store.clone();
                scope.spawn(move || {
                    for _ in 0..10 {
                        store.save(s).unwrap();
                    }
                });
            }
        });
        for s in &sessions {
            assert_eq!(&store.load(&s.id).unwrap(), s);
        }
    }
}
