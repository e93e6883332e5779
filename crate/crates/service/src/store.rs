//! On-disk state under the data root: one directory of CSVs per database and
//! one append-only JSONL file per session.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{Read, Write};
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;
use vizagent_core::catalog::{load_database, CatalogError, DatabaseCatalog};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("database {0} not found")]
    DatabaseNotFound(String),
    #[error("database {0} already exists")]
    DatabaseExists(String),
    #[error("invalid database id {0:?}")]
    BadDatabaseId(String),
    #[error("rejected archive entry {0:?}")]
    UnsafeEntry(String),
    #[error("bad archive: {0}")]
    Archive(String),
    #[error("session {0} not found")]
    SessionNotFound(String),
    #[error("corrupt session file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Names usable as a single path component.
pub fn is_safe_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Loaded catalogs, shared read-only once loaded.
pub struct Databases {
    root: PathBuf,
    cache: RwLock<HashMap<String, Arc<DatabaseCatalog>>>,
}

impl Databases {
    pub fn new(root: PathBuf) -> Self {
        Databases {
            root,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        if !self.root.is_dir() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io(&self.root))? {
            let entry = entry.map_err(io(&self.root))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if entry.path().is_dir() && is_safe_id(&name) && !name.starts_with('.') {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn get(&self, db_id: &str) -> Result<Arc<DatabaseCatalog>, StoreError> {
        if let Some(c) = self.cache.read().unwrap().get(db_id) {
            return Ok(c.clone());
        }
        let dir = self.root.join(db_id);
        if !is_safe_id(db_id) || !dir.is_dir() {
            return Err(StoreError::DatabaseNotFound(db_id.to_string()));
        }
        let cat = Arc::new(load_database(&dir)?);
        self.cache
            .write()
            .unwrap()
            .insert(db_id.to_string(), cat.clone());
        Ok(cat)
    }

    /// Unpacks a zip of CSV files into a new database directory. Entries may
    /// sit at the archive root or under one top-level folder; anything else,
    /// and any entry that would escape the directory, is rejected.
    pub fn install_zip(
        &self,
        db_id: &str,
        bytes: &[u8],
    ) -> Result<Arc<DatabaseCatalog>, StoreError> {
        if !is_safe_id(db_id) || db_id.starts_with('.') {
            return Err(StoreError::BadDatabaseId(db_id.to_string()));
        }
        let target = self.root.join(db_id);
        if target.exists() {
            return Err(StoreError::DatabaseExists(db_id.to_string()));
        }
        let files = read_archive(bytes)?;
        if files.is_empty() {
            return Err(StoreError::Archive("no CSV files".into()));
        }
        fs::create_dir_all(&self.root).map_err(io(&self.root))?;
        // unpack beside the target, then rename, so a half-written database
        // is never visible
        let staging = self
            .root
            .join(format!(".upload-{}", uuid::Uuid::new_v4().simple()));
        let result = (|| {
            fs::create_dir(&staging).map_err(io(&staging))?;
            for (name, data) in &files {
                let path = staging.join(name);
                fs::write(&path, data).map_err(io(&path))?;
            }
            load_database(&staging)?;
            fs::rename(&staging, &target).map_err(io(&target))
        })();
        if result.is_err() {
            let _ = fs::remove_dir_all(&staging);
        }
        result?;
        self.get(db_id)
    }
}

fn read_archive(bytes: &[u8]) -> Result<Vec<(String, Vec<u8>)>, StoreError> {
    let mut zip = zip::ZipArchive::new(std::io::Cursor::new(bytes))
        .map_err(|e| StoreError::Archive(e.to_string()))?;
    let mut entries: Vec<(Vec<String>, Vec<u8>)> = Vec::new();
    for i in 0..zip.len() {
        let mut f = zip
            .by_index(i)
            .map_err(|e| StoreError::Archive(e.to_string()))?;
        let raw = f.name().to_string();
        let path = Path::new(&raw);
        let parts: Option<Vec<String>> = path
            .components()
            .map(|c| match c {
                Component::Normal(s) => s.to_str().map(str::to_string),
                _ => None,
            })
            .collect();
        let parts = match parts {
            Some(p) if !p.is_empty() && !raw.contains('\\') && p.len() <= 2 => p,
            _ => return Err(StoreError::UnsafeEntry(raw)),
        };
        if f.is_dir() {
            continue;
        }
        if f.is_symlink() {
            return Err(StoreError::UnsafeEntry(raw));
        }
        let mut data = Vec::new();
        f.read_to_end(&mut data)
            .map_err(|e| StoreError::Archive(e.to_string()))?;
        entries.push((parts, data));
    }
    let tops: std::collections::BTreeSet<&str> = entries
        .iter()
        .filter(|(p, _)| p.len() == 2)
        .map(|(p, _)| p[0].as_str())
        .collect();
    if tops.len() > 1 || (!tops.is_empty() && entries.iter().any(|(p, _)| p.len() == 1)) {
        return Err(StoreError::Archive("files must share one folder".into()));
    }
    let mut out = Vec::new();
    for (parts, data) in entries {
        let name = parts.last().unwrap().clone();
        let wanted = name.to_ascii_lowercase().ends_with(".csv") || name == "tables.order";
        if !wanted || name.starts_with('.') {
            continue;
        }
        out.push((name, data));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub db_id: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub query: String,
    /// The query response body: a success or a `failure` object.
    pub result: Json,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionRecord {
    #[serde(flatten)]
    pub header: SessionHeader,
    pub history: Vec<HistoryEntry>,
}

/// Session files: the header on the first line, one entry per line after.
pub struct SessionFiles {
    dir: PathBuf,
}

impl SessionFiles {
    pub fn new(dir: PathBuf) -> Self {
        SessionFiles { dir }
    }

    fn path(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !is_safe_id(id) || id.contains('.') {
            return Err(StoreError::SessionNotFound(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.jsonl")))
    }

    pub fn create(&self, header: &SessionHeader) -> Result<(), StoreError> {
        fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        let path = self.path(&header.session_id)?;
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(io(&path))?;
        let line = serde_json::to_string(header).expect("header serializes");
        writeln!(f, "{line}").map_err(io(&path))
    }

    pub fn append(&self, id: &str, entry: &HistoryEntry) -> Result<(), StoreError> {
        let path = self.path(id)?;
        if !path.is_file() {
            return Err(StoreError::SessionNotFound(id.to_string()));
        }
        let mut f = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(io(&path))?;
        let line = serde_json::to_string(entry).expect("entry serializes");
        // one write per line keeps entries whole
        f.write_all(format!("{line}\n").as_bytes())
            .map_err(io(&path))?;
        f.sync_data().map_err(io(&path))
    }

    pub fn load(&self, id: &str) -> Result<SessionRecord, StoreError> {
        let path = self.path(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::SessionNotFound(id.to_string()))
            }
            Err(e) => return Err(StoreError::Io { path, source: e }),
        };
        let corrupt = |message: String| StoreError::Corrupt {
            path: path.clone(),
            message,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: SessionHeader =
            serde_json::from_str(lines.next().ok_or_else(|| corrupt("empty".into()))?)
                .map_err(|e| corrupt(e.to_string()))?;
        let history = lines
            .map(|l| serde_json::from_str(l).map_err(|e| corrupt(e.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(SessionRecord { header, history })
    }

    pub fn ids(&self) -> Result<Vec<String>, StoreError> {
        if !self.dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io(&self.dir))? {
            let entry = entry.map_err(io(&self.dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".jsonl") {
                out.push(id.to_string());
            }
        }
        out.sort();
        Ok(out)
    }
}
