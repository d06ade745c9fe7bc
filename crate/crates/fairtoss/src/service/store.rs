use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{to_canonical_json, write_atomic};

use super::SessionRecord;

/// Where sessions live between requests and across restarts.
#[derive(Debug, Clone)]
pub enum Store {
    Memory,
    /// One `<id>.json` file per session in this directory.
    Directory(PathBuf),
}

impl Store {
    pub fn directory(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        std::fs::create_dir_all(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Store::Directory(path))
    }

    pub fn load_all(&self) -> Result<HashMap<String, SessionRecord>> {
        let Store::Directory(dir) = self else {
            return Ok(HashMap::new());
        };
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().is_some_and(|ext| ext == "json") {
                let record: SessionRecord = crate::io::read_json(&path)?;
                sessions.insert(record.id.clone(), record);
            }
        }
        Ok(sessions)
    }

    pub fn save(&self, record: &SessionRecord) -> Result<()> {
        match self {
            Store::Memory => Ok(()),
            Store::Directory(dir) => write_atomic(session_path(dir, &record.id), to_canonical_json(record).as_bytes()),
        }
    }
}

fn session_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}
