use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::session::SessionRecord;

/// One JSON document per session in a directory.
#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    /// Writes through a temporary file so a crash never leaves a torn document.
    pub fn save(&self, record: &SessionRecord) -> io::Result<()> {
        let text = serde_json::to_string_pretty(record).map_err(io::Error::other)?;
        let tmp = self.dir.join(format!(".{}.json.tmp", record.id));
        fs::write(&tmp, text)?;
        fs::rename(tmp, self.path(&record.id))
    }

    /// Loads every session document, skipping files that do not parse.
    pub fn load_all(&self) -> io::Result<Vec<SessionRecord>> {
        let mut paths: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|e| e == "json")
                    && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.'))
            })
            .collect();
        paths.sort();
        let mut records = Vec::new();
        for path in paths {
            let parsed = fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<SessionRecord>(&t).map_err(|e| e.to_string()));
            match parsed {
                Ok(r) => records.push(r),
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(records)
    }
}
