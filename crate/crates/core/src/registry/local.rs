use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use super::index::{PublishMeta, RegistryEntry, RegistryIndex};
use super::{blob_location, Registry, RegistryError};
use crate::hash::sha256_hex;
use crate::modules::Version;

const INDEX_FILE: &str = "index.json";
const LOCK_FILE: &str = ".lock";

/// Registry in a local directory: `index.json` plus content-addressed
/// `blobs/`. Writers take an exclusive lock file.
#[derive(Debug, Clone)]
pub struct LocalRegistry {
    root: PathBuf,
    lock_timeout: Duration,
}

fn io(e: std::io::Error) -> RegistryError {
    RegistryError::Io(e.to_string())
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

impl LocalRegistry {
    /// Opens (creating if needed) a registry rooted at `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("blobs")).map_err(io)?;
        let reg = Self { root, lock_timeout: Duration::from_secs(10) };
        if !reg.root.join(INDEX_FILE).exists() {
            let _lock = reg.lock()?;
            if !reg.root.join(INDEX_FILE).exists() {
                reg.write_index(&RegistryIndex::default())?;
            }
        }
        Ok(reg)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self) -> Result<LockGuard, RegistryError> {
        let path = self.root.join(LOCK_FILE);
        let start = Instant::now();
        loop {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    let _ = writeln!(f, "{}", std::process::id());
                    return Ok(LockGuard(path));
                }
                Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                    if start.elapsed() > self.lock_timeout {
                        return Err(RegistryError::Locked(path.display().to_string()));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(io(e)),
            }
        }
    }

    fn write_index(&self, index: &RegistryIndex) -> Result<(), RegistryError> {
        let tmp = self.root.join("index.json.tmp");
        fs::write(&tmp, index.to_json()).map_err(io)?;
        fs::rename(&tmp, self.root.join(INDEX_FILE)).map_err(io)
    }

    /// Stores `bytes` and appends an entry.
    pub fn publish(&self, bytes: &[u8], meta: PublishMeta) -> Result<RegistryEntry, RegistryError> {
        meta.check()?;
        let _lock = self.lock()?;
        let mut index = self.index()?;
        if index.get(&meta.identifier, meta.version).is_some() {
            return Err(RegistryError::Duplicate { identifier: meta.identifier, version: meta.version.to_string() });
        }
        let hash = sha256_hex(bytes);
        let location = blob_location(&hash);
        let path = self.root.join(&location);
        if !path.exists() {
            fs::create_dir_all(path.parent().expect("blob dir")).map_err(io)?;
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, bytes).map_err(io)?;
            fs::rename(&tmp, &path).map_err(io)?;
        }
        let entry = RegistryEntry {
            identifier: meta.identifier,
            kind: meta.kind,
            version: meta.version,
            keywords: meta.keywords,
            description: meta.description,
            content_hash: hash,
            location,
            deprecated: false,
            citation: meta.citation,
            confidential: meta.confidential,
        };
        index.entries.push(entry.clone());
        index.index_version += 1;
        self.write_index(&index)?;
        Ok(entry)
    }

    /// Marks an entry deprecated. Entries are never removed.
    pub fn deprecate(&self, identifier: &str, version: Version) -> Result<RegistryEntry, RegistryError> {
        let _lock = self.lock()?;
        let mut index = self.index()?;
        let entry = index
            .entries
            .iter_mut()
            .find(|e| e.identifier == identifier && e.version == version)
            .ok_or_else(|| RegistryError::NotFound { identifier: identifier.into(), version: version.to_string() })?;
        entry.deprecated = true;
        let out = entry.clone();
        index.index_version += 1;
        self.write_index(&index)?;
        Ok(out)
    }
}

impl Registry for LocalRegistry {
    fn index(&self) -> Result<RegistryIndex, RegistryError> {
        let text = fs::read_to_string(self.root.join(INDEX_FILE)).map_err(io)?;
        RegistryIndex::from_json(&text)
    }

    fn read_blob(&self, entry: &RegistryEntry) -> Result<Vec<u8>, RegistryError> {
        if entry.location.split('/').any(|p| p == "..") || Path::new(&entry.location).is_absolute() {
            return Err(RegistryError::Invalid(format!("location '{}' escapes the registry", entry.location)));
        }
        fs::read(self.root.join(&entry.location)).map_err(io)
    }
}
