//! Versioned artifact registry: module descriptors, datasets, programs and
//! model catalogues, stored content-addressed in a local directory or read
//! from an HTTP server with the same layout.

mod http;
mod index;
mod local;

pub use http::HttpRegistry;
pub use index::{ArtifactKind, PublishMeta, RegistryEntry, RegistryIndex};
pub use local::LocalRegistry;

use thiserror::Error;

use crate::hash::sha256_hex;

/// Environment variable naming the default remote registry.
pub const REGISTRY_URL_ENV: &str = "READY_REGISTRY_URL";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("{identifier} {version} is already published")]
    Duplicate { identifier: String, version: String },
    #[error("confidential data cannot be shared")]
    Confidential,
    #[error("datasets must declare confidential = false before they can be shared")]
    ConfidentialityUndeclared,
    #[error("no entry {identifier} {version}")]
    NotFound { identifier: String, version: String },
    #[error("integrity check failed for {identifier} {version}: expected {expected}, stored bytes hash to {actual}")]
    Integrity { identifier: String, version: String, expected: String, actual: String },
    #[error("invalid entry: {0}")]
    Invalid(String),
    #[error("registry is locked by another publisher ({0})")]
    Locked(String),
    #[error("registry index: {0}")]
    Format(String),
    #[error("registry i/o: {0}")]
    Io(String),
    #[error("http: {0}")]
    Http(String),
}

/// Read access shared by all backends.
pub trait Registry {
    fn index(&self) -> Result<RegistryIndex, RegistryError>;

    /// Raw stored bytes, unverified.
    fn read_blob(&self, entry: &RegistryEntry) -> Result<Vec<u8>, RegistryError>;

    fn search(&self, query: &str, kind: Option<ArtifactKind>, include_deprecated: bool) -> Result<Vec<RegistryEntry>, RegistryError> {
        Ok(self.index()?.search(query, kind, include_deprecated))
    }

    /// Bytes of `identifier` at an exact version or `"latest"`, verified
    /// against the recorded hash.
    fn fetch(&self, identifier: &str, version: &str) -> Result<(Vec<u8>, RegistryEntry), RegistryError> {
        let entry = self.index()?.resolve(identifier, version)?.clone();
        let bytes = self.read_blob(&entry)?;
        let actual = sha256_hex(&bytes);
        if actual != entry.content_hash {
            return Err(RegistryError::Integrity {
                identifier: entry.identifier.clone(),
                version: entry.version.to_string(),
                expected: entry.content_hash.clone(),
                actual,
            });
        }
        Ok((bytes, entry))
    }
}

/// `blobs/<first two hex digits>/<hash>`
pub fn blob_location(hash: &str) -> String {
    format!("blobs/{}/{hash}", &hash[..2])
}
