use std::time::Duration;

use super::index::{RegistryEntry, RegistryIndex};
use super::{Registry, RegistryError, REGISTRY_URL_ENV};

/// Read-only registry served over HTTP with the local layout:
/// `GET <base>/index.json`, `GET <base>/<location>`.
#[derive(Debug, Clone)]
pub struct HttpRegistry {
    base: String,
    agent: ureq::Agent,
}

impl HttpRegistry {
    pub fn new(base_url: &str) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(30))).build().new_agent();
        Self { base: base_url.trim_end_matches('/').to_string(), agent }
    }

    /// The registry named by `READY_REGISTRY_URL`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var(REGISTRY_URL_ENV).ok().filter(|s| !s.is_empty()).map(|u| Self::new(&u))
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn get(&self, path: &str) -> Result<Vec<u8>, RegistryError> {
        let url = format!("{}/{}", self.base, path);
        let mut resp = self.agent.get(&url).call().map_err(|e| RegistryError::Http(format!("GET {url}: {e}")))?;
        resp.body_mut()
            .with_config()
            .limit(1 << 30)
            .read_to_vec()
            .map_err(|e| RegistryError::Http(format!("GET {url}: {e}")))
    }
}

impl Registry for HttpRegistry {
    fn index(&self) -> Result<RegistryIndex, RegistryError> {
        let bytes = self.get("index.json")?;
        RegistryIndex::from_json(&String::from_utf8_lossy(&bytes))
    }

    fn read_blob(&self, entry: &RegistryEntry) -> Result<Vec<u8>, RegistryError> {
        self.get(&entry.location)
    }
}
