//! Content-addressed on-disk response cache: one file per key, payload is the
//! canonical serialized response. Safe under concurrent writers because
//! values are deterministic per key (last writer wins on identical bytes).

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::ProviderError;

/// Bumping this invalidates every cache entry.
pub const CACHE_VERSION: u32 = 1;

/// Stable hash over (version, endpoint kind, model, request payload).
/// Equal payloads yield equal keys; serde_json maps serialize with sorted
/// keys, so the derivation is canonical.
pub fn cache_key(kind: &str, model_id: &str, payload: &serde_json::Value) -> String {
    let envelope = serde_json::json!({
        "v": CACHE_VERSION,
        "kind": kind,
        "model": model_id,
        "payload": payload,
    });
    let bytes = serde_json::to_vec(&envelope).expect("cache envelope serializes");
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<ResponseCache, ProviderError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)
            .map_err(|e| ProviderError::Cache(format!("create {}: {e}", dir.display())))?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// A corrupt or missing entry reads as a miss.
    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let bytes = std::fs::read(self.path_for(key)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn put<T: Serialize>(&self, key: &str, value: &T) -> Result<(), ProviderError> {
        let bytes = serde_json::to_vec(value)
            .map_err(|e| ProviderError::Cache(format!("serialize: {e}")))?;
        let target = self.path_for(key);
        let tmp = self.dir.join(format!(".{key}.tmp.{}", std::process::id()));
        std::fs::write(&tmp, &bytes)
            .map_err(|e| ProviderError::Cache(format!("write {}: {e}", tmp.display())))?;
        std::fs::rename(&tmp, &target)
            .map_err(|e| ProviderError::Cache(format!("rename {}: {e}", target.display())))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_payloads_give_equal_keys() {
        let a = serde_json::json!({"text": "hello", "n": 1});
        let b = serde_json::json!({"n": 1, "text": "hello"});
        assert_eq!(cache_key("chat", "m", &a), cache_key("chat", "m", &b));
        assert_ne!(cache_key("chat", "m", &a), cache_key("embed", "m", &a));
        assert_ne!(cache_key("chat", "m", &a), cache_key("chat", "other", &a));
    }

    #[test]
    fn round_trips_values_and_treats_corruption_as_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        let key = cache_key("chat", "m", &serde_json::json!({"q": 1}));
        assert_eq!(cache.get::<Vec<String>>(&key), None);
        cache
            .put(&key, &vec!["a".to_string(), "b".to_string()])
            .unwrap();
        assert_eq!(
            cache.get::<Vec<String>>(&key),
            Some(vec!["a".to_string(), "b".to_string()])
        );
        std::fs::write(dir.path().join(format!("{key}.json")), b"{not json").unwrap();
        assert_eq!(cache.get::<Vec<String>>(&key), None);
    }
}
