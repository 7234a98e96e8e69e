//! Content-addressed result cache: one JSON file per config hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

use crate::report::Report;

pub const ENV_DIR: &str = "LELONG_CACHE_DIR";
pub const DEFAULT_DIR: &str = ".lelong-cache";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub core: String,
    pub cli: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    /// Seconds since the Unix epoch at store time.
    pub timestamp: u64,
    pub outputs: Report,
    pub provenance: Provenance,
    /// SHA-256 of the serialized `outputs`.
    pub checksum: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON of a run configuration.
pub fn config_hash(config: &serde_json::Value) -> String {
    let canon = serde_json::to_string(config).expect("serializable");
    sha256_hex(format!("{}\n{canon}", lelong_core::VERSION).as_bytes())
}

fn checksum(outputs: &Report) -> String {
    sha256_hex(serde_json::to_string(outputs).expect("serializable").as_bytes())
}

pub fn resolve_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(ENV_DIR) {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => PathBuf::from(DEFAULT_DIR),
    }
}

pub struct Cache {
    dir: PathBuf,
}

#[derive(Debug, PartialEq)]
pub enum Lookup {
    Hit(Report),
    Miss,
    /// Present but unreadable or failing its checksum.
    Corrupt(String),
}

impl Cache {
    pub fn new(dir: PathBuf) -> Self {
        Cache { dir }
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn lookup(&self, hash: &str) -> Lookup {
        let path = self.path(hash);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Lookup::Miss,
            Err(e) => return Lookup::Corrupt(format!("{}: {e}", path.display())),
        };
        let rec: ResultRecord = match serde_json::from_str(&text) {
            Ok(r) => r,
            Err(e) => return Lookup::Corrupt(format!("{}: {e}", path.display())),
        };
        if rec.config_hash != hash || checksum(&rec.outputs) != rec.checksum {
            return Lookup::Corrupt(format!("{}: checksum mismatch", path.display()));
        }
        Lookup::Hit(rec.outputs)
    }

    pub fn store(&self, hash: &str, outputs: &Report) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let rec = ResultRecord {
            config_hash: hash.to_string(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs: outputs.clone(),
            provenance: Provenance {
                core: lelong_core::VERSION.to_string(),
                cli: env!("CARGO_PKG_VERSION").to_string(),
            },
            checksum: checksum(outputs),
        };
        // write then rename so readers never see a partial file
        let tmp = self.dir.join(format!("{hash}.{}.tmp", std::process::id()));
        fs::write(&tmp, serde_json::to_string_pretty(&rec).expect("serializable"))?;
        fs::rename(tmp, self.path(hash))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Table;
    use serde_json::json;

    fn tmpdir(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("lelong-cache-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn store_lookup_and_corruption() {
        let dir = tmpdir("unit");
        let cache = Cache::new(dir.clone());
        let cfg = json!({"command": "estimate", "seed": 1});
        let h = config_hash(&cfg);
        assert_eq!(cache.lookup(&h), Lookup::Miss);
        let rep = Report::csv(json!({"nu": 0.5}), Table::new(&["nu"]), Some(1));
        cache.store(&h, &rep).unwrap();
        assert_eq!(cache.lookup(&h), Lookup::Hit(rep));
        let other = config_hash(&json!({"command": "estimate", "seed": 2}));
        assert_ne!(h, other);
        assert_eq!(cache.lookup(&other), Lookup::Miss);
        let p = dir.join(format!("{h}.json"));
        let text = fs::read_to_string(&p).unwrap().replace("0.5", "0.75");
        fs::write(&p, text).unwrap();
        assert!(matches!(cache.lookup(&h), Lookup::Corrupt(_)));
        let _ = fs::remove_dir_all(&dir);
    }
}
