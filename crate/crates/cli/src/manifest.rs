use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Versions {
    pub omap: &'static str,
    pub rng: &'static str,
}

/// Provenance record written next to every primary output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub config_path: PathBuf,
    pub config_sha256: String,
    pub seed: u64,
    pub replicates: usize,
    pub threads: Option<usize>,
    pub versions: Versions,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<PathBuf>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(subcommand: &'static str, config_path: &Path, config_bytes: &[u8], seed: u64, replicates: usize) -> Self {
        Self {
            subcommand,
            config_path: config_path.to_path_buf(),
            config_sha256: sha256_hex(config_bytes),
            seed,
            replicates,
            threads: None,
            versions: Versions {
                omap: env!("CARGO_PKG_VERSION"),
                rng: omap::rng::GENERATOR,
            },
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }
}
