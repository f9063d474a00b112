//! Staged output directory and run manifest.
//!
//! Files are written under a hidden staging directory inside `--out` and only
//! moved into place by [`Staging::commit`]. Dropping an uncommitted staging
//! area deletes it, so a failed run leaves no partial outputs behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cosine_audit::io::to_json_string;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::CliResult;

pub const SCHEMA_VERSION: &str = "1";
pub const MANIFEST_FILE: &str = "manifest.json";
const STAGING_DIR: &str = ".cosine-audit-staging";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: String,
    pub tool_version: String,
    pub command: String,
    /// SHA-256 of the effective configuration (config file plus flags).
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub config: Config,
    /// SHA-256 of every output file, keyed by path relative to the output dir.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn config_hash(config: &Config) -> CliResult<String> {
    let canonical = serde_json::to_string(config).map_err(cosine_audit::Error::from)?;
    Ok(sha256_hex(canonical.as_bytes()))
}

pub struct Staging {
    out: PathBuf,
    dir: PathBuf,
    committed: bool,
}

impl Staging {
    pub fn new(out: &Path) -> CliResult<Self> {
        fs::create_dir_all(out)?;
        let dir = out.join(STAGING_DIR);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(Self {
            out: out.to_path_buf(),
            dir,
            committed: false,
        })
    }

    /// Staging location for `rel`, with parent directories created.
    pub fn path(&self, rel: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(path)
    }

    pub fn write(&self, rel: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        fs::write(self.path(rel)?, contents)?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> CliResult<()> {
        self.write(rel, to_json_string(value)?)
    }

    /// Hashes every staged file, writes `manifest.json`, then moves it all
    /// into the output directory.
    pub fn commit(mut self, command: &str, config: &Config, seed: Option<u64>) -> CliResult<Manifest> {
        let mut rels = Vec::new();
        collect_files(&self.dir, &self.dir, &mut rels)?;
        rels.sort();
        let mut files = BTreeMap::new();
        for rel in &rels {
            files.insert(rel.clone(), sha256_hex(&fs::read(self.dir.join(rel))?));
        }
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: config_hash(config)?,
            seed,
            config: config.clone(),
            files,
        };
        self.write_json(MANIFEST_FILE, &manifest)?;
        rels.push(MANIFEST_FILE.into());
        for rel in &rels {
            let target = self.out.join(rel);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(self.dir.join(rel), target)?;
        }
        fs::remove_dir_all(&self.dir)?;
        self.committed = true;
        Ok(manifest)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> CliResult<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("inside staging dir");
            out.push(
                rel.components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect::<Vec<_>>()
                    .join("/"),
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_moves_files_and_records_hashes() {
        let tmp = tempfile::tempdir().unwrap();
        let staging = Staging::new(tmp.path()).unwrap();
        staging.write("a.txt", "alpha").unwrap();
        staging.write("sub/b.txt", "beta").unwrap();
        assert!(!tmp.path().join("a.txt").exists());
        let manifest = staging.commit("test", &Config::default(), Some(3)).unwrap();
        assert_eq!(fs::read_to_string(tmp.path().join("sub/b.txt")).unwrap(), "beta");
        assert!(tmp.path().join(MANIFEST_FILE).exists());
        assert!(!tmp.path().join(STAGING_DIR).exists());
        assert_eq!(manifest.files["a.txt"], sha256_hex(b"alpha"));
        assert_eq!(manifest.files.len(), 2);
        assert_eq!(manifest.seed, Some(3));
    }

    #[test]
    fn dropped_staging_leaves_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        {
            let staging = Staging::new(tmp.path()).unwrap();
            staging.write("a.txt", "alpha").unwrap();
        }
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = Config::default();
        let mut b = Config::default();
        b.sim.seed = Some(1);
        assert_eq!(config_hash(&a).unwrap(), config_hash(&a.clone()).unwrap());
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
    }
}
