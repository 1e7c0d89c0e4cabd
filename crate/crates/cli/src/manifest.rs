//! Run manifest written next to every set of outputs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_SCHEMA: &str = "# pcl-manifest v1";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Clone, Debug)]
pub struct RunManifest {
    pub subcommand: String,
    /// Resolved configuration, reloadable through `--config`.
    pub config: Vec<(String, String)>,
    /// Subcommand-specific arguments; recorded, skipped on reload.
    pub args: Vec<(String, String)>,
    pub artifact_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<PathBuf>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new(subcommand: &str, config: Vec<(String, String)>, args: Vec<(String, String)>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config,
            args,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }

    /// SHA-256 over subcommand, config and arguments; timestamps excluded.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("subcommand={}\n", self.subcommand));
        for (k, v) in &self.config {
            h.update(format!("config.{k}={v}\n"));
        }
        for (k, v) in &self.args {
            h.update(format!("arg.{k}={v}\n"));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn render(&self) -> String {
        let mut s = format!("{MANIFEST_SCHEMA}\n");
        s += &format!("subcommand={}\n", self.subcommand);
        s += &format!("artifact_version={}\n", self.artifact_version);
        s += &format!("config_hash={}\n", self.config_hash());
        s += &format!("started_unix={}\n", self.started_unix);
        s += &format!("finished_unix={}\n", self.finished_unix);
        for o in &self.outputs {
            s += &format!("output={}\n", o.display());
        }
        for (k, v) in &self.config {
            s += &format!("config.{k}={v}\n");
        }
        for (k, v) in &self.args {
            s += &format!("arg.{k}={v}\n");
        }
        s
    }

    /// Stamps the end time and writes `<dir>/manifest.txt`.
    pub fn finish(&mut self, dir: &Path) -> Result<PathBuf, CliError> {
        self.finished_unix = unix_now();
        std::fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        let mut f = std::fs::File::create(&path)?;
        f.write_all(self.render().as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_timestamps() {
        let mut a = RunManifest::new("clt", vec![("seed".into(), "0".into())], vec![]);
        let mut b = a.clone();
        a.started_unix = 1;
        b.started_unix = 2;
        assert_eq!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
        b.config[0].1 = "1".into();
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
