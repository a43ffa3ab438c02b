//! The run manifest written next to every subcommand's outputs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliResult;

/// Identity of one CLI run. Two runs with equal manifests must produce
/// byte-identical output files, so neither this record nor anything
/// downstream of it may depend on wall-clock time or process state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Config path exactly as given on the command line, if any.
    pub config: Option<String>,
    pub seed: u64,
    pub out_dir: String,
    /// Build identity, `sage-v<version>`.
    pub version: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: Option<&Path>, seed: u64, out_dir: &Path) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config: config.map(|p| p.display().to_string()),
            seed,
            out_dir: out_dir.display().to_string(),
            version: format!("sage-v{}", env!("CARGO_PKG_VERSION")),
        }
    }

    /// Writes `manifest.json` into the output directory, creating the
    /// directory if needed.
    pub fn write(&self) -> CliResult<()> {
        let dir = Path::new(&self.out_dir);
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self)?;
        fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_and_carries_version() {
        let m = RunManifest::new("train", Some(Path::new("cfg.txt")), 7, Path::new("out"));
        assert!(m.version.starts_with("sage-v"));
        let text = serde_json::to_string(&m).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn write_is_reproducible() {
        let dir = std::env::temp_dir().join(format!("sage-manifest-{}", std::process::id()));
        let m = RunManifest::new("rank", None, 1, &dir);
        m.write().unwrap();
        let a = fs::read(dir.join("manifest.json")).unwrap();
        m.write().unwrap();
        let b = fs::read(dir.join("manifest.json")).unwrap();
        assert_eq!(a, b);
        fs::remove_dir_all(&dir).unwrap();
    }
}
