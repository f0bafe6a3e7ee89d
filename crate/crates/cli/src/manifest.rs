use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every artifact: the inputs it was made
/// from, what it produced and the effective configuration.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: &'static str,
    pub library_version: &'static str,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub config: serde_json::Value,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f
            .read(&mut buf)
            .with_context(|| format!("reading {}", path.display()))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl Manifest {
    pub fn new(command: &str, config: impl Serialize) -> anyhow::Result<Self> {
        Ok(Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            library_version: topicwise::VERSION,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: serde_json::to_value(config)?,
        })
    }

    pub fn input(&mut self, role: &str, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(digest(role, path)?);
        Ok(())
    }

    pub fn output(&mut self, role: &str, path: &Path) -> anyhow::Result<()> {
        self.outputs.push(digest(role, path)?);
        Ok(())
    }

    /// Writes the manifest to `path`.
    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

fn digest(role: &str, path: &Path) -> anyhow::Result<FileDigest> {
    Ok(FileDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

/// `out.json` → `out.json.manifest.json`.
pub fn path_for(artifact: &Path) -> PathBuf {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
