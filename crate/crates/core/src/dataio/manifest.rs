//! Dataset manifests: file digests, record counts and the parameters a run
//! used.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::epoch::ObservationWindow;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 16, f);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Digests everything read through it, so a stream can be hashed in the
/// same pass that parses it.
pub struct DigestReader<R> {
    inner: R,
    hasher: Sha256,
}

impl<R: Read> DigestReader<R> {
    pub fn new(inner: R) -> Self {
        DigestReader { inner, hasher: Sha256::new() }
    }

    /// Hex SHA-256 of the bytes read so far.
    pub fn hex_digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }
}

impl<R: Read> Read for DigestReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the manifest's directory when possible.
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<u64>,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<ObservationWindow>,
    #[serde(default)]
    pub inputs: Vec<FileEntry>,
    #[serde(default)]
    pub outputs: Vec<FileEntry>,
    /// Effective configuration and anything else the producer wants echoed.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl DatasetManifest {
    pub fn new() -> Self {
        DatasetManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            ..Default::default()
        }
    }

    fn entry(base: &Path, path: &Path, records: Option<u64>) -> Result<FileEntry> {
        let sha256 = sha256_file(path)?;
        let rel = path.strip_prefix(base).unwrap_or(path).to_path_buf();
        Ok(FileEntry { path: rel, records, sha256 })
    }

    pub fn add_input(&mut self, base: &Path, path: &Path, records: Option<u64>) -> Result<()> {
        self.inputs.push(Self::entry(base, path, records)?);
        Ok(())
    }

    pub fn add_output(&mut self, base: &Path, path: &Path, records: Option<u64>) -> Result<()> {
        self.outputs.push(Self::entry(base, path, records)?);
        Ok(())
    }

    /// Recomputes every digest; paths are resolved against `base`.
    pub fn verify(&self, base: &Path) -> Result<()> {
        for e in self.inputs.iter().chain(&self.outputs) {
            let path = if e.path.is_absolute() { e.path.clone() } else { base.join(&e.path) };
            let actual = sha256_file(&path)?;
            if actual != e.sha256 {
                return Err(Error::DigestMismatch { path, expected: e.sha256.clone(), actual });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
    }

    /// Loads `dir/manifest.json` and checks every digest in it.
    pub fn load_verified(dir: &Path) -> Result<Self> {
        let m = Self::load(&dir.join(MANIFEST_FILE))?;
        m.verify(dir)?;
        Ok(m)
    }
}
