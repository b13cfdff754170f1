//! Per-stage run manifests: config snapshot and digest, flag overrides,
//! seeds, and SHA-256 digests of every input and output file.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub tool_version: String,
    /// Wall-clock creation time; the one field reruns may differ in.
    pub created_at: String,
    pub config_digest: String,
    pub config_snapshot: String,
    pub flag_overrides: Vec<String>,
    pub seeds: Vec<(String, u64)>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex_digest(hasher))
}

pub fn sha256_text(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex_digest(hasher)
}

fn hex_digest(hasher: Sha256) -> String {
    let bytes = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

impl StageManifest {
    pub fn new(stage: &str, config_snapshot: String, flag_overrides: Vec<String>) -> Self {
        StageManifest {
            stage: stage.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_at: chrono::Utc::now().to_rfc3339(),
            config_digest: sha256_text(&config_snapshot),
            config_snapshot,
            flag_overrides,
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record_seed(&mut self, name: &str, seed: u64) {
        self.seeds.push((name.to_string(), seed));
    }

    pub fn record_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.inputs.push(FileDigest {
            path: path.as_ref().to_path_buf(),
            sha256: sha256_file(&path)?,
        });
        Ok(())
    }

    pub fn record_output(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.outputs.push(FileDigest {
            path: path.as_ref().to_path_buf(),
            sha256: sha256_file(&path)?,
        });
        Ok(())
    }

    pub fn manifest_path(out_dir: &Path, stage: &str) -> PathBuf {
        out_dir.join(format!("{stage}.manifest.json"))
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = Self::manifest_path(out_dir, &self.stage);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

/// One mismatch found by manifest verification.
#[derive(Debug, Clone, Serialize)]
pub struct DigestMismatch {
    pub stage: String,
    pub path: PathBuf,
    pub expected: String,
    pub actual: Option<String>,
}

/// Re-hash every output recorded by every manifest in `out_dir`.
pub fn verify_manifests(out_dir: &Path) -> Result<(usize, Vec<DigestMismatch>)> {
    let mut checked = 0;
    let mut mismatches = Vec::new();
    let entries = std::fs::read_dir(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut manifest_paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".manifest.json"))
        })
        .collect();
    manifest_paths.sort();
    if manifest_paths.is_empty() {
        return Err(Error::invalid_input(format!(
            "no manifests found under {}",
            out_dir.display()
        )));
    }
    for path in manifest_paths {
        let manifest = StageManifest::read(&path)?;
        for output in &manifest.outputs {
            checked += 1;
            match sha256_file(&output.path) {
                Ok(actual) if actual == output.sha256 => {}
                Ok(actual) => mismatches.push(DigestMismatch {
                    stage: manifest.stage.clone(),
                    path: output.path.clone(),
                    expected: output.sha256.clone(),
                    actual: Some(actual),
                }),
                Err(_) => mismatches.push(DigestMismatch {
                    stage: manifest.stage.clone(),
                    path: output.path.clone(),
                    expected: output.sha256.clone(),
                    actual: None,
                }),
            }
        }
    }
    Ok((checked, mismatches))
}

/// Exclusive access to an output directory for the duration of a stage.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(out_dir: &Path) -> Result<RunLock> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let path = out_dir.join(".lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut file) => {
                let _ = writeln!(file, "pid {}", std::process::id());
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::Locked(path))
            }
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_are_stable() {
        assert_eq!(
            sha256_text(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_text("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_write_read_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = dir.path().join("data.txt");
        std::fs::write(&artifact, "hello").unwrap();

        let mut manifest = StageManifest::new("ingest", String::new(), vec![]);
        manifest.record_output(&artifact).unwrap();
        manifest.write(dir.path()).unwrap();

        let (checked, mismatches) = verify_manifests(dir.path()).unwrap();
        assert_eq!(checked, 1);
        assert!(mismatches.is_empty());

        // Tamper and re-verify.
        std::fs::write(&artifact, "tampered").unwrap();
        let (_, mismatches) = verify_manifests(dir.path()).unwrap();
        assert_eq!(mismatches.len(), 1);
        assert_eq!(mismatches[0].path, artifact);
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = RunLock::acquire(dir.path()).unwrap();
        assert!(matches!(
            RunLock::acquire(dir.path()),
            Err(Error::Locked(_))
        ));
        drop(lock);
        RunLock::acquire(dir.path()).unwrap();
    }
}
