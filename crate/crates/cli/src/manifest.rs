use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub run_index: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

/// Written last as `manifest.json`; lists every other file in the output
/// directory. Timings live only here, so every listed file is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub status: RunStatus,
    pub failure: Option<StageFailure>,
    pub config: RunConfig,
    pub representative: Option<Representative>,
    pub timings: Vec<StageTiming>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<RunManifest, CliError> {
        crate::config::read_json(&run_dir.join(MANIFEST_FILE))
    }

    pub fn file(&self, path: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.path == path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory that records every file written through it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: BTreeMap<String, FileEntry>,
}

impl OutputDir {
    /// Creates the directory. An existing non-empty directory is only reused
    /// when it holds a previous run (a manifest) and `overwrite` is set.
    pub fn create(root: &Path, overwrite: bool) -> Result<OutputDir, CliError> {
        if root.exists() {
            let non_empty = std::fs::read_dir(root)
                .map_err(|e| CliError::Config(format!("output_dir: {e}")))?
                .next()
                .is_some();
            if non_empty {
                if !overwrite {
                    return Err(CliError::Config(format!(
                        "output_dir: {} is not empty (pass --overwrite to replace a previous run)",
                        root.display()
                    )));
                }
                if !root.join(MANIFEST_FILE).is_file() {
                    return Err(CliError::Config(format!(
                        "output_dir: {} is not empty and holds no previous run; refusing to clear it",
                        root.display()
                    )));
                }
                std::fs::remove_dir_all(root).map_err(|e| CliError::Config(format!("output_dir: {e}")))?;
            }
        }
        std::fs::create_dir_all(root).map_err(|e| CliError::Config(format!("output_dir: {e}")))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> std::io::Result<()> {
        let bytes = contents.as_ref();
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.insert(
            rel.to_string(),
            FileEntry {
                path: rel.to_string(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(bytes),
            },
        );
        Ok(())
    }

    /// Records a file that was written into the directory by other code.
    pub fn register(&mut self, rel: &str) -> std::io::Result<()> {
        let bytes = std::fs::read(self.root.join(rel))?;
        self.files.insert(
            rel.to_string(),
            FileEntry {
                path: rel.to_string(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            },
        );
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        self.write(rel, text + "\n")
    }

    pub fn entries(&self) -> Vec<FileEntry> {
        self.files.values().cloned().collect()
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
        std::fs::write(self.root.join(MANIFEST_FILE), text + "\n")
    }
}

/// Files under `root` (relative, `/`-separated), the manifest excluded.
pub fn files_on_disk(root: &Path) -> std::io::Result<Vec<String>> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<String>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(base, &path, out)?;
            } else {
                let rel = path.strip_prefix(base).expect("under base");
                let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
                out.push(rel.join("/"));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.retain(|p| p != MANIFEST_FILE);
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn refuses_foreign_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("notes.txt"), "keep").unwrap();
        assert!(OutputDir::create(dir.path(), false).is_err());
        assert!(OutputDir::create(dir.path(), true).is_err());
        assert!(dir.path().join("notes.txt").exists());
    }

    #[test]
    fn tracks_nested_files() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("run");
        let mut out = OutputDir::create(&root, false).unwrap();
        out.write("a.csv", "x\n1\n").unwrap();
        out.write("models/b.json", "{}").unwrap();
        let listed: Vec<String> = out.entries().into_iter().map(|e| e.path).collect();
        assert_eq!(listed, files_on_disk(&root).unwrap());
    }
}
