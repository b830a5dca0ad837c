use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const FAILED_DIR: &str = "failed";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub code_version: String,
    pub config_hash: String,
    /// Seconds since the Unix epoch; the only field that differs between
    /// identical runs.
    pub created_unix_s: u64,
    pub stages: Vec<String>,
    pub files: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

/// Output directory of one run. Remembers every path written so a failed
/// run can be moved aside and a finished one can be listed in the manifest.
pub struct ArtifactDir {
    root: PathBuf,
    written: Vec<PathBuf>,
    stages: Vec<String>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(ArtifactDir {
            root: root.to_path_buf(),
            written: Vec::new(),
            stages: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path for `rel`, with parent directories created.
    pub fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.written.push(PathBuf::from(rel));
        Ok(p)
    }

    /// Records files a library call wrote under `rel_dir`.
    pub fn adopt_dir(&mut self, rel_dir: &str) -> Result<()> {
        let dir = self.root.join(rel_dir);
        let mut names: Vec<_> = std::fs::read_dir(&dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        for n in names {
            self.written.push(Path::new(rel_dir).join(n));
        }
        Ok(())
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(rel)?;
        std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
    }

    /// Runs one named stage; an error carries the stage name.
    pub fn stage<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<R>) -> Result<R> {
        log::info!("stage {name}");
        let out = f(self).with_context(|| format!("stage `{name}` failed"))?;
        self.stages.push(name.to_string());
        Ok(out)
    }

    /// Moves everything written so far under `failed/`.
    pub fn quarantine(&self) -> Result<PathBuf> {
        let failed = self.root.join(FAILED_DIR);
        for rel in &self.written {
            let src = self.root.join(rel);
            if !src.exists() {
                continue;
            }
            let dst = failed.join(rel);
            if let Some(parent) = dst.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::rename(&src, &dst).with_context(|| format!("moving {} to {}", src.display(), dst.display()))?;
        }
        Ok(failed)
    }

    pub fn finish(self, config_hash: String) -> Result<Manifest> {
        let mut rels: Vec<&PathBuf> = self.written.iter().collect();
        rels.sort();
        rels.dedup();
        let files = rels
            .into_iter()
            .map(|rel| {
                let (bytes, sha256) = sha256_file(&self.root.join(rel))?;
                Ok(FileDigest {
                    path: rel.to_string_lossy().replace('\\', "/"),
                    bytes,
                    sha256,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            tool: "painnet".into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            config_hash,
            created_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            stages: self.stages,
            files,
        };
        let path = self.root.join(MANIFEST_NAME);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}
