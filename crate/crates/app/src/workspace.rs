use std::fs;
use std::path::{Path, PathBuf};

use convpca_core::FORMAT_VERSION;
use serde::{Deserialize, Serialize};

use crate::{AppError, AppResult};

/// Index of the artifacts a set of commands produced. Paths are relative to
/// the manifest's directory unless absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceManifest {
    pub version: String,
    #[serde(default)]
    pub graphs: Vec<PathBuf>,
    #[serde(default)]
    pub corpora: Vec<PathBuf>,
    #[serde(default)]
    pub models: Vec<PathBuf>,
    #[serde(default)]
    pub pca: Vec<PathBuf>,
    #[serde(default)]
    pub results: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Artifact {
    Graph,
    Corpus,
    Model,
    Pca,
    Result,
}

impl Default for WorkspaceManifest {
    fn default() -> Self {
        WorkspaceManifest {
            version: FORMAT_VERSION.into(),
            graphs: Vec::new(),
            corpora: Vec::new(),
            models: Vec::new(),
            pca: Vec::new(),
            results: Vec::new(),
        }
    }
}

fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl WorkspaceManifest {
    fn list_mut(&mut self, kind: Artifact) -> &mut Vec<PathBuf> {
        match kind {
            Artifact::Graph => &mut self.graphs,
            Artifact::Corpus => &mut self.corpora,
            Artifact::Model => &mut self.models,
            Artifact::Pca => &mut self.pca,
            Artifact::Result => &mut self.results,
        }
    }

    fn all(&self) -> impl Iterator<Item = &PathBuf> {
        self.graphs
            .iter()
            .chain(&self.corpora)
            .chain(&self.models)
            .chain(&self.pca)
            .chain(&self.results)
    }

    fn parse(path: &Path) -> AppResult<Self> {
        let err = |message: String| AppError::Workspace {
            path: path.to_path_buf(),
            message,
        };
        let bytes = fs::read(path).map_err(|e| err(e.to_string()))?;
        let m: WorkspaceManifest = serde_json::from_slice(&bytes).map_err(|e| err(e.to_string()))?;
        if m.version != FORMAT_VERSION {
            return Err(err(format!("unsupported version '{}', expected '{FORMAT_VERSION}'", m.version)));
        }
        Ok(m)
    }

    /// Reads a manifest, checks that every referenced path exists and returns
    /// it with the paths resolved against its directory.
    pub fn load(path: &Path) -> AppResult<Self> {
        let mut m = Self::parse(path)?;
        let base = base_dir(path);
        for kind in [Artifact::Graph, Artifact::Corpus, Artifact::Model, Artifact::Pca, Artifact::Result] {
            for p in m.list_mut(kind).iter_mut() {
                *p = base.join(&*p);
            }
        }
        if let Some(missing) = m.all().find(|p| !p.exists()) {
            return Err(AppError::Workspace {
                path: path.to_path_buf(),
                message: format!("referenced path {} does not exist", missing.display()),
            });
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// Adds `artifact` to the manifest at `path`, creating the manifest when
    /// absent. Paths under the manifest's directory are stored relative.
    pub fn register(path: &Path, kind: Artifact, artifact: &Path) -> AppResult<()> {
        let mut m = if path.exists() { Self::parse(path)? } else { Self::default() };
        let base = fs::canonicalize(base_dir(path).join(".")).ok();
        let abs = fs::canonicalize(artifact)?;
        let entry = base
            .and_then(|b| abs.strip_prefix(b).ok().map(Path::to_path_buf))
            .unwrap_or(abs);
        let list = m.list_mut(kind);
        if !list.contains(&entry) {
            list.push(entry);
        }
        m.save(path)
    }
}
