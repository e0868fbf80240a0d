use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::PcaModel;
use crate::{Error, Result, FORMAT_VERSION};

pub const PCA_FILE: &str = "pca.json";
pub const EIGVECS_FILE: &str = "eigvecs.bin";

/// Contents of `pca.json`; the eigenvectors live in `eigvecs.bin`
/// (little-endian f32, column-major `d × d`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaFile {
    pub version: String,
    pub d: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

pub fn save_pca(model: &PcaModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let d = model.dim();
    let file = PcaFile {
        version: FORMAT_VERSION.into(),
        d,
        mean: model.mean.to_vec(),
        std: model.std.to_vec(),
        eigenvalues: model.eigenvalues.to_vec(),
    };
    fs::write(dir.join(PCA_FILE), serde_json::to_vec_pretty(&file)?)?;
    let mut bytes = Vec::with_capacity(d * d * 4);
    for col in model.eigenvectors.columns() {
        for v in col {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    fs::write(dir.join(EIGVECS_FILE), bytes)?;
    Ok(())
}

pub fn load_pca(dir: &Path) -> Result<PcaModel> {
    let json_path = dir.join(PCA_FILE);
    let file: PcaFile = serde_json::from_slice(&fs::read(&json_path)?)
        .map_err(|e| Error::format(&json_path, e.to_string()))?;
    if file.version != FORMAT_VERSION {
        return Err(Error::format(
            &json_path,
            format!("unsupported version '{}'", file.version),
        ));
    }
    let d = file.d;
    if file.mean.len() != d || file.std.len() != d || file.eigenvalues.len() != d {
        return Err(Error::format(&json_path, "vector lengths disagree with d"));
    }
    if file.std.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::format(&json_path, "standard deviations must be positive"));
    }
    let bin_path = dir.join(EIGVECS_FILE);
    let raw = fs::read(&bin_path)?;
    if raw.len() != d * d * 4 {
        return Err(Error::format(
            &bin_path,
            format!("expected {} bytes, found {}", d * d * 4, raw.len()),
        ));
    }
    let mut w = Array2::zeros((d, d));
    for (i, c) in raw.chunks_exact(4).enumerate() {
        w[[i % d, i / d]] = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
    }
    Ok(PcaModel {
        mean: Array1::from(file.mean),
        std: Array1::from(file.std),
        eigenvectors: w,
        eigenvalues: Array1::from(file.eigenvalues),
    })
}
