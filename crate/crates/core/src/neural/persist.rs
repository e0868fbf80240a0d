//! Model directories: `manifest.json` plus `weights.bin` (little-endian f32,
//! tensors concatenated in manifest order).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cae::{ArchConfig, ArchId, CaeModel};
use super::layers::{Layer, LayerSpec};
use super::mlp::{MlpModel, Task};
use super::network::Sequential;
use super::tensor::Shape;
use crate::{Error, Result, FORMAT_VERSION};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    #[serde(flatten)]
    pub spec: LayerSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub name: String,
    pub input_shape: Shape,
    pub output_shape: Shape,
    pub layers: Vec<LayerEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelKind {
    Cae {
        arch: ArchConfig,
        latent_dim: usize,
    },
    Mlp {
        head_id: ArchId,
        task: Task,
        layer_widths: Vec<usize>,
        dropout_rate: f64,
        l1_coefficient: f64,
        feature_mean: Vec<f64>,
        feature_std: Vec<f64>,
        target_mean: f64,
        target_std: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub version: String,
    pub arch_id: ArchId,
    pub seed: u64,
    #[serde(flatten)]
    pub kind: ModelKind,
    pub networks: Vec<NetworkEntry>,
}

fn network_entry(name: &str, net: &Sequential) -> NetworkEntry {
    NetworkEntry {
        name: name.into(),
        input_shape: net.input_shape,
        output_shape: net.output_shape(),
        layers: net
            .layers
            .iter()
            .map(|l| LayerEntry {
                spec: l.spec.clone(),
                tensors: l
                    .spec
                    .tensor_shapes()
                    .into_iter()
                    .map(|(name, shape)| TensorEntry {
                        name: name.into(),
                        shape,
                    })
                    .collect(),
            })
            .collect(),
    }
}

fn write_bundle(dir: &Path, manifest: &ModelManifest, nets: &[&Sequential]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut bytes = Vec::new();
    for net in nets {
        for v in net.params().flatten() {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(manifest)?)?;
    fs::write(dir.join(WEIGHTS_FILE), bytes)?;
    Ok(())
}

fn read_bundle(dir: &Path) -> Result<(ModelManifest, Vec<Sequential>)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: ModelManifest = serde_json::from_slice(&fs::read(&manifest_path)?)
        .map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    if manifest.version != FORMAT_VERSION {
        return Err(Error::format(
            &manifest_path,
            format!("unsupported version '{}'", manifest.version),
        ));
    }
    let weights_path = dir.join(WEIGHTS_FILE);
    let raw = fs::read(&weights_path)?;
    let expected: usize = manifest
        .networks
        .iter()
        .flat_map(|n| &n.layers)
        .map(|l| l.spec.param_count())
        .sum();
    if raw.len() != expected * 4 {
        return Err(Error::format(
            &weights_path,
            format!("expected {} bytes, found {}", expected * 4, raw.len()),
        ));
    }
    let mut values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    let mut nets = Vec::new();
    for entry in &manifest.networks {
        let mut layers = Vec::new();
        for l in &entry.layers {
            let declared: usize = l.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
            if declared != l.spec.param_count() {
                return Err(Error::format(
                    &manifest_path,
                    format!("tensor shapes of a {:?} layer do not match its spec", l.spec),
                ));
            }
            let params: Vec<f64> = values.by_ref().take(l.spec.param_count()).collect();
            if params.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(&weights_path, "non-finite weight"));
            }
            layers.push(Layer {
                spec: l.spec.clone(),
                params,
            });
        }
        let net = Sequential::from_layers(entry.input_shape, layers)
            .map_err(|e| Error::format(&manifest_path, e.to_string()))?;
        if net.output_shape() != entry.output_shape {
            return Err(Error::format(
                &manifest_path,
                format!("network '{}' output shape mismatch", entry.name),
            ));
        }
        nets.push(net);
    }
    Ok((manifest, nets))
}

pub fn save_cae(model: &CaeModel, dir: &Path) -> Result<()> {
    let manifest = ModelManifest {
        version: FORMAT_VERSION.into(),
        arch_id: model.arch.arch_id,
        seed: model.seed,
        kind: ModelKind::Cae {
            arch: model.arch,
            latent_dim: model.latent_dim(),
        },
        networks: vec![
            network_entry("encoder", &model.encoder),
            network_entry("decoder", &model.decoder),
        ],
    };
    write_bundle(dir, &manifest, &[&model.encoder, &model.decoder])
}

pub fn load_cae(dir: &Path) -> Result<CaeModel> {
    let (manifest, mut nets) = read_bundle(dir)?;
    let path = dir.join(MANIFEST_FILE);
    let ModelKind::Cae { arch, latent_dim } = manifest.kind else {
        return Err(Error::format(path, "not a convolutional autoencoder"));
    };
    if nets.len() != 2 {
        return Err(Error::format(path, "expected encoder and decoder networks"));
    }
    let decoder = nets.pop().unwrap();
    let encoder = nets.pop().unwrap();
    let model = CaeModel::from_parts(arch, encoder, decoder, manifest.seed)
        .map_err(|e| Error::format(&path, e.to_string()))?;
    if model.latent_dim() != latent_dim {
        return Err(Error::format(path, "latent_dim does not match the encoder"));
    }
    Ok(model)
}

pub fn save_mlp(model: &MlpModel, seed: u64, dir: &Path) -> Result<()> {
    let manifest = ModelManifest {
        version: FORMAT_VERSION.into(),
        arch_id: model.head_id,
        seed,
        kind: ModelKind::Mlp {
            head_id: model.head_id,
            task: model.task,
            layer_widths: model.layer_widths.clone(),
            dropout_rate: model.dropout_rate,
            l1_coefficient: model.l1_coefficient,
            feature_mean: model.feature_mean.clone(),
            feature_std: model.feature_std.clone(),
            target_mean: model.target_mean,
            target_std: model.target_std,
        },
        networks: vec![network_entry("head", &model.net)],
    };
    write_bundle(dir, &manifest, &[&model.net])
}

pub fn load_mlp(dir: &Path) -> Result<MlpModel> {
    let (manifest, mut nets) = read_bundle(dir)?;
    let path = dir.join(MANIFEST_FILE);
    let ModelKind::Mlp {
        head_id,
        task,
        layer_widths,
        dropout_rate,
        l1_coefficient,
        feature_mean,
        feature_std,
        target_mean,
        target_std,
    } = manifest.kind
    else {
        return Err(Error::format(path, "not an MLP head"));
    };
    let net = nets
        .pop()
        .filter(|_| nets.is_empty())
        .ok_or_else(|| Error::format(&path, "expected exactly one network"))?;
    Ok(MlpModel {
        head_id,
        layer_widths,
        task,
        dropout_rate,
        l1_coefficient,
        net,
        feature_mean,
        feature_std,
        target_mean,
        target_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::cae::ArchConfig;

    #[test]
    fn cae_round_trip_rounds_to_f32() {
        let model = CaeModel::new(ArchConfig::desk(ArchId::Streetnet, 32), 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_cae(&model, dir.path()).unwrap();
        let loaded = load_cae(dir.path()).unwrap();
        assert_eq!(loaded.arch, model.arch);
        assert_eq!(loaded.latent_dim(), 320);
        let a: Vec<f64> = model.encoder.params().flatten().copied().collect();
        let b: Vec<f64> = loaded.encoder.params().flatten().copied().collect();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*y, *x as f32 as f64);
        }
        let bytes = fs::read(dir.path().join(WEIGHTS_FILE)).unwrap();
        assert_eq!(bytes.len(), model.param_count() * 4);
    }

    #[test]
    fn truncated_weights_rejected() {
        let model = CaeModel::new(ArchConfig::desk(ArchId::Streetnet, 16), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_cae(&model, dir.path()).unwrap();
        let w = dir.path().join(WEIGHTS_FILE);
        let bytes = fs::read(&w).unwrap();
        fs::write(&w, &bytes[..bytes.len() - 4]).unwrap();
        let err = load_cae(dir.path()).unwrap_err();
        assert!(err.to_string().contains("expected"), "{err}");
    }

    #[test]
    fn manifest_records_version_and_arch() {
        let model = CaeModel::new(ArchConfig::desk(ArchId::Streetview, 16), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_cae(&model, dir.path()).unwrap();
        let v: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(v["version"], "convpca/1");
        assert_eq!(v["arch_id"], "streetview");
        assert_eq!(v["model"], "cae");
        assert_eq!(v["networks"][0]["layers"][0]["kind"], "conv2d");
    }
}
