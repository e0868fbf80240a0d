//! Dense bottleneck autoencoders used as comparison reducers next to PCA.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cae::ArchId;
use super::layers::LayerSpec;
use super::network::{scale_grads, Grads, Sequential};
use super::tensor::{Shape, Tensor};
use super::train::{accumulate, ordered_mean, Adam, EpochShuffler, TrainConfig};
use crate::latent::{standardize_stats, standardize_value};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AeKind {
    /// `input-N-input`, identity activations.
    Linear,
    /// `input-Dh-N-Dh-input`, ReLU on the hidden layers.
    Nonlinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackedAeSpec {
    pub kind: AeKind,
    pub bottleneck: usize,
    /// Hidden width of the nonlinear kind; ignored for the linear kind.
    pub hidden_dim: usize,
}

impl StackedAeSpec {
    /// Hidden width 512 for the street-level head, 128 for the street-network head.
    pub fn for_head(kind: AeKind, bottleneck: usize, head: ArchId) -> Self {
        let hidden_dim = match head {
            ArchId::Streetview => 512,
            ArchId::Streetnet => 128,
        };
        StackedAeSpec {
            kind,
            bottleneck,
            hidden_dim,
        }
    }

    fn layers(&self, input_dim: usize) -> (Vec<LayerSpec>, Vec<LayerSpec>) {
        let dense = |inputs, outputs| LayerSpec::Dense { inputs, outputs };
        let n = self.bottleneck;
        match self.kind {
            AeKind::Linear => (vec![dense(input_dim, n)], vec![dense(n, input_dim)]),
            AeKind::Nonlinear => {
                let h = self.hidden_dim;
                (
                    vec![dense(input_dim, h), LayerSpec::Relu, dense(h, n)],
                    vec![dense(n, h), LayerSpec::Relu, dense(h, input_dim)],
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StackedAeModel {
    pub spec: StackedAeSpec,
    pub input_dim: usize,
    pub encoder: Sequential,
    pub decoder: Sequential,
    /// Standardisation applied before encoding (same convention as PCA).
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StackedAeModel {
    fn standardize(&self, row: impl Iterator<Item = f64>) -> Tensor {
        Tensor::flat(
            row.zip(self.mean.iter().zip(&self.std))
                .map(|(v, (m, s))| standardize_value(v, *m, *s))
                .collect(),
        )
    }

    fn check_width(&self, z: ArrayView2<f64>, width: usize) -> Result<()> {
        if z.ncols() != width {
            return Err(Error::shape(format!("{width} columns"), z.ncols()));
        }
        Ok(())
    }

    /// Maps latents `n × d` to bottleneck codes `n × N`.
    pub fn encode(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(z, self.input_dim)?;
        let mut out = Array2::zeros((z.nrows(), self.spec.bottleneck));
        for (i, row) in z.rows().into_iter().enumerate() {
            let v = self.encoder.forward(&self.standardize(row.iter().copied()));
            out.row_mut(i).assign(&ndarray::ArrayView1::from(&v.data));
        }
        Ok(out)
    }

    /// Maps bottleneck codes back to latent units.
    pub fn decode(&self, v: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(v, self.spec.bottleneck)?;
        let mut out = Array2::zeros((v.nrows(), self.input_dim));
        for (i, row) in v.rows().into_iter().enumerate() {
            let z = self.decoder.forward(&Tensor::flat(row.to_vec()));
            for (j, val) in z.data.iter().enumerate() {
                out[[i, j]] = val * self.std[j] + self.mean[j];
            }
        }
        Ok(out)
    }

    /// Mean squared reconstruction error per element, on the standardized scale.
    pub fn reconstruction_mse(&self, z: ArrayView2<f64>) -> Result<f64> {
        self.check_width(z, self.input_dim)?;
        let mut total = 0.0;
        for row in z.rows() {
            let x = self.standardize(row.iter().copied());
            let y = self.decoder.forward(&self.encoder.forward(&x));
            total += super::cae::mse(&y.data, &x.data);
        }
        Ok(total / z.nrows().max(1) as f64)
    }

    fn zero_grads(&self) -> Grads {
        let mut g = self.encoder.zero_grads();
        g.extend(self.decoder.zero_grads());
        g
    }
}

/// Trains a stacked autoencoder on latents (rows are samples).
///
/// Returns the model and the per-epoch mean reconstruction loss.
pub fn train_stacked_ae(
    latents: ArrayView2<f64>,
    spec: StackedAeSpec,
    config: &TrainConfig,
) -> Result<(StackedAeModel, Vec<f64>)> {
    config.validate()?;
    let (n, d) = latents.dim();
    if n == 0 {
        return Err(Error::invalid("empty latent matrix"));
    }
    if spec.bottleneck == 0 || spec.bottleneck > d {
        return Err(Error::invalid(format!(
            "bottleneck {} must lie in 1..={d} (latent width)",
            spec.bottleneck
        )));
    }
    if latents.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite latent values"));
    }
    let (mean, std) = standardize_stats(latents);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (enc, dec) = spec.layers(d);
    let encoder = Sequential::new(Shape::flat(d), enc, &mut rng)?;
    let decoder = Sequential::new(Shape::flat(spec.bottleneck), dec, &mut rng)?;
    let mut model = StackedAeModel {
        spec,
        input_dim: d,
        encoder,
        decoder,
        mean,
        std,
    };
    let x: Vec<Tensor> = latents
        .rows()
        .into_iter()
        .map(|r| model.standardize(r.iter().copied()))
        .collect();

    let template = model.zero_grads();
    let mut adam = Adam::new(config, &template);
    let mut shuffler = EpochShuffler::new(n, config.seed);
    let mut per_sample = vec![0.0; n];
    let mut history = Vec::with_capacity(config.epochs);
    let n_enc = model.encoder.layers.len();
    for epoch in 0..config.epochs {
        let order = shuffler.next_epoch().to_vec();
        for batch in order.chunks(config.batch_size) {
            let (mut grads, losses) = accumulate(batch, config.deterministic, &template, |i, g| {
                let et = model.encoder.forward_trace(&x[i], None);
                let dt = model.decoder.forward_trace(et.output(), None);
                let y = dt.output();
                let scale = 2.0 / d as f64;
                let gy = Tensor {
                    shape: y.shape,
                    data: y.data.iter().zip(&x[i].data).map(|(a, b)| scale * (a - b)).collect(),
                };
                let (ge, gd) = g.split_at_mut(n_enc);
                let gv = model.decoder.backward(&dt, gy, gd, true).expect("input grad");
                model.encoder.backward(&et, gv, ge, false);
                super::cae::mse(&y.data, &x[i].data)
            });
            for (i, l) in losses {
                per_sample[i] = l;
            }
            scale_grads(&mut grads, 1.0 / batch.len() as f64);
            adam.step(
                model.encoder.params_mut().chain(model.decoder.params_mut()),
                &grads,
            );
        }
        let loss = ordered_mean(&per_sample);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        history.push(loss);
    }
    Ok((model, history))
}
