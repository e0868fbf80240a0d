//! Convolutional autoencoders for street-level images and street-network rasters.
//!
//! Architectures are written as token strings close to the usual `C64-C64-…`
//! notation and expanded by [`expand_tokens`]:
//!
//! | token   | layers                                          |
//! |---------|-------------------------------------------------|
//! | `Ck`    | 3×3 conv with `k` filters + ReLU                |
//! | `CCk`   | 3×3 conv + ReLU + 2×2 max-pool                  |
//! | `CDk`   | 3×3 conv + ReLU + ×2 upsample                   |
//! | `TCk`   | 3×3 stride-2 transposed conv (×2 size) + ReLU   |
//! | `P`     | 2×2 max-pool                                    |
//! | `U`     | ×2 nearest upsample                             |
//!
//! The activation of the last decoder layer is replaced by a sigmoid so that
//! reconstructions stay in `[0, 1]`.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::LayerSpec;
use super::network::{Grads, Sequential};
use super::tensor::{ImageTensor, Shape, Tensor};
use super::train::{accumulate, ordered_mean, Adam, EpochShuffler, TrainConfig};
use crate::{Error, Result};

pub const STREETVIEW_ENCODER: &str =
    "C64-C64-P-C128-C128-P-C256-C256-P-C512-C512-CC512-C512-C512-CC512";
pub const STREETVIEW_DECODER: &str =
    "CD512-CD512-CD512-C512-C512-C512-C256-C256-C256-U-C128-C128-U-C64-C64-C3";
pub const STREETNET_ENCODER: &str = "C15-C15-C15-C10-C10";
pub const STREETNET_DECODER: &str = "TC10-TC10-TC15-TC15-TC1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchId {
    /// 224×224×3 street-level imagery, VGG-like stride-1 convolutions.
    Streetview,
    /// 256×256×1 street-network rasters, stride-2 convolutions.
    Streetnet,
}

impl std::str::FromStr for ArchId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "streetview" => Ok(ArchId::Streetview),
            "streetnet" => Ok(ArchId::Streetnet),
            other => Err(Error::invalid(format!("unknown architecture '{other}'"))),
        }
    }
}

impl std::fmt::Display for ArchId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ArchId::Streetview => "streetview",
            ArchId::Streetnet => "streetnet",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ArchVariant {
    Full,
    /// Reduced depth and width for small inputs (e.g. 32×32 or 64×64).
    Desk { input_size: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub arch_id: ArchId,
    #[serde(flatten)]
    pub variant: ArchVariant,
}

impl ArchConfig {
    pub fn full(arch_id: ArchId) -> Self {
        ArchConfig {
            arch_id,
            variant: ArchVariant::Full,
        }
    }

    pub fn desk(arch_id: ArchId, input_size: usize) -> Self {
        ArchConfig {
            arch_id,
            variant: ArchVariant::Desk { input_size },
        }
    }

    pub fn input_shape(&self) -> Shape {
        match (self.arch_id, self.variant) {
            (ArchId::Streetview, ArchVariant::Full) => Shape::new(3, 224, 224),
            (ArchId::Streetnet, ArchVariant::Full) => Shape::new(1, 256, 256),
            (ArchId::Streetview, ArchVariant::Desk { input_size }) => {
                Shape::new(3, input_size, input_size)
            }
            (ArchId::Streetnet, ArchVariant::Desk { input_size }) => {
                Shape::new(1, input_size, input_size)
            }
        }
    }

    fn conv_stride(&self) -> usize {
        match self.arch_id {
            ArchId::Streetview => 1,
            ArchId::Streetnet => 2,
        }
    }

    /// Encoder and decoder token strings.
    pub fn tokens(&self) -> Result<(String, String)> {
        match (self.arch_id, self.variant) {
            (ArchId::Streetview, ArchVariant::Full) => {
                Ok((STREETVIEW_ENCODER.into(), STREETVIEW_DECODER.into()))
            }
            (ArchId::Streetnet, ArchVariant::Full) => {
                Ok((STREETNET_ENCODER.into(), STREETNET_DECODER.into()))
            }
            (ArchId::Streetview, ArchVariant::Desk { input_size }) => {
                if input_size < 8 || input_size % 8 != 0 {
                    return Err(Error::invalid(format!(
                        "desk streetview input must be a positive multiple of 8, got {input_size}"
                    )));
                }
                Ok(("C8-P-C8-P-C8-P".into(), "CD8-CD8-CD8-C3".into()))
            }
            (ArchId::Streetnet, ArchVariant::Desk { input_size }) => {
                if input_size < 16 || !input_size.is_power_of_two() {
                    return Err(Error::invalid(format!(
                        "desk streetnet input must be a power of two >= 16, got {input_size}"
                    )));
                }
                // one stride-2 layer per halving down to an 8×8 grid
                let depth = input_size.trailing_zeros() as usize - 3;
                let mut enc = vec![8; depth - 1];
                enc.push(5);
                let mut dec: Vec<usize> = enc[..depth - 1].iter().rev().copied().collect();
                dec.push(1);
                let join = |prefix: &str, v: &[usize]| {
                    v.iter()
                        .map(|k| format!("{prefix}{k}"))
                        .collect::<Vec<_>>()
                        .join("-")
                };
                Ok((join("C", &enc), join("TC", &dec)))
            }
        }
    }

    pub fn layer_specs(&self) -> Result<(Vec<LayerSpec>, Vec<LayerSpec>)> {
        let (enc, dec) = self.tokens()?;
        let input = self.input_shape();
        let stride = self.conv_stride();
        let encoder = expand_tokens(&enc, input.channels, stride, false)?;
        let latent = Sequential::output_shape_of(input, &encoder)?;
        let decoder = expand_tokens(&dec, latent.channels, stride, true)?;
        let out = Sequential::output_shape_of(latent, &decoder)?;
        if out != input {
            return Err(Error::shape(
                format!("decoder output {input}"),
                format!("{out} for {enc} / {dec}"),
            ));
        }
        Ok((encoder, decoder))
    }

    /// Latent shape from shape inference alone (no parameters allocated).
    pub fn latent_shape(&self) -> Result<Shape> {
        let (encoder, _) = self.layer_specs()?;
        Sequential::output_shape_of(self.input_shape(), &encoder)
    }
}

/// Expands an architecture token string into layer specs.
pub fn expand_tokens(
    tokens: &str,
    in_channels: usize,
    conv_stride: usize,
    sigmoid_output: bool,
) -> Result<Vec<LayerSpec>> {
    let mut specs = Vec::new();
    let mut channels = in_channels;
    let filters = |t: &str, prefix: &str| -> Result<usize> {
        t[prefix.len()..]
            .parse::<usize>()
            .ok()
            .filter(|k| *k > 0)
            .ok_or_else(|| Error::invalid(format!("bad architecture token '{t}'")))
    };
    for tok in tokens.split('-').map(str::trim) {
        if tok == "P" {
            specs.push(LayerSpec::MaxPool2d);
        } else if tok == "U" {
            specs.push(LayerSpec::Upsample2d);
        } else if tok.starts_with("TC") {
            let k = filters(tok, "TC")?;
            specs.push(LayerSpec::tconv3x3_up(channels, k));
            specs.push(LayerSpec::Relu);
            channels = k;
        } else if tok.starts_with("CC") || tok.starts_with("CD") {
            let k = filters(tok, "CC")?;
            specs.push(LayerSpec::conv3x3(channels, k, conv_stride));
            specs.push(LayerSpec::Relu);
            specs.push(if tok.starts_with("CC") {
                LayerSpec::MaxPool2d
            } else {
                LayerSpec::Upsample2d
            });
            channels = k;
        } else if tok.starts_with('C') {
            let k = filters(tok, "C")?;
            specs.push(LayerSpec::conv3x3(channels, k, conv_stride));
            specs.push(LayerSpec::Relu);
            channels = k;
        } else {
            return Err(Error::invalid(format!("bad architecture token '{tok}'")));
        }
    }
    if sigmoid_output {
        match specs.iter().rposition(|s| *s == LayerSpec::Relu) {
            Some(i) => specs[i] = LayerSpec::Sigmoid,
            None => specs.push(LayerSpec::Sigmoid),
        }
    }
    Ok(specs)
}

/// A trained or freshly initialised convolutional autoencoder.
#[derive(Clone, Debug, PartialEq)]
pub struct CaeModel {
    pub arch: ArchConfig,
    pub encoder: Sequential,
    pub decoder: Sequential,
    pub seed: u64,
}

impl CaeModel {
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        let (enc, dec) = arch.layer_specs()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Sequential::new(arch.input_shape(), enc, &mut rng)?;
        let decoder = Sequential::new(encoder.output_shape(), dec, &mut rng)?;
        Ok(CaeModel {
            arch,
            encoder,
            decoder,
            seed,
        })
    }

    /// Builds a model from explicit networks, checking that they compose.
    pub fn from_parts(
        arch: ArchConfig,
        encoder: Sequential,
        decoder: Sequential,
        seed: u64,
    ) -> Result<Self> {
        if decoder.input_shape != encoder.output_shape() {
            return Err(Error::shape(encoder.output_shape(), decoder.input_shape));
        }
        if decoder.output_shape() != encoder.input_shape {
            return Err(Error::shape(encoder.input_shape, decoder.output_shape()));
        }
        Ok(CaeModel {
            arch,
            encoder,
            decoder,
            seed,
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.encoder.input_shape
    }

    pub fn latent_shape(&self) -> Shape {
        self.encoder.output_shape()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_shape().len()
    }

    fn check_image(&self, img: &ImageTensor) -> Result<()> {
        if img.shape() != self.input_shape() {
            return Err(Error::shape(
                format!("{} input image (CxHxW)", self.input_shape()),
                img.shape(),
            ));
        }
        Ok(())
    }

    pub fn encode(&self, img: &ImageTensor) -> Result<Vec<f64>> {
        self.check_image(img)?;
        Ok(self.encoder.forward(&img.to_tensor()).data)
    }

    pub fn decode(&self, latent: &[f64]) -> Result<ImageTensor> {
        let shape = self.latent_shape();
        let z = Tensor::from_vec(shape, latent.to_vec())?;
        ImageTensor::from_tensor(&self.decoder.forward(&z))
    }

    /// Encodes and reconstructs a batch: latents are `batch × latent_dim`.
    pub fn forward(&self, batch: &[ImageTensor]) -> Result<(Array2<f64>, Vec<ImageTensor>)> {
        let mut latents = Array2::zeros((batch.len(), self.latent_dim()));
        let mut recon = Vec::with_capacity(batch.len());
        for (i, img) in batch.iter().enumerate() {
            let z = self.encode(img)?;
            recon.push(self.decode(&z)?);
            latents.row_mut(i).assign(&ndarray::ArrayView1::from(&z));
        }
        Ok((latents, recon))
    }

    pub fn encode_all(&self, images: &[ImageTensor]) -> Result<Array2<f64>> {
        let mut latents = Array2::zeros((images.len(), self.latent_dim()));
        for (i, img) in images.iter().enumerate() {
            let z = self.encode(img)?;
            latents.row_mut(i).assign(&ndarray::ArrayView1::from(&z));
        }
        Ok(latents)
    }

    /// Mean squared reconstruction error over all pixels of one image.
    pub fn reconstruction_loss(&self, img: &ImageTensor) -> Result<f64> {
        self.check_image(img)?;
        let x = img.to_tensor();
        let y = self.decoder.forward(&self.encoder.forward(&x));
        Ok(mse(&y.data, &x.data))
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    pub fn all_finite(&self) -> bool {
        self.encoder.all_finite() && self.decoder.all_finite()
    }

    pub(crate) fn zero_grads(&self) -> Grads {
        let mut g = self.encoder.zero_grads();
        g.extend(self.decoder.zero_grads());
        g
    }

    /// Loss of one sample; adds its gradient into `grads` (encoder blocks first).
    pub(crate) fn sample_loss_grad(&self, x: &Tensor, grads: &mut Grads) -> f64 {
        let enc_trace = self.encoder.forward_trace(x, None);
        let dec_trace = self.decoder.forward_trace(enc_trace.output(), None);
        let y = dec_trace.output();
        let loss = mse(&y.data, &x.data);
        let scale = 2.0 / x.data.len() as f64;
        let g = Tensor {
            shape: y.shape,
            data: y
                .data
                .iter()
                .zip(&x.data)
                .map(|(a, b)| scale * (a - b))
                .collect(),
        };
        let (genc, gdec) = grads.split_at_mut(self.encoder.layers.len());
        let glat = self
            .decoder
            .backward(&dec_trace, g, gdec, true)
            .expect("input gradient requested");
        self.encoder.backward(&enc_trace, glat, genc, false);
        loss
    }
}

pub(crate) fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Trains a freshly initialised CAE of the given architecture.
///
/// The loss is the mean squared reconstruction error; `loss_history` holds one
/// mean per epoch, accumulated in sample order while training.
pub fn train_cae(
    dataset: &[ImageTensor],
    arch: ArchConfig,
    config: &TrainConfig,
) -> Result<(CaeModel, Vec<f64>)> {
    let model = CaeModel::new(arch, config.seed)?;
    train_cae_from(model, dataset, config)
}

/// Continues training an existing model.
pub fn train_cae_from(
    mut model: CaeModel,
    dataset: &[ImageTensor],
    config: &TrainConfig,
) -> Result<(CaeModel, Vec<f64>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("empty training dataset"));
    }
    for img in dataset {
        model.check_image(img)?;
    }
    let tensors: Vec<Tensor> = dataset.iter().map(ImageTensor::to_tensor).collect();
    let template = model.zero_grads();
    let mut adam = Adam::new(config, &template);
    let mut shuffler = EpochShuffler::new(dataset.len(), config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    let mut per_sample = vec![0.0; dataset.len()];

    for epoch in 0..config.epochs {
        let order = shuffler.next_epoch().to_vec();
        for batch in order.chunks(config.batch_size) {
            let (mut grads, losses) = accumulate(batch, config.deterministic, &template, |i, g| {
                model.sample_loss_grad(&tensors[i], g)
            });
            for (i, l) in losses {
                per_sample[i] = l;
            }
            super::network::scale_grads(&mut grads, 1.0 / batch.len() as f64);
            adam.step(
                model.encoder.params_mut().chain(model.decoder.params_mut()),
                &grads,
            );
        }
        let loss = ordered_mean(&per_sample);
        if !loss.is_finite() || !model.all_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        history.push(loss);
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streetnet_full_latent_is_640() {
        let arch = ArchConfig::full(ArchId::Streetnet);
        let latent = arch.latent_shape().unwrap();
        assert_eq!(latent, Shape::new(10, 8, 8));
        assert_eq!(latent.len(), 640);
    }

    #[test]
    fn streetview_full_shapes_compose() {
        let arch = ArchConfig::full(ArchId::Streetview);
        // five pooling points take 224 down to 7
        assert_eq!(arch.latent_shape().unwrap(), Shape::new(512, 7, 7));
        let (enc, dec) = arch.layer_specs().unwrap();
        let convs = enc
            .iter()
            .filter(|s| matches!(s, LayerSpec::Conv2d { .. }))
            .count();
        assert_eq!(convs, 12);
        assert_eq!(dec.last(), Some(&LayerSpec::Sigmoid));
    }

    #[test]
    fn desk_variants() {
        let a = ArchConfig::desk(ArchId::Streetnet, 32);
        assert_eq!(a.tokens().unwrap(), ("C8-C5".into(), "TC8-TC1".into()));
        assert_eq!(a.latent_shape().unwrap().len(), 320);
        let a = ArchConfig::desk(ArchId::Streetnet, 64);
        assert_eq!(a.tokens().unwrap(), ("C8-C8-C5".into(), "TC8-TC8-TC1".into()));
        assert_eq!(a.latent_shape().unwrap().len(), 320);
        let a = ArchConfig::desk(ArchId::Streetview, 32);
        assert_eq!(a.latent_shape().unwrap(), Shape::new(8, 4, 4));
        assert!(ArchConfig::desk(ArchId::Streetnet, 48).layer_specs().is_err());
    }

    #[test]
    fn bad_tokens_rejected() {
        assert!(expand_tokens("C8-X3", 1, 1, false).is_err());
        assert!(expand_tokens("C0", 1, 1, false).is_err());
    }

    #[test]
    fn zero_weights_give_half_grey() {
        let mut model = CaeModel::new(ArchConfig::desk(ArchId::Streetnet, 16), 3).unwrap();
        for p in model.encoder.params_mut().chain(model.decoder.params_mut()) {
            p.fill(0.0);
        }
        let img = ImageTensor::new(16, 16, 1, (0..256).map(|i| (i % 7) as f64 / 7.0).collect())
            .unwrap();
        let (z, recon) = model.forward(&[img]).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
        assert!(recon[0].data().iter().all(|v| *v == 0.5));
    }

    #[test]
    fn shape_mismatch_reports_dimensions() {
        let model = CaeModel::new(ArchConfig::desk(ArchId::Streetnet, 16), 3).unwrap();
        let err = model.encode(&ImageTensor::zeros(8, 8, 1)).unwrap_err();
        assert!(err.to_string().contains("1x16x16"), "{err}");
    }

    #[test]
    fn empty_dataset_rejected() {
        let err = train_cae(&[], ArchConfig::desk(ArchId::Streetnet, 16), &TrainConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn divergence_reports_epoch() {
        let img = ImageTensor::new(16, 16, 1, vec![1.0; 256]).unwrap();
        let cfg = TrainConfig {
            learning_rate: f64::MAX,
            epochs: 5,
            ..Default::default()
        };
        match train_cae(&[img], ArchConfig::desk(ArchId::Streetnet, 16), &cfg) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch < 5),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
