use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::grid::{run_grid, ExperimentResult, GridConfig};
use crate::neural::{train_cae, ArchConfig, ArchId, CaeModel, ImageTensor, Task, TrainConfig};
use crate::synthdata::{gen_density_corpus, gen_frontage_corpus, Corpus, DensitySpec, FrontageSpec};
use crate::Result;

/// CAE training plus grid settings for one end-to-end corpus run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub arch: ArchConfig,
    pub cae: TrainConfig,
    pub grid: GridConfig,
}

impl PipelineConfig {
    /// Desk-scale defaults for the synthetic intersection-density task.
    pub fn density(seed: u64, raster_size: usize) -> Self {
        PipelineConfig {
            arch: ArchConfig::desk(ArchId::Streetnet, raster_size),
            cae: TrainConfig {
                learning_rate: 2e-3,
                batch_size: 16,
                epochs: 30,
                seed,
                patience: None,
                ..TrainConfig::default()
            },
            grid: GridConfig::new(ArchId::Streetnet, Task::Regression, seed),
        }
    }

    /// Desk-scale defaults for the synthetic 4-class frontage task.
    pub fn frontage(seed: u64, image_size: usize) -> Self {
        PipelineConfig {
            arch: ArchConfig::desk(ArchId::Streetview, image_size),
            cae: TrainConfig {
                learning_rate: 2e-3,
                batch_size: 16,
                epochs: 20,
                seed,
                patience: None,
                ..TrainConfig::default()
            },
            grid: GridConfig::new(ArchId::Streetview, Task::Classification { num_classes: 4 }, seed),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub corpus: Corpus,
    pub cae: CaeModel,
    pub cae_history: Vec<f64>,
    pub latents: Array2<f64>,
    pub results: Vec<ExperimentResult>,
}

/// Trains a CAE on `images`, encodes them and runs the reducer grid on the
/// latent codes.
pub fn run_pipeline(images: &[ImageTensor], targets: &[f64], config: &PipelineConfig) -> Result<(CaeModel, Vec<f64>, Array2<f64>, Vec<ExperimentResult>)> {
    let (cae, history) = train_cae(images, config.arch, &config.cae)?;
    let latents = cae.encode_all(images)?;
    let results = run_grid(latents.view(), targets, &config.grid)?;
    Ok((cae, history, latents, results))
}

fn run_corpus(corpus: Corpus, config: &PipelineConfig) -> Result<PipelineRun> {
    let (cae, cae_history, latents, results) = run_pipeline(&corpus.images, &corpus.labels, config)?;
    Ok(PipelineRun {
        corpus,
        cae,
        cae_history,
        latents,
        results,
    })
}

pub fn density_experiment(spec: &DensitySpec, config: &PipelineConfig) -> Result<PipelineRun> {
    run_corpus(Corpus::from_density(&gen_density_corpus(spec)?), config)
}

pub fn frontage_experiment(spec: &FrontageSpec, config: &PipelineConfig) -> Result<PipelineRun> {
    let items = gen_frontage_corpus(spec)?;
    run_corpus(Corpus::from_frontage(spec, &items), config)
}
