//! Convolutional autoencoder + linear PCA ("ConvPCA") over rasterized street
//! networks and street-level images.
//!
//! The pipeline is: images → [`neural::CaeModel`] latents → [`latent::PcaModel`]
//! components, which are then visualised (sweeps, extremes, maps) or fed to
//! small MLP heads to predict urban and network statistics.

pub mod error;
pub mod experiments;
pub mod io;
pub mod latent;
pub mod neural;
pub mod spatialstats;
pub mod streetgraph;
pub mod synthdata;
pub mod urbangeom;

pub use error::{Error, Result};

/// Format version written into every manifest produced by this crate.
pub const FORMAT_VERSION: &str = "convpca/1";
