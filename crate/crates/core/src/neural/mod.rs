//! Differentiable building blocks, the two autoencoder architectures,
//! stacked autoencoders, MLP heads and Adam training.
//!
//! Everything runs in `f64` on the CPU; weights are stored as `f32` on disk.

pub mod cae;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod mlp;
pub mod network;
pub mod persist;
pub mod stacked;
pub mod tensor;
pub mod train;

pub use cae::{train_cae, train_cae_from, ArchConfig, ArchId, ArchVariant, CaeModel};
pub use gradcheck::{gradient_check, gradient_check_sampled, Objective};
pub use layers::{Layer, LayerSpec};
pub use mlp::{train_mlp_head, MlpModel, SplitMetrics, Task};
pub use network::Sequential;
pub use persist::{load_cae, load_mlp, save_cae, save_mlp};
pub use stacked::{train_stacked_ae, AeKind, StackedAeModel, StackedAeSpec};
pub use tensor::{ImageTensor, Shape, Tensor};
pub use train::TrainConfig;
