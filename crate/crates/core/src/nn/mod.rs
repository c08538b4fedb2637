//! Minimal dense neural-network engine in `f64`.

mod embedding;
mod gradcheck;
mod layers;
mod loss;
mod optim;
mod params;
mod tensor;

pub use embedding::{EmbeddingTable, Embeddings, IndexMatrix, Tower, TowerCache};
pub use gradcheck::grad_check;
pub use layers::{Activation, DenseLayer, Mlp, MlpCache};
pub use loss::{bce_loss, mse_loss, sigmoid, sigmoid_scalar, PROB_CLAMP};
pub use optim::{Algorithm, OptimizerState};
pub use params::{GradientSet, Parameterized};
pub use tensor::Tensor;
