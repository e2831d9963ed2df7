//! Small neural-network toolkit with hand-written forward and backward passes.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod mlp;
pub mod train;
pub mod weights;

pub use adam::{adam_step, Adam, AdamConfig};
pub use checkpoint::Checkpoint;
pub use lstm::{Lstm, LstmState, StateGrad};
pub use mlp::{mlp_backward, mlp_forward, Mlp};
pub use train::{TrainConfig, TrainingCurve};
pub use weights::{Grads, ModelWeights, TensorId};
