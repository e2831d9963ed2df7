//! Learned estimators built on the network toolkit.

pub mod corrector;
pub mod custom;
pub mod data;
pub mod encode;
pub mod selector;

pub use corrector::{
    resume_corrector, sample_collections, train_corrector, training_gradient_check, CorrectorModel,
    CorrectorSpec,
};
pub use data::StateTable;
pub use encode::{encode_input, CorrectorVariant};
pub use selector::{
    episode_gradient_check, lstm_reconstruct_episode, resume_selector, select_from_logits,
    train_selector_reconstructor, Episode, LstmArch, SelectionMode, SelectorReconstructor,
    SelectorSpec,
};
