//! Pixel-level classification: the multi-task segmentation network, its
//! adversarial critic, losses, training and checkpoints.
//!
//! Layers carry their own backward passes; there is no autodiff graph. All
//! networks are generic over [`Scalar`], so the same code trains in `f32`
//! and is gradient-checked in `f64`.

pub mod adam;
pub mod anet;
pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod mnet;
pub mod tensor;
pub mod train;

pub use adam::Adam;
pub use anet::ANet;
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use layers::{Layer, Mode, Param};
pub use loss::{
    compute_class_weights, cross_entropy_multitask, encode_labels_for_critic, loss_anet, loss_mnet, predict_labels,
};
pub use mnet::{MNet, NetOutput, NetShape};
pub use tensor::{Scalar, Tensor};
pub use train::{StepLosses, TrainConfig, Trainer};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("class weights must be positive")]
    NonPositiveWeight,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at step {step}: l_m={l_m}, l_a={l_a}, ce={ce}")]
    NonFiniteLoss { step: u64, l_m: f64, l_a: f64, ce: f64 },
}
