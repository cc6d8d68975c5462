//! A small CPU detector with hand-derived gradients, its training loop and
//! checkpoint format.

mod checkpoint;
pub mod efpn;
pub mod gradcheck;
pub mod network;
pub mod ops;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, sidecar_path, Sidecar, TensorEntry};
pub use efpn::{efpn_fuse, EfpnConfig, FusionWeights};
pub use network::{
    forward, forward_map, loss_and_grad, loss_and_grad_map, loss_map, FeaturePyramid, Layer, LossEval, ModelConfig,
    ModelOutput, Params, Targets, HEAD_STRIDE, INPUT_MULTIPLE, LEVELS,
};
pub use tensor::FeatureMap;
pub use train::{
    heat_at_points, learning_rate, log_to_jsonl, predict, prepare_samples, scores_auc, train_toy, EpochLog, Hyper,
    TrainOutcome, TrainSample,
};
