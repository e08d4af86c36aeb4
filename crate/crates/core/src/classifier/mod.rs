//! The softmax network, its training loop, and the end-to-end pipeline.

mod network;
mod pipeline;
mod train;

pub use network::{
    argmax, forward, gradient_check, loss, loss_and_gradients, loss_from_logits, one_hot, relative_error,
    softmax_rows, ClassifierModel, Dense, Gradients, FD_STEP, PROB_FLOOR,
};
pub use pipeline::{fit_projection, PipelineConfig, Prediction, TrainedPipeline, TrainingMeta};
pub use train::{train, Adam, EpochRecord, NetworkConfig, TrainOutcome, ARCHITECTURES, DEFAULT_ARCHITECTURE};
