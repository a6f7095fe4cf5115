//! The encoder / decoder / detector network and its two training stages.
//!
//! The encoder starts with a matched-filter layer: one long kernel per input
//! channel, initialized from response templates ([`ModelVariant::DeepMf`])
//! or at random ([`ModelVariant::Standard`]). Stage one trains encoder and
//! decoder to reconstruct 2 s windows; stage two swaps the decoder for a
//! detector head that emits per-point event probabilities.

mod arch;
mod check;
mod dataset;
mod infer;
mod train;

pub use check::{check_model_gradients, ModelObjective};
pub use arch::{ArchitectureConfig, DeepMatchModel, HeadKind, ModelVariant};
pub use dataset::{
    make_detection_dataset, positive_starts, DetectionConfig, DetectionDataset, DetectionSample,
    SubjectRecording,
};
pub use infer::{aggregate_windows, infer, DetectionTrace};
pub use train::{finetune, pretrain, pretrain_inputs, TrainHistory, TrainingConfig};
