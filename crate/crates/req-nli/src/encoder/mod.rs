//! The trainable entailment encoder: vocabulary, model, optimizer,
//! training loop, and checkpointing.

pub mod checkpoint;
pub mod model;
pub mod optim;
pub mod train;
pub mod vocab;

pub use model::{bce_with_logits, sigmoid, ModelDims};
pub use train::{
    lr_sweep, Encoder, EpochStats, LabeledPair, LrSweepEntry, TrainConfig, TrainReport, LR_SWEEP,
    SCRATCH,
};
pub use vocab::{tokenize_pair, TokenizedPair, Vocab};
