//! Encoder, shared trunk and per-level heads.

mod checkpoint;
mod encoder;
mod network;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointHashes};
pub use encoder::{
    load_encoder, tokenize, truncate_pair, Encoder, EncoderSpec, HashEncoder, Pooling, DEFAULT_ENCODER,
    DEFAULT_MAX_TOKENS, MIN_MAX_TOKENS,
};
pub use network::{
    pool_single_label, to_distribution, ForwardCache, HeadOutputs, Linear, ModelConfig, MultiTaskModel, Parameters,
    DEFAULT_DROPOUT,
};
