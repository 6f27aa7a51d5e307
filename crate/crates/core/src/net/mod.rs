//! The edge classifier: two learned RBF descriptor branches, a 4-layer
//! pre-norm transformer encoder over the `(k, 6)` token matrix, and an MLP
//! decoder, with hand-written backpropagation.

pub mod checkpoint;
pub mod gradcheck;
mod layers;
mod model;
mod params;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{
    assemble_features, decoder_forward, decoder_traced, encoder_layer_traced, forward, forward_traced,
    rbf_branch_traced, rbf_dos_forward, transformer_forward, BranchTrace, DecoderTrace, Descriptors,
    EncoderTrace, FeatureMap, Group, Session, Trace,
};
pub use params::{
    Gradients, Hyper, ModelParameters, TensorInfo, DECODER_MLP, DEFAULT_HEADS, DESCRIPTOR_MLP, ENCODER_LAYERS,
    FEATURE_WIDTH, FFN_HIDDEN, RBF_HIDDEN,
};
