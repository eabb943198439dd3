//! Minimal self-attention regressor with exact forward maps and hand-derived
//! gradients, all in `f64`.

mod checkpoint;
mod layers;
mod model;
mod optim;
mod train;

pub use checkpoint::{
    export_attention, write_attention_csv, AoaTarget, InputNorm, LabelNorm, ModelCheckpoint, RegionTag, TrainingMeta,
    CHECKPOINT_SCHEMA_VERSION,
};
pub use layers::{
    attention_backward, attention_forward, layer_norm, layer_norm_backward, layer_norm_forward, linear_backward,
    linear_project, patch_embed, self_attention, softmax_rowwise, unpatch, AttentionCache, AttentionGrads,
    AttentionLayer, LayerNormCache, LAYER_NORM_EPS,
};
pub use model::{backward, forward, mse_loss, BlockParams, ForwardCache, NetworkConfig, Params, NUM_OUTPUTS};
pub use optim::{adam_step, Adam, AdamConfig, AdamState};
pub use train::{evaluate_loss, train, train_with_progress, TrainParams};

/// Alias matching the role of the real 2-D tensor in the network.
pub type TensorR2 = crate::linalg::Matrix;
