//! Two-stage learning pipeline: a pretrained base encoder `θ` and a
//! fine-tuned projection head `ω`.

mod config;
mod dataset;
mod encoder;
mod head;
pub mod io;
mod metrics;
mod net;
mod weights;

pub(crate) use net::{dense_accumulate, dense_backward_input, dense_forward, init_params};

pub use config::TrainConfig;
pub use dataset::{make_synthetic_dataset, Dataset, Record, SyntheticSource};
pub use encoder::{
    encode, encode_dataset, pretext_transforms, pretrain_encoder, pretrain_encoder_detailed, representation_dim,
    PretrainOutcome, SignedPermutation,
};
pub use head::{
    finetune_head, finetune_head_on, finetune_head_traced, head_loss_and_gradient, head_probabilities,
    head_smoothness_bound, initial_head, predict,
};
pub use metrics::{accuracy, argmax};
pub use weights::{DenseShape, ShapeTag, WeightVector};
