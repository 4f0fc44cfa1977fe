//! Second-by-second oxygen uptake (V̇O₂) estimation from wearable-sensor
//! features with a causal temporal convolutional network, plus the
//! surrounding experiment pipeline: exercise-protocol generation, a
//! cardiorespiratory simulator, windowed datasets, training and grid search,
//! and agreement/activity-classification evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod autodiff;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod ops;
pub mod optim;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod sim;
pub mod store;
pub mod tensor;
pub mod train;

pub use autodiff::{Gradients, Tape, Var};
pub use config::RunConfig;
pub use data::{Feature, FeatureScaler, FeatureSet, ParticipantSplit, ProtocolKind, ProtocolRecording, WindowDataset};
pub use error::{Error, ErrorClass, Result};
pub use eval::{BlandAltmanReport, ConfusionMatrix3, MetsCategory, ProtocolPrediction};
pub use model::{param_count, receptive_field, Mode, ModelWeights, TcnConfig, TcnModel};
pub use optim::{adam_step, AdamState};
pub use rng::RngStream;
pub use sim::{CohortMember, ParticipantProfile, SimSettings};
pub use store::SavedModel;
pub use tensor::Tensor;
pub use train::{grid_search, train, EpochRecord, GridResult, TrainConfig};
