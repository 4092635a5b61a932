//! The FaSNet model: NCC features and a frame embedding feed two temporal convolutional
//! networks whose gated outputs are time-domain beamforming filters.
//!
//! Stage one estimates filters for the reference microphone (channel 0) from its
//! embedding and the pooled NCC against all other microphones. Stage two compares each
//! remaining microphone with the stage-one output and estimates its filter with shared
//! weights. The filtered frames are summed and overlap-added.
//!
//! Gradients come from a small reverse-mode tape ([`Graph`]).

mod checkpoint;
mod config;
mod fasnet;
mod gradcheck;
mod graph;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use config::FasnetConfig;
pub use fasnet::{
    embed, fasnet_forward, fasnet_graph, gated_filters, tcn_forward, FasnetOutput, ForwardPass,
};
pub use gradcheck::{gradcheck, random_example, GradcheckOptions, GradcheckReport, GroupError};
pub use graph::{Graph, Var};
pub use model::{count_params, init_model, FasnetModel, Param};
pub use train::{
    example_loss_and_grad, pit_objective, read_trace, Example, OptimizerKind, OptimizerState,
    StepRecord, TrainConfig, Trainer,
};
