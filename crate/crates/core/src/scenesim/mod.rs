//! Shoebox scene simulation: image-method room responses, uniform circular arrays,
//! level-controlled mixing of speakers and noise, and dataset I/O.
//!
//! Targets are always the direct-path (line-of-sight) speaker images, so a model
//! trained on these scenes both denoises and dereverberates.

mod array;
mod dataset;
mod pools;
mod rir;
mod scene;

pub use array::ArraySpec;
pub use dataset::{read_dataset, read_scene, write_dataset, write_scene, Manifest, SceneRecord, MANIFEST_VERSION};
pub use pools::{colored_noise, speech_like, synthetic_pools, SignalPool};
pub use rir::{
    direct_path_rir, dist, eyring_absorption, image_method_rir, RirExtent, RoomSpec, SINC_TAPS,
    SPEED_OF_SOUND,
};
pub use scene::{
    direct_rirs_for, generate_split, sample_scene, scene_seed, PoolSpec, Scene, SceneConfig,
    SourceKind, SourceSpec, Task,
};
