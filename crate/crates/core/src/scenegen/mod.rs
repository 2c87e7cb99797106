//! Deterministic synthetic crowd scenes built from capsule humanoids.

mod camera;
mod config;
mod humanoid;
mod scene;

use thiserror::Error;

pub use camera::{look_at, project, top_down};
pub use config::{GroundArea, SceneConfig, Split, SplitCounts};
pub use humanoid::{
    build_humanoid, build_humanoid_with, BodyKeypoint, Humanoid, Resolution, RADIUS_SCALE_RANGE,
};
pub use scene::{
    character_pools, derive_seed, generate_dataset, generate_frame, generate_split, Character,
    CharacterPool, DatasetSummary,
};

use crate::anthro::AnthroError;
use crate::data_model::{AnnotationError, KvError, ValidationError};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("point is behind camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("target volume {volume_dm3} dm^3 is unreachable for height {height_m} m")]
    UnreachableVolume { volume_dm3: f64, height_m: f64 },
    #[error(
        "frame {frame_id}: placed only {placed} of {requested} persons without overlap; \
         use fewer persons per frame or a larger placement area"
    )]
    Placement {
        frame_id: String,
        placed: usize,
        requested: usize,
    },
    #[error("{split} identity pool has {size} characters, need at least {needed}")]
    PoolTooSmall { split: String, size: usize, needed: usize },
    #[error("invalid scene config: {0}")]
    Config(String),
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error(transparent)]
    Anthro(#[from] AnthroError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
