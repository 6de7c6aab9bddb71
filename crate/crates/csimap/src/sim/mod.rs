//! Simulation harness: floor geometry, the static radio environment, grid
//! mobility, the per-session TDD loop, and experiment sweeps with CSV
//! outputs.

pub mod configfile;
pub mod environment;
pub mod experiment;
pub mod geometry;
pub mod mobility;
pub mod session;

pub use configfile::ExperimentConfig;
pub use environment::Environment;
pub use experiment::{
    build_state, drive, run_band, run_experiment, run_learning, search_band, ExperimentOutputs,
    RunMetrics,
};
pub use geometry::{FloorPlan, GridPos, Position};
pub use mobility::MobilityParams;
pub use session::{
    collect_training_data, EstimationMode, MapParams, MetricMode, RunOptions, SessionRecord,
    SimState, TrainingData, UtClass,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Uplink(#[from] crate::uplink::UplinkError),
    #[error(transparent)]
    Map(#[from] crate::map::MapError),
    #[error(transparent)]
    Quantizer(#[from] crate::quantizer::QuantizerError),
    #[error("mobility: {0}")]
    Mobility(String),
    #[error("config file, line {line}: {reason}")]
    ConfigFile { line: usize, reason: String },
    #[error("CSI map was built for codebook version {map} but the loaded codebook is version {codebook}")]
    CodebookVersion { map: u32, codebook: u32 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
