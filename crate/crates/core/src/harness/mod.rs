//! Experiment orchestration: configuration, the round loop over any
//! strategy, cooperative-ratio sweeps, presets and artifact export.

mod config;
mod experiment;
mod presets;
mod sweep;

pub use config::{
    AflSettings, ClientGroup, DataSource, ExperimentConfig, StrategyKind, TrainSettings,
};
pub use experiment::{run_experiment, Experiment, ExperimentOutcome, RoundSink};
pub use presets::{preset, preset_names};
pub use sweep::{run_sweep, BaseConfig, SweepCell, SweepFile, SweepRow, SweepSpec, SweepSummary, SweepVariant};
