//! End-to-end experiment: dataset synthesis, four-cell training, evaluation
//! on a frozen human-only validation set, and reporting.

pub mod commands;
pub mod config;
pub mod format;

pub use commands::{
    cmd_eval, cmd_eval_files, cmd_report, cmd_sar, cmd_synth, cmd_train, format_metrics, run_experiment, Layout,
    Report, SarSummary, SynthSummary, TrainSummary,
};
pub use config::{ExperimentConfig, TrainingMix};
