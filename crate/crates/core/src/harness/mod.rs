//! Config-driven experiment runner: the Approach-1 baseline/retrained grid,
//! Approach-2 staged refinement, and the table reports.

mod config;
mod pipeline;
mod report;

pub use config::{
    Approach2Config, ConversionConfig, ExperimentConfig, NightSource, RetrainMode, SceneCounts, StageConfig,
    TranslatorSource,
};
pub use pipeline::{
    evaluate_model, prepare_datasets, run_approach1, run_approach2, run_experiment, Approach1Output, Datasets,
    TrainedModel,
};
pub use report::{emit_report, table1_fixture, Cell, DeltaEntry, ExperimentResult, ReportFiles, ReportFormat};
