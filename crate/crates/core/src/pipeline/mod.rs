//! Experiment configuration, runners and report writers.

mod config;
mod dpd;
mod experiment;

pub use config::{
    DpdSettings, ExperimentConfig, IlcSettings, PresetSource, ScheduleSpec, StandardLassoSettings,
};
pub use dpd::Predistorter;
pub use experiment::{
    evaluate_through_pa, exp1, exp2, matched_count_lasso, prepare, run_experiment1, run_experiment1_on,
    run_experiment2, run_experiment2_on, standard_lasso, fit_problem, write_outputs, ComparisonReport, ComparisonRow, Experiment1,
    LassoFit, ModelStats, Prepared, METHODS,
};
