//! Experiment configuration, end-to-end pipelines, rate fits and the
//! perceptron check.

pub mod config;
pub mod experiment;
pub mod figures;
pub mod perceptron;
pub mod rates;
pub mod record;

pub use config::{DatasetSpec, ExperimentConfig, RhoRule, StepRule};
pub use experiment::{run_experiment, write_records, Constants, ExperimentOutput};
pub use figures::{reproduce_figure, Figure, FigurePaths};
pub use perceptron::{perceptron_check, PerceptronReport};
pub use rates::{fit_rate, RateFit, Regime};
