//! Experiment configuration, seeded runs and result emission.
//!
//! Every experiment turns an [`ExperimentConfig`] into a [`RunOutput`]:
//! rows (one per variant and sample), wall times kept apart from the rows so
//! that `runs.csv`/`runs.json` are byte-reproducible, optional figures and
//! directional checks.

mod config;
mod output;
mod run;
mod seeds;
mod svg;

use thiserror::Error;

pub use config::{
    ConsistencyRegion, ExperimentConfig, FieldKind, FieldSpec, GridSpec, Inversion, MethodSpec, MetricsSpec,
    NoiseSchedule, OutputFormat, OutputSpec, RunSpec, StrategyKind, SweepParam, SweepSpec,
};
pub use output::{fingerprint, write_output, RunRow, Timing, CSV_COLUMNS};
pub use run::{compare, edit_runs, plot, plot_figure, reconstruct, sweep, Check, RunOutput, VariantSummary};
pub use seeds::{draw_source, nsli_seed, sample_seed, splitmix64};
pub use svg::{render_svg, Component, Figure, Polyline, Stroke};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error(transparent)]
    Core(#[from] crate::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_)
            | HarnessError::Core(crate::Error::Config(_))
            | HarnessError::Core(crate::Error::UnknownCondition(_)) => 2,
            _ => 1,
        }
    }
}
