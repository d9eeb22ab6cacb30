//! Few-step rectified-flow image-editing mathematics on closed-form toy fields.
//!
//! The crate is split the same way an editing pipeline is:
//!
//! - [`flow`]: time grids, Euler denoise/invert steps, trajectory records and
//!   the DDIM-inversion baseline.
//! - [`fields`]: velocity and noise-prediction fields. Conditional Gaussian
//!   rectified-flow and probability-flow fields, window-wise straightening and
//!   an auxiliary structural-conditioning hook.
//! - [`editing`]: regeneration strategies (no injection, noise injection,
//!   inversion-latent injection), pseudo and disentangled guidance, relevance
//!   masks and the end-to-end edit.
//! - [`metrics`]: reconstruction, consistency and alignment analogs.
//! - [`harness`]: experiment configuration, seeded runs, CSV/JSON/SVG output.

pub mod editing;
pub mod error;
pub mod fields;
pub mod flow;
pub mod harness;
pub mod metrics;

pub use editing::{edit, EditResult, GuidanceConfig, GuidanceMode, Mask, MaskMode, RegenStrategy};
pub use error::{Error, Result};
pub use fields::{
    AffineField, AuxHook, CosineSchedule, EpsilonField, GaussianModel, GaussianRfField, Schedule, Straightened,
    VelocityField, VpFlowField,
};
pub use flow::{Condition, Latent, NfeCounter, TimeGrid, TrajectoryRecord};
pub use metrics::MetricReport;
