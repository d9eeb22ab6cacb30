//! Time discretization and first-order stepping.
//!
//! Time runs from `t = 0` (data) to `t = 1` (noise). A velocity `v` points
//! toward the data end, so a denoising step from `t_{k+1}` to `t_k` is
//! `z + v * dt` and an inversion step from `t_k` to `t_{k+1}` is `z - v * dt`.

mod ddim;
mod grid;
mod latent;
mod step;

pub use ddim::{ddim_invert, ddim_sample, DdimRecord};
pub use grid::TimeGrid;
pub(crate) use latent::{dot, norm};
pub use latent::{Condition, Latent};
pub use step::{denoise_step, evaluate, invert, invert_step, sample, NfeCounter, TrajectoryRecord};
