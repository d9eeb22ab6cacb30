//! Velocity and noise-prediction fields.
//!
//! All toy fields here are affine in the latent with an isotropic slope:
//! `v(z, t, c) = slope(t) * z + offset(t, c)`. That structure is what makes
//! closed-form flow maps, and therefore exact window-wise straightening,
//! possible.

mod convert;
mod gaussian;
mod hook;
mod schedule;
mod straighten;
mod vp;

use std::sync::Arc;

pub use convert::{eps_from_velocity, velocity_from_eps};
pub use gaussian::{GaussianModel, GaussianRfField};
pub use hook::{with_aux_hook, AuxHook, HookedField};
pub use schedule::{CosineSchedule, Schedule};
pub use straighten::{flow_map, straighten, Straightened, FLOW_MAP_TOL};
pub use vp::VpFlowField;

use crate::error::{Error, Result};
use crate::flow::{Condition, Latent};

/// A velocity field `v(z, t, c)` pointing toward the data end of time.
pub trait VelocityField {
    fn dim(&self) -> usize;

    fn velocity(&self, z: &Latent, t: f64, c: &Condition) -> Result<Vec<f64>>;
}

/// A velocity field of the form `slope(t) * z + offset(t, c)`.
pub trait AffineField: VelocityField {
    fn slope(&self, t: f64) -> Result<f64>;

    fn offset(&self, t: f64, c: &Condition) -> Result<Vec<f64>>;
}

/// A noise-prediction field with its variance-preserving schedule.
pub trait EpsilonField {
    fn dim(&self) -> usize;

    /// Predicted noise `eps(z, t, c)`.
    fn eps(&self, z: &Latent, t: f64, c: &Condition) -> Result<Vec<f64>>;

    /// Cumulative signal fraction, decreasing in `t`, equal to 1 at `t = 0`.
    fn alpha_bar(&self, t: f64) -> f64;
}

pub(crate) fn affine_velocity<F: AffineField + ?Sized>(
    field: &F,
    z: &Latent,
    t: f64,
    c: &Condition,
) -> Result<Vec<f64>> {
    let slope = field.slope(t)?;
    let mut v = field.offset(t, c)?;
    if v.len() != z.dim() {
        return Err(Error::Dimension {
            expected: v.len(),
            got: z.dim(),
        });
    }
    for (vi, zi) in v.iter_mut().zip(z.as_slice()) {
        *vi += slope * zi;
    }
    Ok(v)
}

macro_rules! forward_field {
    ($($ptr:ty),*) => {$(
        impl<F: VelocityField + ?Sized> VelocityField for $ptr {
            fn dim(&self) -> usize {
                (**self).dim()
            }

            fn velocity(&self, z: &Latent, t: f64, c: &Condition) -> Result<Vec<f64>> {
                (**self).velocity(z, t, c)
            }
        }
    )*};
}

forward_field!(&F, Box<F>, Arc<F>);

macro_rules! forward_affine {
    ($($ptr:ty),*) => {$(
        impl<F: AffineField + ?Sized> AffineField for $ptr {
            fn slope(&self, t: f64) -> Result<f64> {
                (**self).slope(t)
            }

            fn offset(&self, t: f64, c: &Condition) -> Result<Vec<f64>> {
                (**self).offset(t, c)
            }
        }
    )*};
}

forward_affine!(&F, Box<F>, Arc<F>);

/// A velocity field independent of `z`, `t` and `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantField {
    value: Vec<f64>,
}

impl ConstantField {
    pub fn new(value: Vec<f64>) -> Self {
        Self { value }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(vec![0.0; dim])
    }
}

impl VelocityField for ConstantField {
    fn dim(&self) -> usize {
        self.value.len()
    }

    fn velocity(&self, _z: &Latent, _t: f64, _c: &Condition) -> Result<Vec<f64>> {
        Ok(self.value.clone())
    }
}

impl AffineField for ConstantField {
    fn slope(&self, _t: f64) -> Result<f64> {
        Ok(0.0)
    }

    fn offset(&self, _t: f64, _c: &Condition) -> Result<Vec<f64>> {
        Ok(self.value.clone())
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("time {t} outside [0, 1]")))
    }
}
