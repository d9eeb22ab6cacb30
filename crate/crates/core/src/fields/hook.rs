use super::{AffineField, VelocityField};
use crate::error::{Error, Result};
use crate::flow::{Condition, Latent};

/// Reference trajectory plus strength for the auxiliary structural drift.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxHook {
    anchors: Vec<(f64, Latent)>,
    scale: f64,
}

impl AuxHook {
    /// `anchors` must be non-empty, share one dimension and be sorted by time.
    pub fn new(anchors: Vec<(f64, Latent)>, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::Config(format!("hook scale must be >= 0, got {scale}")));
        }
        let Some((_, first)) = anchors.first() else {
            return Err(Error::Config("hook needs at least one anchor".into()));
        };
        let dim = first.dim();
        if anchors.iter().any(|(_, z)| z.dim() != dim) {
            return Err(Error::Config("hook anchors have mixed dimensions".into()));
        }
        if anchors.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config(
                "hook anchors must be sorted by strictly increasing time".into(),
            ));
        }
        Ok(Self { anchors, scale })
    }

    /// Anchors from a trajectory listed at increasing times.
    pub fn from_trajectory(times: &[f64], latents: &[Latent], scale: f64) -> Result<Self> {
        Self::new(times.iter().copied().zip(latents.iter().cloned()).collect(), scale)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.anchors[0].1.dim()
    }

    /// Piecewise-linear interpolation of the anchors, constant beyond the ends.
    pub fn reference(&self, t: f64) -> Vec<f64> {
        let first = &self.anchors[0];
        let last = &self.anchors[self.anchors.len() - 1];
        if t <= first.0 {
            return first.1.as_slice().to_vec();
        }
        if t >= last.0 {
            return last.1.as_slice().to_vec();
        }
        let i = self.anchors.partition_point(|(ta, _)| *ta <= t);
        let (t0, z0) = &self.anchors[i - 1];
        let (t1, z1) = &self.anchors[i];
        let w = (t - t0) / (t1 - t0);
        z0.as_slice()
            .iter()
            .zip(z1.as_slice())
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }
}

/// A field with the drift `scale * (reference(t) - z)` added.
#[derive(Clone, Debug)]
pub struct HookedField<F> {
    base: F,
    hook: AuxHook,
}

pub fn with_aux_hook<F: VelocityField>(field: F, hook: AuxHook) -> Result<HookedField<F>> {
    if hook.dim() != field.dim() {
        return Err(Error::Dimension {
            expected: field.dim(),
            got: hook.dim(),
        });
    }
    Ok(HookedField { base: field, hook })
}

impl<F> HookedField<F> {
    pub fn base(&self) -> &F {
        &self.base
    }

    pub fn hook(&self) -> &AuxHook {
        &self.hook
    }
}

impl<F: VelocityField> VelocityField for HookedField<F> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn velocity(&self, z: &Latent, t: f64, c: &Condition) -> Result<Vec<f64>> {
        let mut v = self.base.velocity(z, t, c)?;
        let s = self.hook.scale;
        if s == 0.0 {
            return Ok(v);
        }
        let r = self.hook.reference(t);
        for ((vi, ri), zi) in v.iter_mut().zip(&r).zip(z.as_slice()) {
            *vi += s * (ri - zi);
        }
        Ok(v)
    }
}

impl<F: AffineField> AffineField for HookedField<F> {
    fn slope(&self, t: f64) -> Result<f64> {
        Ok(self.base.slope(t)? - self.hook.scale)
    }

    fn offset(&self, t: f64, c: &Condition) -> Result<Vec<f64>> {
        let mut off = self.base.offset(t, c)?;
        let s = self.hook.scale;
        if s != 0.0 {
            for (o, r) in off.iter_mut().zip(self.hook.reference(t)) {
                *o += s * r;
            }
        }
        Ok(off)
    }
}
