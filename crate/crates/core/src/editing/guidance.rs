use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::VelocityField;
use crate::flow::{dot, evaluate, norm, Condition, Latent, NfeCounter, TimeGrid};

/// Projections onto source velocities shorter than this are treated as zero.
pub const DEGENERATE_SOURCE_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuidanceMode {
    /// Raw cross-prompt difference (pseudo-guidance at unit scale).
    None,
    /// Pseudo-guidance: `w (v_tgt - v_src)`.
    Pg,
    /// Disentangled guidance: `w (v_tgt - proj_{v_src} v_tgt)`.
    Dpg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Recompute the relevance mask at every regeneration step.
    PerStep,
    /// Compute the mask at the first regeneration step and keep it.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub mode: GuidanceMode,
    pub scale: f64,
    pub mask_enabled: bool,
    pub threshold: f64,
    pub mask_mode: MaskMode,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            mode: GuidanceMode::Dpg,
            scale: 2.5,
            mask_enabled: true,
            threshold: 0.4,
            mask_mode: MaskMode::PerStep,
        }
    }
}

impl GuidanceConfig {
    pub fn unguided() -> Self {
        Self {
            mode: GuidanceMode::None,
            scale: 1.0,
            mask_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale >= 0.0) {
            return Err(Error::Config(format!(
                "guidance scale must be finite and >= 0, got {}",
                self.scale
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "mask threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Vector projection of `v_target` onto `v_source`.
///
/// Returns the zero vector when `|v_source| < 1e-12`.
pub fn project(v_target: &[f64], v_source: &[f64]) -> Vec<f64> {
    if v_target == v_source {
        return v_source.to_vec();
    }
    let norm_s = norm(v_source);
    if norm_s < DEGENERATE_SOURCE_NORM {
        return vec![0.0; v_source.len()];
    }
    let coef = dot(v_target, v_source) / (norm_s * norm_s);
    v_source.iter().map(|s| coef * s).collect()
}

/// Guidance velocity for `mode` from already evaluated target and source
/// velocities at the same latent and time.
pub fn guidance_velocity(v_target: &[f64], v_source: &[f64], mode: GuidanceMode, scale: f64) -> Vec<f64> {
    match mode {
        GuidanceMode::None => v_target.iter().zip(v_source).map(|(t, s)| t - s).collect(),
        GuidanceMode::Pg => v_target.iter().zip(v_source).map(|(t, s)| scale * (t - s)).collect(),
        GuidanceMode::Dpg => {
            let p = project(v_target, v_source);
            v_target.iter().zip(&p).map(|(t, p)| scale * (t - p)).collect()
        }
    }
}

fn branch_pair<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    z_hat: &Latent,
    k: usize,
    c_src: &Condition,
    c_tgt: &Condition,
    nfe: &mut NfeCounter,
) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.dt(k)?;
    let t = grid.time(k + 1)?;
    let v_tgt = evaluate(field, z_hat, t, c_tgt, k, nfe)?;
    let v_src = evaluate(field, z_hat, t, c_src, k, nfe)?;
    Ok((v_tgt, v_src))
}

/// Pseudo-guidance `w (v(z, t_{k+1}, c_tgt) - v(z, t_{k+1}, c_src))`.
#[allow(clippy::too_many_arguments)]
pub fn pg_velocity<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    z_hat: &Latent,
    k: usize,
    c_src: &Condition,
    c_tgt: &Condition,
    scale: f64,
    nfe: &mut NfeCounter,
) -> Result<Vec<f64>> {
    let (vt, vs) = branch_pair(field, grid, z_hat, k, c_src, c_tgt, nfe)?;
    Ok(guidance_velocity(&vt, &vs, GuidanceMode::Pg, scale))
}

/// Disentangled guidance: `w` times the part of the target velocity
/// orthogonal to the source velocity.
#[allow(clippy::too_many_arguments)]
pub fn dpg_velocity<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    z_hat: &Latent,
    k: usize,
    c_src: &Condition,
    c_tgt: &Condition,
    scale: f64,
    nfe: &mut NfeCounter,
) -> Result<Vec<f64>> {
    let (vt, vs) = branch_pair(field, grid, z_hat, k, c_src, c_tgt, nfe)?;
    Ok(guidance_velocity(&vt, &vs, GuidanceMode::Dpg, scale))
}
