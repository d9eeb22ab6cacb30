use serde::Serialize;

use super::guidance::{GuidanceConfig, GuidanceMode, MaskMode};
use super::mask::Mask;
use super::nsli::nsli_anchors;
use super::regen::{free_step, injected_step, masked_norm, AnchorView, StepOutput};
use crate::error::{Error, Result};
use crate::fields::{Schedule, VelocityField};
use crate::flow::{invert, sample, Condition, Latent, NfeCounter, TimeGrid};

/// How regeneration uses the intermediate latents of the source side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum RegenStrategy {
    /// Plain conditional sampling from the deepest inverted latent.
    Nli,
    /// Anchors are freshly noised copies of the input.
    Nsli { schedule: Schedule, seed: u64 },
    /// Anchors are the stored inversion latents.
    Ili,
}

impl RegenStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            RegenStrategy::Nli => "nli",
            RegenStrategy::Nsli { .. } => "nsli",
            RegenStrategy::Ili => "ili",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EditResult {
    /// Edited state at `t_0`.
    pub output: Latent,
    /// Regeneration states from `t_{k_start}` down to `t_0`.
    pub trajectory: Vec<Latent>,
    /// Source-side states from `t_0` up to `t_{k_start}` (inversion or noised anchors).
    pub source_trajectory: Vec<Latent>,
    pub nfe: u64,
    /// Norm of the applied (masked) guidance velocity, one entry per step.
    pub per_step_guidance_norms: Vec<f64>,
}

/// Whether guidance and masking are used only with anchored regeneration,
/// the setting they are designed for. Guided or masked NLI is allowed but
/// flagged.
pub fn is_canonical_configuration(strategy: &RegenStrategy, g: &GuidanceConfig) -> bool {
    !matches!(strategy, RegenStrategy::Nli) || (g.mode == GuidanceMode::None && !g.mask_enabled)
}

/// Field evaluations spent by [`edit`].
///
/// - ILI: `k_start` for inversion, then target and source branch at `z_hat`
///   per step. The source branch at the stored latent is cached, except at
///   the deepest latent where it coincides with `z_hat`.
/// - NLI: `k_start` for inversion plus one per step when unguided and
///   unmasked, two per step otherwise.
/// - NSLI: no inversion; two per step at `z_hat` plus one at each anchor
///   below the starting one.
pub fn analytic_nfe(strategy: &RegenStrategy, g: &GuidanceConfig, k_start: usize) -> u64 {
    let k = k_start as u64;
    match strategy {
        RegenStrategy::Ili => 3 * k,
        RegenStrategy::Nli if g.mode == GuidanceMode::None && !g.mask_enabled => 2 * k,
        RegenStrategy::Nli => 3 * k,
        RegenStrategy::Nsli { .. } => (3 * k).saturating_sub(1),
    }
}

/// Plain conditional sampling under `c_tgt` from `z_start` at `t_{k_start}`.
pub fn nli_edit<F: VelocityField + ?Sized>(
    field: &F,
    z_start: &Latent,
    c_tgt: &Condition,
    grid: &TimeGrid,
    k_start: usize,
) -> Result<EditResult> {
    let mut nfe = NfeCounter::new();
    let trajectory = sample(field, z_start, c_tgt, grid, k_start, &mut nfe)?;
    Ok(EditResult {
        output: trajectory.last().cloned().expect("non-empty trajectory"),
        trajectory,
        source_trajectory: vec![z_start.clone()],
        nfe: nfe.evaluations(),
        per_step_guidance_norms: vec![0.0; k_start],
    })
}

/// Full edit: source-side pass under `c_src` up to `t_{k_start}`, then
/// `k_start` regeneration steps toward `c_tgt`.
#[allow(clippy::too_many_arguments)]
pub fn edit<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    z0: &Latent,
    c_src: &Condition,
    c_tgt: &Condition,
    strategy: &RegenStrategy,
    g: &GuidanceConfig,
    k_start: usize,
) -> Result<EditResult> {
    g.validate()?;
    if k_start > grid.n_steps() {
        return Err(Error::Index {
            index: k_start,
            len: grid.n_steps() + 1,
        });
    }
    let mut nfe = NfeCounter::new();

    let (source_latents, cached_velocities) = match strategy {
        RegenStrategy::Nsli { schedule, seed } => (nsli_anchors(schedule, z0, grid, k_start, *seed)?, Vec::new()),
        RegenStrategy::Ili | RegenStrategy::Nli => {
            let record = invert(field, z0, c_src, grid, k_start, &mut nfe)?;
            (record.latents().to_vec(), record.velocities().to_vec())
        }
    };

    let mut z_hat = source_latents[k_start].clone();
    let mut trajectory = vec![z_hat.clone()];
    let mut norms = Vec::with_capacity(k_start);
    let mut fixed_mask: Option<Mask> = None;
    let anchors = AnchorView {
        latents: &source_latents,
        velocities: &cached_velocities,
    };

    for k in (0..k_start).rev() {
        let fixed = if g.mask_mode == MaskMode::Fixed {
            fixed_mask.as_ref()
        } else {
            None
        };
        let StepOutput {
            latent, guidance, mask, ..
        } = match strategy {
            RegenStrategy::Nli => free_step(field, grid, &z_hat, k, c_src, c_tgt, g, fixed, &mut nfe)?,
            _ => injected_step(field, grid, &anchors, &z_hat, k, c_src, c_tgt, g, fixed, &mut nfe)?,
        };
        norms.push(masked_norm(&guidance, &mask));
        if g.mask_enabled && g.mask_mode == MaskMode::Fixed && fixed_mask.is_none() {
            fixed_mask = Some(mask);
        }
        z_hat = latent;
        trajectory.push(z_hat.clone());
    }

    Ok(EditResult {
        output: z_hat,
        trajectory,
        source_trajectory: source_latents,
        nfe: nfe.evaluations(),
        per_step_guidance_norms: norms,
    })
}
