use super::guidance::{guidance_velocity, GuidanceConfig, GuidanceMode};
use super::mask::{relevance_from_velocities, threshold_mask, Mask};
use crate::error::{Error, Result};
use crate::fields::VelocityField;
use crate::flow::{denoise_step, evaluate, norm, Condition, Latent, NfeCounter, TimeGrid, TrajectoryRecord};

/// One-step denoised latent `z + dt_k v(z, t_{k+1}, c)`.
pub fn mu<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    z: &Latent,
    k: usize,
    c: &Condition,
    nfe: &mut NfeCounter,
) -> Result<Latent> {
    denoise_step(field, grid, z, k, c, nfe)
}

/// Anchor latents for injected regeneration, with whatever source-branch
/// velocities are already known (`velocities[k]` at `(latents[k], t_k)`).
pub(crate) struct AnchorView<'a> {
    pub latents: &'a [Latent],
    pub velocities: &'a [Vec<f64>],
}

pub(crate) struct StepOutput {
    pub latent: Latent,
    pub guidance: Vec<f64>,
    pub mask: Mask,
}

fn step_mask(v_tgt: &[f64], v_src: &[f64], g: &GuidanceConfig, fixed: Option<&Mask>) -> Mask {
    if !g.mask_enabled {
        return Mask::ones(v_tgt.len());
    }
    match fixed {
        Some(m) => m.clone(),
        None => threshold_mask(&relevance_from_velocities(v_tgt, v_src), g.threshold),
    }
}

/// Injected regeneration step from `t_{k+1}` to `t_k`:
///
/// `a_k + m * dt G + m * [mu(z_hat, c_src) - mu(a_{k+1}, c_src)]`
///
/// where `a` are the anchors and `G` the configured guidance velocity.
/// Evaluates the target and source branches at `z_hat`; the source branch at
/// the anchor comes from the cache, or from the `z_hat` evaluation when the
/// two latents coincide, and is evaluated fresh otherwise.
#[allow(clippy::too_many_arguments)]
pub(crate) fn injected_step<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    anchors: &AnchorView<'_>,
    z_hat: &Latent,
    k: usize,
    c_src: &Condition,
    c_tgt: &Condition,
    g: &GuidanceConfig,
    fixed_mask: Option<&Mask>,
    nfe: &mut NfeCounter,
) -> Result<StepOutput> {
    let dt = grid.dt(k)?;
    let t = grid.time(k + 1)?;
    let len = anchors.latents.len();
    let (Some(anchor_k), Some(anchor_next)) = (anchors.latents.get(k), anchors.latents.get(k + 1)) else {
        return Err(Error::Index { index: k + 1, len });
    };

    let v_tgt = evaluate(field, z_hat, t, c_tgt, k, nfe)?;
    let v_src = evaluate(field, z_hat, t, c_src, k, nfe)?;
    let guidance = guidance_velocity(&v_tgt, &v_src, g.mode, g.scale);
    let mask = step_mask(&v_tgt, &v_src, g, fixed_mask);

    let fresh;
    let v_anchor: &[f64] = match anchors.velocities.get(k + 1) {
        Some(v) => v,
        None if anchor_next == z_hat => &v_src,
        None => {
            fresh = evaluate(field, anchor_next, t, c_src, k, nfe)?;
            &fresh
        }
    };

    let out: Vec<f64> = (0..z_hat.dim())
        .map(|i| {
            let a = anchor_k.as_slice()[i];
            if !mask.is_set(i) {
                return a;
            }
            let mu_hat = z_hat.as_slice()[i] + dt * v_src[i];
            let mu_anchor = anchor_next.as_slice()[i] + dt * v_anchor[i];
            a + dt * guidance[i] + (mu_hat - mu_anchor)
        })
        .collect();
    let latent = Latent::new(out).map_err(|_| Error::NonFinite { step: k, t })?;
    Ok(StepOutput { latent, guidance, mask })
}

/// Un-anchored regeneration step. Without guidance or masking this is plain
/// conditional denoising under `c_tgt`; otherwise the cross-prompt part of
/// the target step is replaced by the (masked) guidance velocity.
#[allow(clippy::too_many_arguments)]
pub(crate) fn free_step<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    z_hat: &Latent,
    k: usize,
    c_src: &Condition,
    c_tgt: &Condition,
    g: &GuidanceConfig,
    fixed_mask: Option<&Mask>,
    nfe: &mut NfeCounter,
) -> Result<StepOutput> {
    if g.mode == GuidanceMode::None && !g.mask_enabled {
        let latent = denoise_step(field, grid, z_hat, k, c_tgt, nfe)?;
        return Ok(StepOutput {
            latent,
            guidance: vec![0.0; z_hat.dim()],
            mask: Mask::ones(z_hat.dim()),
        });
    }
    let dt = grid.dt(k)?;
    let t = grid.time(k + 1)?;
    let v_tgt = evaluate(field, z_hat, t, c_tgt, k, nfe)?;
    let v_src = evaluate(field, z_hat, t, c_src, k, nfe)?;
    let guidance = guidance_velocity(&v_tgt, &v_src, g.mode, g.scale);
    let mask = step_mask(&v_tgt, &v_src, g, fixed_mask);
    let out: Vec<f64> = (0..z_hat.dim())
        .map(|i| {
            let base = z_hat.as_slice()[i] + dt * v_src[i];
            if mask.is_set(i) {
                base + dt * guidance[i]
            } else {
                base
            }
        })
        .collect();
    let latent = Latent::new(out).map_err(|_| Error::NonFinite { step: k, t })?;
    Ok(StepOutput { latent, guidance, mask })
}

pub(crate) fn masked_norm(v: &[f64], mask: &Mask) -> f64 {
    let masked: Vec<f64> = v.iter().zip(mask.values()).map(|(x, m)| x * m).collect();
    norm(&masked)
}

/// Inversion-latent-injection step from `t_{k+1}` to `t_k` using the stored
/// inversion `record` (made under `c_src`) as anchors.
#[allow(clippy::too_many_arguments)]
pub fn ili_step<F: VelocityField + ?Sized>(
    field: &F,
    record: &TrajectoryRecord,
    z_hat: &Latent,
    k: usize,
    c_src: &Condition,
    c_tgt: &Condition,
    g: &GuidanceConfig,
    nfe: &mut NfeCounter,
) -> Result<Latent> {
    if record.condition() != c_src {
        return Err(Error::Domain(format!(
            "record was inverted under `{}`, not `{}`",
            record.condition().id(),
            c_src.id()
        )));
    }
    if k + 1 > record.k_max() {
        return Err(Error::Index {
            index: k + 1,
            len: record.latents().len(),
        });
    }
    let anchors = AnchorView {
        latents: record.latents(),
        velocities: record.velocities(),
    };
    injected_step(field, record.grid(), &anchors, z_hat, k, c_src, c_tgt, g, None, nfe).map(|o| o.latent)
}
