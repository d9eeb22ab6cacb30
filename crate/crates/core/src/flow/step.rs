use serde::Serialize;

use super::{Condition, Latent, TimeGrid};
use crate::error::{Error, Result};
use crate::fields::VelocityField;

/// Counts velocity-field (or noise-field) evaluations within one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct NfeCounter {
    evaluations: u64,
}

impl NfeCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub(crate) fn tick(&mut self) {
        self.evaluations += 1;
    }
}

/// Evaluates `field` once, counting the call and rejecting non-finite output.
///
/// `step` is only used to label errors.
pub fn evaluate<F: VelocityField + ?Sized>(
    field: &F,
    z: &Latent,
    t: f64,
    c: &Condition,
    step: usize,
    nfe: &mut NfeCounter,
) -> Result<Vec<f64>> {
    if z.dim() != field.dim() {
        return Err(Error::Dimension {
            expected: field.dim(),
            got: z.dim(),
        });
    }
    nfe.tick();
    let v = field.velocity(z, t, c)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { step, t });
    }
    Ok(v)
}

fn check_finite(z: &Latent, step: usize, t: f64) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step, t })
    }
}

/// One Euler denoising step from `t_{k+1}` to `t_k`: `z + v(z, t_{k+1}, c) dt_k`.
pub fn denoise_step<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    z: &Latent,
    k: usize,
    c: &Condition,
    nfe: &mut NfeCounter,
) -> Result<Latent> {
    let dt = grid.dt(k)?;
    let t = grid.time(k + 1)?;
    check_finite(z, k, t)?;
    let v = evaluate(field, z, t, c, k, nfe)?;
    let out = z.offset(&v, dt);
    check_finite(&out, k, t)?;
    Ok(out)
}

/// One Euler inversion step from `t_k` to `t_{k+1}`: `z - v(z, t_k, c) dt_k`.
pub fn invert_step<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    z: &Latent,
    k: usize,
    c: &Condition,
    nfe: &mut NfeCounter,
) -> Result<Latent> {
    let dt = grid.dt(k)?;
    let t = grid.time(k)?;
    check_finite(z, k, t)?;
    let v = evaluate(field, z, t, c, k, nfe)?;
    let out = z.offset(&v, -dt);
    check_finite(&out, k, t)?;
    Ok(out)
}

/// Inverted latents and the source-branch velocities evaluated along them.
///
/// `velocities[k]` is `v(latents[k], t_k, condition)` and
/// `latents[k + 1] == latents[k] - velocities[k] * dt_k` holds exactly.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRecord {
    grid: TimeGrid,
    condition: Condition,
    latents: Vec<Latent>,
    velocities: Vec<Vec<f64>>,
    nfe: u64,
}

impl TrajectoryRecord {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn condition(&self) -> &Condition {
        &self.condition
    }

    pub fn latents(&self) -> &[Latent] {
        &self.latents
    }

    pub fn velocities(&self) -> &[Vec<f64>] {
        &self.velocities
    }

    /// Deepest step index reached (`latents.len() - 1`).
    pub fn k_max(&self) -> usize {
        self.latents.len() - 1
    }

    pub fn nfe(&self) -> u64 {
        self.nfe
    }

    pub fn latent(&self, k: usize) -> Result<&Latent> {
        self.latents.get(k).ok_or(Error::Index {
            index: k,
            len: self.latents.len(),
        })
    }

    /// Cached `v(latents[k], t_k, condition)`, if inversion evaluated it.
    pub fn velocity(&self, k: usize) -> Option<&[f64]> {
        self.velocities.get(k).map(Vec::as_slice)
    }
}

/// Euler inversion from `z0` at `t_0` up to `t_{k_max}`, keeping every
/// intermediate latent and velocity.
pub fn invert<F: VelocityField + ?Sized>(
    field: &F,
    z0: &Latent,
    c: &Condition,
    grid: &TimeGrid,
    k_max: usize,
    nfe: &mut NfeCounter,
) -> Result<TrajectoryRecord> {
    if k_max > grid.n_steps() {
        return Err(Error::Index {
            index: k_max,
            len: grid.n_steps() + 1,
        });
    }
    check_finite(z0, 0, grid.time(0)?)?;
    let start = nfe.evaluations();
    let mut latents = Vec::with_capacity(k_max + 1);
    let mut velocities = Vec::with_capacity(k_max);
    latents.push(z0.clone());
    for k in 0..k_max {
        let t = grid.time(k)?;
        let z = &latents[k];
        let v = evaluate(field, z, t, c, k, nfe)?;
        let next = z.offset(&v, -grid.dt(k)?);
        check_finite(&next, k, t)?;
        latents.push(next);
        velocities.push(v);
    }
    Ok(TrajectoryRecord {
        grid: grid.clone(),
        condition: c.clone(),
        latents,
        velocities,
        nfe: nfe.evaluations() - start,
    })
}

/// Euler sampling from `z_init` at `t_{k_start}` down to `t_0`.
///
/// Returns `k_start + 1` latents, first the initial state, last the `t_0`
/// state.
pub fn sample<F: VelocityField + ?Sized>(
    field: &F,
    z_init: &Latent,
    c: &Condition,
    grid: &TimeGrid,
    k_start: usize,
    nfe: &mut NfeCounter,
) -> Result<Vec<Latent>> {
    if k_start > grid.n_steps() {
        return Err(Error::Index {
            index: k_start,
            len: grid.n_steps() + 1,
        });
    }
    let mut trajectory = Vec::with_capacity(k_start + 1);
    trajectory.push(z_init.clone());
    for k in (0..k_start).rev() {
        let next = denoise_step(field, grid, trajectory.last().unwrap(), k, c, nfe)?;
        trajectory.push(next);
    }
    Ok(trajectory)
}
