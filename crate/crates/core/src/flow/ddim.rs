use serde::Serialize;

use super::{Condition, Latent, NfeCounter, TimeGrid};
use crate::error::{Error, Result};
use crate::fields::EpsilonField;

/// Latents produced by DDIM inversion and the noise predictions used to
/// produce them. `eps[k]` is `eps(latents[k], t_{k+1})`.
#[derive(Clone, Debug, Serialize)]
pub struct DdimRecord {
    latents: Vec<Latent>,
    eps: Vec<Vec<f64>>,
    nfe: u64,
}

impl DdimRecord {
    pub fn latents(&self) -> &[Latent] {
        &self.latents
    }

    pub fn eps(&self) -> &[Vec<f64>] {
        &self.eps
    }

    pub fn nfe(&self) -> u64 {
        self.nfe
    }
}

fn alpha_bar_checked<E: EpsilonField + ?Sized>(field: &E, t: f64) -> Result<f64> {
    let a = field.alpha_bar(t);
    if a.is_finite() && a > 0.0 && a <= 1.0 {
        Ok(a)
    } else {
        Err(Error::Config(format!("alpha_bar({t}) = {a} is outside (0, 1]")))
    }
}

fn eval_eps<E: EpsilonField + ?Sized>(
    field: &E,
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
    let e = field.eps(z, t, c)?;
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { step, t });
    }
    Ok(e)
}

/// DDIM inversion. Each step reuses the noise prediction at the previous
/// latent for the new time, `e_k = eps(z_{t_k}, t_{k+1})`, and moves along
/// the implied clean estimate:
///
/// `z_{t_{k+1}} = sqrt(a_{k+1}) x0_k + sqrt(1 - a_{k+1}) e_k`,
/// `x0_k = (z_{t_k} - sqrt(1 - a_k) e_k) / sqrt(a_k)`.
///
/// One evaluation per step. At `t_0` (`a = 1`) the clean estimate is the
/// input itself.
pub fn ddim_invert<E: EpsilonField + ?Sized>(
    field: &E,
    z0: &Latent,
    c: &Condition,
    grid: &TimeGrid,
    k_max: usize,
    nfe: &mut NfeCounter,
) -> Result<DdimRecord> {
    if k_max > grid.n_steps() {
        return Err(Error::Index {
            index: k_max,
            len: grid.n_steps() + 1,
        });
    }
    for k in 0..=k_max {
        alpha_bar_checked(field, grid.time(k)?)?;
    }
    let start = nfe.evaluations();
    let mut latents = vec![z0.clone()];
    let mut eps = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let t_next = grid.time(k + 1)?;
        let a_next = alpha_bar_checked(field, t_next)?;
        let a_cur = alpha_bar_checked(field, grid.time(k)?)?;
        let e = eval_eps(field, &latents[k], t_next, c, k, nfe)?;
        let (sa_cur, sn_cur) = (a_cur.sqrt(), (1.0 - a_cur).sqrt());
        let (sa_next, sn_next) = (a_next.sqrt(), (1.0 - a_next).sqrt());
        let next: Vec<f64> = latents[k]
            .as_slice()
            .iter()
            .zip(&e)
            .map(|(z, n)| {
                let x0 = (z - sn_cur * n) / sa_cur;
                sa_next * x0 + sn_next * n
            })
            .collect();
        let next = Latent::new(next).map_err(|_| Error::NonFinite { step: k, t: t_next })?;
        latents.push(next);
        eps.push(e);
    }
    Ok(DdimRecord {
        latents,
        eps,
        nfe: nfe.evaluations() - start,
    })
}

/// Deterministic DDIM sampling from `t_{k_start}` down to `t_0`.
pub fn ddim_sample<E: EpsilonField + ?Sized>(
    field: &E,
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
    let mut trajectory = vec![z_init.clone()];
    for k in (0..k_start).rev() {
        let t_hi = grid.time(k + 1)?;
        let a_hi = alpha_bar_checked(field, t_hi)?;
        let a_lo = alpha_bar_checked(field, grid.time(k)?)?;
        let z = trajectory.last().unwrap();
        let e = eval_eps(field, z, t_hi, c, k, nfe)?;
        let (sa_hi, sn_hi) = (a_hi.sqrt(), (1.0 - a_hi).sqrt());
        let (sa_lo, sn_lo) = (a_lo.sqrt(), (1.0 - a_lo).sqrt());
        let next: Vec<f64> = z
            .as_slice()
            .iter()
            .zip(&e)
            .map(|(x, n)| {
                let x0 = (x - sn_hi * n) / sa_hi;
                sa_lo * x0 + sn_lo * n
            })
            .collect();
        let next = Latent::new(next).map_err(|_| Error::NonFinite { step: k, t: t_hi })?;
        trajectory.push(next);
    }
    Ok(trajectory)
}
