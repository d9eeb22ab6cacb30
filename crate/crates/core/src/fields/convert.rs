use super::CosineSchedule;
use crate::error::{Error, Result};

// With p = sqrt(ab), q = sqrt(1 - ab) and z = p x0 + q eps, the
// probability-flow velocity toward the data is
//   v = -(p' x0 + q' eps) = -(p'/p) z + p'/(p q) eps.

/// Velocity implied by a noise prediction `eps` at `(z, t)`.
pub fn velocity_from_eps(schedule: &CosineSchedule, z: &[f64], eps: &[f64], t: f64) -> Vec<f64> {
    let p = schedule.signal(t);
    let dp = schedule.d_signal(t);
    let q = schedule.noise(t);
    let eps_gain = if q > 0.0 { dp / (p * q) } else { 0.0 };
    z.iter().zip(eps).map(|(zi, ei)| -dp / p * zi + eps_gain * ei).collect()
}

/// Noise prediction implied by a velocity `v` at `(z, t)`.
///
/// Undefined where the velocity carries no noise information: at `t = 0`
/// (`1 - ab = 0`) and wherever `d sqrt(ab)/dt` vanishes.
pub fn eps_from_velocity(schedule: &CosineSchedule, z: &[f64], v: &[f64], t: f64) -> Result<Vec<f64>> {
    let p = schedule.signal(t);
    let dp = schedule.d_signal(t);
    let q = schedule.noise(t);
    if q <= 1e-12 {
        return Err(Error::Domain(format!("noise is undefined at t = {t} (alpha_bar = 1)")));
    }
    if dp.abs() <= 1e-12 {
        return Err(Error::Domain(format!(
            "schedule is flat at t = {t}; noise is unidentifiable"
        )));
    }
    let gain = p * q / dp;
    Ok(z.iter().zip(v).map(|(zi, vi)| (vi + dp / p * zi) * gain).collect())
}
