//! Consistency and alignment analogs for toy latents.

use serde::Serialize;

use crate::editing::Mask;
use crate::error::{Error, Result};
use crate::fields::GaussianModel;
use crate::flow::{Condition, Latent};

/// PSNR of identical inputs.
pub const PSNR_IDENTICAL: f64 = f64::INFINITY;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub mse: f64,
    pub psnr: f64,
    pub consistency: f64,
    pub alignment: f64,
    pub roundtrip: f64,
    pub nfe: u64,
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        })
    }
}

pub fn mse(a: &Latent, b: &Latent) -> Result<f64> {
    check_dims(a.as_slice(), b.as_slice())?;
    let n = a.dim() as f64;
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// `10 log10(peak^2 / mse)`, or [`PSNR_IDENTICAL`] when `mse = 0`.
pub fn psnr(a: &Latent, b: &Latent, peak: f64) -> Result<f64> {
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::Domain(format!("peak must be positive, got {peak}")));
    }
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(PSNR_IDENTICAL);
    }
    Ok(10.0 * (peak * peak / e).log10())
}

/// MSE over the dimensions where `mask` is 0; 0 when that set is empty.
pub fn consistency(a: &Latent, b: &Latent, mask: &Mask) -> Result<f64> {
    check_dims(a.as_slice(), b.as_slice())?;
    check_dims(a.as_slice(), mask.values())?;
    let (sum, n) = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .enumerate()
        .filter(|(i, _)| !mask.is_set(*i))
        .fold((0.0, 0usize), |(s, n), (_, (x, y))| (s + (x - y) * (x - y), n + 1));
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Target-component log-density up to a constant: `-|z - m|^2 / (2 sigma^2)`.
pub fn alignment(z: &Latent, model: &GaussianModel, c_tgt: &Condition) -> Result<f64> {
    let m = model.mean(c_tgt)?;
    check_dims(z.as_slice(), m)?;
    let d2: f64 = z.as_slice().iter().zip(m).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(-d2 / (2.0 * model.sigma() * model.sigma()))
}

/// Default PSNR peak: the largest component-mean norm plus three sigma.
pub fn default_peak(model: &GaussianModel) -> f64 {
    let max_norm = model
        .means()
        .values()
        .map(|m| m.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    max_norm + 3.0 * model.sigma()
}
