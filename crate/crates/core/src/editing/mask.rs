use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::VelocityField;
use crate::flow::{evaluate, Condition, Latent, NfeCounter, TimeGrid};

/// Binary per-dimension gate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mask(Vec<f64>);

impl Mask {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Domain("mask entries must be 0 or 1".into()));
        }
        Ok(Self(values))
    }

    pub fn ones(dim: usize) -> Self {
        Self(vec![1.0; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_set(&self, i: usize) -> bool {
        self.0[i] == 1.0
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&v| v == 1.0).count()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Per-dimension `|v_tgt - v_src|`, min-max normalized to `[0, 1]`.
///
/// An all-zero difference maps to all zeros. A constant non-zero difference
/// marks every dimension fully relevant.
pub fn relevance_from_velocities(v_target: &[f64], v_source: &[f64]) -> Vec<f64> {
    let diff: Vec<f64> = v_target.iter().zip(v_source).map(|(a, b)| (a - b).abs()).collect();
    let max = diff.iter().copied().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return vec![0.0; diff.len()];
    }
    let min = diff.iter().copied().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if range == 0.0 {
        return vec![1.0; diff.len()];
    }
    diff.iter().map(|d| (d - min) / range).collect()
}

/// Relevance of each dimension to the edit at `(z_hat, t_{k+1})`.
/// Costs two field evaluations.
pub fn relevance_map<F: VelocityField + ?Sized>(
    field: &F,
    grid: &TimeGrid,
    z_hat: &Latent,
    k: usize,
    c_src: &Condition,
    c_tgt: &Condition,
    nfe: &mut NfeCounter,
) -> Result<Vec<f64>> {
    grid.dt(k)?;
    let t = grid.time(k + 1)?;
    let vt = evaluate(field, z_hat, t, c_tgt, k, nfe)?;
    let vs = evaluate(field, z_hat, t, c_src, k, nfe)?;
    Ok(relevance_from_velocities(&vt, &vs))
}

/// `m_i = 1` iff `relevance_i > threshold`.
pub fn threshold_mask(relevance: &[f64], threshold: f64) -> Mask {
    Mask(
        relevance
            .iter()
            .map(|&r| if r > threshold { 1.0 } else { 0.0 })
            .collect(),
    )
}
