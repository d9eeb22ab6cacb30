use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{affine_velocity, check_time, AffineField, VelocityField};
use crate::error::{Error, Result};
use crate::flow::{Condition, Latent};

/// Isotropic Gaussian data model, one component per condition:
/// `x0 | c ~ N(m_c, sigma^2 I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    means: BTreeMap<String, Vec<f64>>,
    sigma: f64,
}

impl GaussianModel {
    pub fn new(means: BTreeMap<String, Vec<f64>>, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        let dim = match means.values().next() {
            Some(m) => m.len(),
            None => return Err(Error::Config("model needs at least one component".into())),
        };
        if dim == 0 {
            return Err(Error::Config("component means must be non-empty".into()));
        }
        for (id, m) in &means {
            if m.len() != dim {
                return Err(Error::Config(format!(
                    "component `{id}` has dimension {}, expected {dim}",
                    m.len()
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("component `{id}` has a non-finite mean")));
            }
        }
        Ok(Self { means, sigma })
    }

    /// Two components `src` and `tgt` at `(+-separation/2, 0, ...)`.
    pub fn two_component(dim: usize, separation: f64, sigma: f64) -> Result<Self> {
        let mut src = vec![0.0; dim];
        let mut tgt = vec![0.0; dim];
        if dim > 0 {
            src[0] = 0.5 * separation;
            tgt[0] = -0.5 * separation;
        }
        Self::new(
            BTreeMap::from([("src".to_string(), src), ("tgt".to_string(), tgt)]),
            sigma,
        )
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.means.values().next().map_or(0, Vec::len)
    }

    pub fn means(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.means
    }

    pub fn mean(&self, c: &Condition) -> Result<&[f64]> {
        self.mean_by_id(c.id())
    }

    pub fn mean_by_id(&self, id: &str) -> Result<&[f64]> {
        self.means
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownCondition(id.to_string()))
    }

    /// The condition for component `id`; its embedding is the component mean.
    pub fn condition(&self, id: &str) -> Result<Condition> {
        Condition::new(id, self.mean_by_id(id)?.to_vec())
    }

    pub fn conditions(&self) -> Vec<Condition> {
        self.means
            .iter()
            .map(|(id, m)| Condition::new(id.clone(), m.clone()).expect("validated means"))
            .collect()
    }
}

/// Exact marginal rectified-flow velocity for the linear interpolation
/// `z_t = (1 - t) x0 + t eps`, oriented toward the data:
///
/// `v(z, t, c) = E[x0 - eps | z_t = z] = m_c - k(t) (z - (1 - t) m_c)`
///
/// with `k(t) = (t - (1 - t) sigma^2) / ((1 - t)^2 sigma^2 + t^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianRfField {
    model: GaussianModel,
}

impl GaussianRfField {
    pub fn new(model: GaussianModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &GaussianModel {
        &self.model
    }

    fn gain(&self, t: f64) -> f64 {
        let (a, b) = (1.0 - t, t);
        let s2 = self.model.sigma * self.model.sigma;
        (b - a * s2) / (a * a * s2 + b * b)
    }
}

impl VelocityField for GaussianRfField {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn velocity(&self, z: &Latent, t: f64, c: &Condition) -> Result<Vec<f64>> {
        affine_velocity(self, z, t, c)
    }
}

impl AffineField for GaussianRfField {
    fn slope(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(-self.gain(t))
    }

    fn offset(&self, t: f64, c: &Condition) -> Result<Vec<f64>> {
        check_time(t)?;
        let scale = 1.0 + self.gain(t) * (1.0 - t);
        Ok(self.model.mean(c)?.iter().map(|m| scale * m).collect())
    }
}
