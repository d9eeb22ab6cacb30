use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in latent space.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Latent(Vec<f64>);

impl Latent {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("latent must have at least one dimension".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("latent entries must be finite".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self + scale * direction`, componentwise.
    pub fn offset(&self, direction: &[f64], scale: f64) -> Latent {
        debug_assert_eq!(self.0.len(), direction.len());
        Latent(self.0.iter().zip(direction).map(|(z, d)| z + scale * d).collect())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn distance(&self, other: &Latent) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Debug for Latent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl AsRef<[f64]> for Latent {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A prompt stand-in: an opaque identifier plus the embedding fields consume.
///
/// Two conditions are equal when their identifiers are equal.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Condition {
    id: String,
    embedding: Vec<f64>,
}

impl Condition {
    pub fn new(id: impl Into<String>, embedding: Vec<f64>) -> Result<Self> {
        if embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("condition embedding must be finite".into()));
        }
        Ok(Self {
            id: id.into(),
            embedding,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }
}

impl PartialEq for Condition {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Condition {}
