use super::{affine_velocity, check_time, AffineField, CosineSchedule, EpsilonField, GaussianModel, VelocityField};
use crate::error::Result;
use crate::flow::{Condition, Latent};

/// Probability-flow field of the variance-preserving forward process
/// `z_t = sqrt(ab) x0 + sqrt(1 - ab) eps` applied to a Gaussian data model.
///
/// Marginals are `N(p m_c, S^2 I)` with `p = sqrt(ab)` and
/// `S^2 = ab sigma^2 + 1 - ab`. The deterministic flow preserving them is
/// `dz/dt = p' m_c + (S'/S)(z - p m_c)`; the returned velocity is its
/// negation (toward the data). Trajectories are curved unless `sigma = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct VpFlowField {
    model: GaussianModel,
    schedule: CosineSchedule,
}

impl VpFlowField {
    pub fn new(model: GaussianModel, schedule: CosineSchedule) -> Self {
        Self { model, schedule }
    }

    pub fn model(&self) -> &GaussianModel {
        &self.model
    }

    pub fn schedule(&self) -> &CosineSchedule {
        &self.schedule
    }

    /// Marginal standard deviation `S(t)`.
    pub fn marginal_std(&self, t: f64) -> f64 {
        let ab = self.schedule.alpha_bar(t);
        let s2 = self.model.sigma() * self.model.sigma();
        (ab * s2 + 1.0 - ab).sqrt()
    }

    /// `S'/S`.
    fn log_std_rate(&self, t: f64) -> f64 {
        let p = self.schedule.signal(t);
        let dp = self.schedule.d_signal(t);
        let s2 = self.model.sigma() * self.model.sigma();
        let var = p * p * s2 + 1.0 - p * p;
        p * dp * (s2 - 1.0) / var
    }
}

impl VelocityField for VpFlowField {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn velocity(&self, z: &Latent, t: f64, c: &Condition) -> Result<Vec<f64>> {
        affine_velocity(self, z, t, c)
    }
}

impl AffineField for VpFlowField {
    fn slope(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(-self.log_std_rate(t))
    }

    fn offset(&self, t: f64, c: &Condition) -> Result<Vec<f64>> {
        check_time(t)?;
        let p = self.schedule.signal(t);
        let dp = self.schedule.d_signal(t);
        let scale = -dp + self.log_std_rate(t) * p;
        Ok(self.model.mean(c)?.iter().map(|m| scale * m).collect())
    }
}

impl EpsilonField for VpFlowField {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    /// `E[eps | z_t = z] = sqrt(1 - ab) / S^2 (z - p m_c)`.
    fn eps(&self, z: &Latent, t: f64, c: &Condition) -> Result<Vec<f64>> {
        check_time(t)?;
        let p = self.schedule.signal(t);
        let q = self.schedule.noise(t);
        let var = self.marginal_std(t).powi(2);
        let m = self.model.mean(c)?;
        Ok(z.as_slice()
            .iter()
            .zip(m)
            .map(|(zi, mi)| q / var * (zi - p * mi))
            .collect())
    }

    fn alpha_bar(&self, t: f64) -> f64 {
        self.schedule.alpha_bar(t)
    }
}
