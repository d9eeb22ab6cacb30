use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance-preserving cosine schedule rescaled so that
/// `alpha_bar(0) = 1` and `alpha_bar(1) = alpha_bar_min`:
///
/// `alpha_bar(t) = a_min + (1 - a_min) cos^2(pi t / 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineSchedule {
    alpha_bar_min: f64,
}

impl Default for CosineSchedule {
    fn default() -> Self {
        Self { alpha_bar_min: 1e-4 }
    }
}

impl CosineSchedule {
    pub fn new(alpha_bar_min: f64) -> Result<Self> {
        if !(alpha_bar_min > 0.0 && alpha_bar_min < 1.0) {
            return Err(Error::Config(format!(
                "alpha_bar_min must lie in (0, 1), got {alpha_bar_min}"
            )));
        }
        Ok(Self { alpha_bar_min })
    }

    pub fn alpha_bar_min(&self) -> f64 {
        self.alpha_bar_min
    }

    pub fn alpha_bar(&self, t: f64) -> f64 {
        let c = (0.5 * PI * t).cos();
        self.alpha_bar_min + (1.0 - self.alpha_bar_min) * c * c
    }

    pub fn d_alpha_bar(&self, t: f64) -> f64 {
        -(1.0 - self.alpha_bar_min) * 0.5 * PI * (PI * t).sin()
    }

    /// `sqrt(alpha_bar)`.
    pub fn signal(&self, t: f64) -> f64 {
        self.alpha_bar(t).sqrt()
    }

    /// Time derivative of `sqrt(alpha_bar)`.
    pub fn d_signal(&self, t: f64) -> f64 {
        self.d_alpha_bar(t) / (2.0 * self.signal(t))
    }

    /// `sqrt(1 - alpha_bar)`.
    pub fn noise(&self, t: f64) -> f64 {
        (1.0 - self.alpha_bar(t)).max(0.0).sqrt()
    }
}

/// Forward-noising interpolation `z_t = signal(t) x0 + noise(t) eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// Rectified-flow interpolation: `signal = 1 - t`, `noise = t`.
    Linear,
    /// Variance-preserving: `signal = sqrt(alpha_bar)`, `noise = sqrt(1 - alpha_bar)`.
    Cosine(CosineSchedule),
}

impl Schedule {
    pub fn coefficients(&self, t: f64) -> (f64, f64) {
        match self {
            Schedule::Linear => (1.0 - t, t),
            Schedule::Cosine(s) => (s.signal(t), s.noise(t)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_monotonicity() {
        let s = CosineSchedule::default();
        assert_eq!(s.alpha_bar(0.0), 1.0);
        assert!((s.alpha_bar(1.0) - 1e-4).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for i in 0..=100 {
            let a = s.alpha_bar(i as f64 / 100.0);
            assert!(a < prev && a > 0.0 && a <= 1.0);
            prev = a;
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let s = CosineSchedule::default();
        for &t in &[0.1, 0.37, 0.5, 0.9] {
            let h = 1e-6;
            let fd = (s.alpha_bar(t + h) - s.alpha_bar(t - h)) / (2.0 * h);
            assert!((fd - s.d_alpha_bar(t)).abs() < 1e-8);
            let fd = (s.signal(t + h) - s.signal(t - h)) / (2.0 * h);
            assert!((fd - s.d_signal(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_out_of_range_floor() {
        assert!(CosineSchedule::new(0.0).is_err());
        assert!(CosineSchedule::new(1.0).is_err());
    }
}
