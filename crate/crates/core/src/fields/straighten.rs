use std::collections::BTreeMap;

use super::{affine_velocity, AffineField, VelocityField};
use crate::error::{Error, Result};
use crate::flow::{Condition, Latent, TimeGrid};

/// Local error tolerance (mixed absolute/relative) of the flow-map integrator.
pub const FLOW_MAP_TOL: f64 = 1e-12;

const MAX_STEPS: usize = 1_000_000;

/// State `(A, b)` of the coefficient ODEs, packed as `[A, b_0, b_1, ...]`.
type Coeffs = Vec<f64>;

fn rk4_step<R>(rhs: &R, u: f64, y: &[f64], h: f64) -> Result<Coeffs>
where
    R: Fn(f64, &[f64]) -> Result<Coeffs>,
{
    let axpy = |k: &[f64], s: f64| -> Coeffs { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let k1 = rhs(u, y)?;
    let k2 = rhs(u + 0.5 * h, &axpy(&k1, 0.5 * h))?;
    let k3 = rhs(u + 0.5 * h, &axpy(&k2, 0.5 * h))?;
    let k4 = rhs(u + h, &axpy(&k3, h))?;
    Ok(y.iter()
        .enumerate()
        .map(|(i, yi)| yi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Flow map of an affine field between two times, `z(to) = gain * z(from) + shift`.
///
/// Integrates the coefficient ODEs of `dz/dt = -(slope z + offset)`,
/// `dA/du = -slope A` and `db/du = -slope b - offset`, with step-doubling
/// adaptive fourth-order Runge-Kutta (Richardson-extrapolated). Steps shrink
/// where the slope varies fast, e.g. near a data distribution that is
/// almost a point mass.
pub fn flow_map<F: AffineField + ?Sized>(field: &F, from: f64, to: f64, c: &Condition) -> Result<(f64, Vec<f64>)> {
    let rhs = |u: f64, y: &[f64]| -> Result<Coeffs> {
        let s = field.slope(u)?;
        let off = field.offset(u, c)?;
        let mut d = Vec::with_capacity(y.len());
        d.push(-s * y[0]);
        d.extend(y[1..].iter().zip(&off).map(|(bi, oi)| -s * bi - oi));
        Ok(d)
    };

    let mut y: Coeffs = vec![0.0; field.dim() + 1];
    y[0] = 1.0;
    let span = to - from;
    if span == 0.0 {
        return Ok((1.0, y.split_off(1)));
    }
    let mut u = from;
    let mut h = span / 64.0;
    for _ in 0..MAX_STEPS {
        let remaining = to - u;
        if remaining.abs() <= 1e-15 * span.abs() {
            let shift = y.split_off(1);
            return Ok((y[0], shift));
        }
        if h.abs() > remaining.abs() {
            h = remaining;
        }
        let full = rk4_step(&rhs, u, &y, h)?;
        let half = rk4_step(&rhs, u, &y, 0.5 * h)?;
        let two = rk4_step(&rhs, u + 0.5 * h, &half, 0.5 * h)?;
        let err = two
            .iter()
            .zip(&full)
            .map(|(a, b)| (a - b).abs() / 15.0 / (FLOW_MAP_TOL * (1.0 + a.abs())))
            .fold(0.0, f64::max);
        if !err.is_finite() {
            return Err(Error::NonFinite { step: 0, t: u });
        }
        if err <= 1.0 {
            u += h;
            y = two.iter().zip(&full).map(|(a, b)| a + (a - b) / 15.0).collect();
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h.abs() < 1e-14 * span.abs() {
            return Err(Error::Domain(format!("flow map step size underflow at t = {u}")));
        }
    }
    Err(Error::Domain(format!("flow map from {from} to {to} did not converge")))
}

#[derive(Clone, Debug)]
struct WindowMap {
    t_a: f64,
    t_b: f64,
    /// Flow-map gain from `t_b` down to `t_a`.
    gain: f64,
    /// Flow-map shift per condition id.
    shifts: BTreeMap<String, Vec<f64>>,
}

/// Piecewise-straight field built from an affine base field.
///
/// Inside window `(t_a, t_b]` every trajectory is the straight segment from
/// its window-entry state `X_b` to the base flow's image `gain X_b + shift`,
/// traversed at constant velocity. A node shared by two windows belongs to
/// the lower one, so Euler sampling along the grid is exact while Euler
/// inversion from an interior node carries a small error.
#[derive(Clone, Debug)]
pub struct Straightened<F> {
    base: F,
    windows: Vec<WindowMap>,
}

/// Straightens `field` on the windows of `grid` for every condition in
/// `conditions`. Flow maps are computed eagerly.
pub fn straighten<F: AffineField>(field: F, grid: &TimeGrid, conditions: &[Condition]) -> Result<Straightened<F>> {
    if conditions.is_empty() {
        return Err(Error::Config("straightening needs at least one condition".into()));
    }
    let mut windows = Vec::new();
    for (t_a, t_b) in grid.windows() {
        let mut gain = None;
        let mut shifts = BTreeMap::new();
        for c in conditions {
            let (g, s) = flow_map(&field, t_b, t_a, c)?;
            if !(g.is_finite() && g > 0.0) || s.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain(format!(
                    "flow map on window [{t_a}, {t_b}] is degenerate (gain {g})"
                )));
            }
            gain = Some(g);
            shifts.insert(c.id().to_string(), s);
        }
        let gain = gain.expect("conditions checked non-empty");
        windows.push(WindowMap { t_a, t_b, gain, shifts });
    }
    Ok(Straightened { base: field, windows })
}

impl<F> Straightened<F> {
    pub fn base(&self) -> &F {
        &self.base
    }

    /// Window bounds as `(t_a, t_b)` pairs.
    pub fn windows(&self) -> Vec<(f64, f64)> {
        self.windows.iter().map(|w| (w.t_a, w.t_b)).collect()
    }

    fn window(&self, t: f64) -> Result<&WindowMap> {
        let first = self.windows.first().expect("at least one window");
        let last = self.windows.last().expect("at least one window");
        if t < first.t_a || t > last.t_b {
            return Err(Error::Domain(format!(
                "time {t} outside straightened range [{}, {}]",
                first.t_a, last.t_b
            )));
        }
        Ok(self.windows.iter().find(|w| t <= w.t_b).unwrap_or(last))
    }

    /// `1 - tau + tau * gain` with `tau = (t_b - t) / (t_b - t_a)`.
    fn denom(w: &WindowMap, t: f64) -> f64 {
        let tau = (w.t_b - t) / (w.t_b - w.t_a);
        1.0 - tau + tau * w.gain
    }
}

impl<F: AffineField> VelocityField for Straightened<F> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn velocity(&self, z: &Latent, t: f64, c: &Condition) -> Result<Vec<f64>> {
        affine_velocity(self, z, t, c)
    }
}

impl<F: AffineField> AffineField for Straightened<F> {
    fn slope(&self, t: f64) -> Result<f64> {
        let w = self.window(t)?;
        let h = w.t_b - w.t_a;
        Ok((w.gain - 1.0) / (h * Self::denom(w, t)))
    }

    fn offset(&self, t: f64, c: &Condition) -> Result<Vec<f64>> {
        let w = self.window(t)?;
        let shift = w
            .shifts
            .get(c.id())
            .ok_or_else(|| Error::UnknownCondition(c.id().to_string()))?;
        let scale = 1.0 / ((w.t_b - w.t_a) * Self::denom(w, t));
        Ok(shift.iter().map(|s| s * scale).collect())
    }
}
