use serde::Serialize;

use crate::error::{Error, Result};

/// An ordered discretization `t_0 < t_1 < ... < t_N` of a sub-interval of
/// `[0, 1]`, optionally partitioned into windows whose bounds sit on nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
    /// Node indices of the window bounds. Always contains `0` and `N`.
    bounds: Vec<usize>,
}

impl TimeGrid {
    /// Builds a grid from explicit nodes and window bounds (given as times).
    ///
    /// An empty `window_bounds` yields a single window over the whole grid.
    /// The first and last node are always window bounds.
    pub fn new(times: Vec<f64>, window_bounds: &[f64]) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Config("a time grid needs at least two nodes".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times[0] < 0.0 || times[times.len() - 1] > 1.0 {
            return Err(Error::Domain("grid nodes must lie in [0, 1]".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("grid nodes must be strictly increasing".into()));
        }
        let n = times.len() - 1;
        let mut bounds = vec![0, n];
        for &b in window_bounds {
            let idx = times
                .iter()
                .position(|&t| t == b)
                .ok_or_else(|| Error::Config(format!("window bound {b} does not coincide with a grid node")))?;
            bounds.push(idx);
        }
        bounds.sort_unstable();
        bounds.dedup();
        Ok(Self { times, bounds })
    }

    /// `n_steps + 1` equispaced nodes on `[t_lo, t_hi]` with a window bound at
    /// every `n_steps / n_windows`-th node.
    pub fn uniform(n_steps: usize, t_lo: f64, t_hi: f64, n_windows: usize) -> Result<Self> {
        if n_steps == 0 || n_windows == 0 {
            return Err(Error::Config("n_steps and n_windows must be positive".into()));
        }
        if !n_steps.is_multiple_of(n_windows) {
            return Err(Error::Config(format!(
                "n_steps ({n_steps}) is not divisible by n_windows ({n_windows})"
            )));
        }
        if !(0.0..=1.0).contains(&t_lo) || !(0.0..=1.0).contains(&t_hi) {
            return Err(Error::Domain("grid endpoints must lie in [0, 1]".into()));
        }
        if t_lo >= t_hi {
            return Err(Error::Domain(format!("t_lo ({t_lo}) must be below t_hi ({t_hi})")));
        }
        let span = t_hi - t_lo;
        let mut times: Vec<f64> = (0..=n_steps).map(|k| t_lo + span * k as f64 / n_steps as f64).collect();
        times[n_steps] = t_hi;
        let stride = n_steps / n_windows;
        let bounds = (0..=n_windows).map(|w| w * stride).collect();
        Ok(Self { times, bounds })
    }

    /// Number of steps `N`.
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, k: usize) -> Result<f64> {
        self.times.get(k).copied().ok_or(Error::Index {
            index: k,
            len: self.times.len(),
        })
    }

    /// `t_{k+1} - t_k`.
    pub fn dt(&self, k: usize) -> Result<f64> {
        if k >= self.n_steps() {
            return Err(Error::Index {
                index: k,
                len: self.n_steps(),
            });
        }
        Ok(self.times[k + 1] - self.times[k])
    }

    pub fn window_bounds(&self) -> Vec<f64> {
        self.bounds.iter().map(|&i| self.times[i]).collect()
    }

    /// Consecutive windows as `(t_a, t_b)` pairs.
    pub fn windows(&self) -> Vec<(f64, f64)> {
        self.bounds
            .windows(2)
            .map(|w| (self.times[w[0]], self.times[w[1]]))
            .collect()
    }
}
