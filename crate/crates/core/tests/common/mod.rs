//! Independent oracles shared by the integration tests: ordinary least
//! squares for Monte-Carlo regression, closed-form Gaussian flow maps and a
//! schedule written out from scratch.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rfedit::{GaussianModel, Latent};

pub fn lat(v: &[f64]) -> Latent {
    Latent::new(v.to_vec()).unwrap()
}

/// Two components at `a` and `-a`, ids "a" and "b".
pub fn mirrored_model(a: &[f64], sigma: f64) -> GaussianModel {
    let means = BTreeMap::from([
        ("a".to_string(), a.to_vec()),
        ("b".to_string(), a.iter().map(|x| -x).collect()),
    ]);
    GaussianModel::new(means, sigma).unwrap()
}

pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub se_slope: f64,
    pub se_intercept: f64,
}

/// Simple linear regression `y = slope x + intercept` with classical
/// standard errors.
pub fn ols(x: &[f64], y: &[f64]) -> Fit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
        .sum();
    let s2 = rss / (n - 2.0);
    Fit {
        slope,
        intercept,
        se_slope: (s2 / sxx).sqrt(),
        se_intercept: (s2 * (1.0 / n + mx * mx / sxx)).sqrt(),
    }
}

/// Rescaled cosine schedule, written independently of the crate.
pub struct Cosine {
    pub ab_min: f64,
}

impl Cosine {
    pub fn ab(&self, t: f64) -> f64 {
        self.ab_min + (1.0 - self.ab_min) * (PI * t / 2.0).cos().powi(2)
    }

    pub fn d_ab(&self, t: f64) -> f64 {
        -(1.0 - self.ab_min) * PI / 2.0 * (PI * t).sin()
    }

    pub fn p(&self, t: f64) -> f64 {
        self.ab(t).sqrt()
    }

    pub fn q(&self, t: f64) -> f64 {
        (1.0 - self.ab(t)).sqrt()
    }

    pub fn dp(&self, t: f64) -> f64 {
        self.d_ab(t) / (2.0 * self.p(t))
    }

    pub fn dq(&self, t: f64) -> f64 {
        -self.d_ab(t) / (2.0 * self.q(t))
    }
}

/// Gaussian marginal `N(mean_scale(t) m, std(t)^2 I)` transported by its
/// probability flow from `s` to `u`.
fn gaussian_transport(z: &[f64], m: &[f64], (ms, ss): (f64, f64), (mu, su): (f64, f64)) -> Vec<f64> {
    z.iter()
        .zip(m)
        .map(|(zi, mi)| mu * mi + su / ss * (zi - ms * mi))
        .collect()
}

/// Rectified-flow path `(1 - t) x0 + t eps`.
pub fn rf_flow_map(z: &[f64], m: &[f64], sigma: f64, s: f64, u: f64) -> Vec<f64> {
    let sd = |t: f64| ((1.0 - t).powi(2) * sigma * sigma + t * t).sqrt();
    gaussian_transport(z, m, (1.0 - s, sd(s)), (1.0 - u, sd(u)))
}

/// Variance-preserving path `p x0 + q eps`.
pub fn vp_flow_map(z: &[f64], m: &[f64], sigma: f64, sched: &Cosine, s: f64, u: f64) -> Vec<f64> {
    let sd = |t: f64| (sched.ab(t) * sigma * sigma + 1.0 - sched.ab(t)).sqrt();
    gaussian_transport(z, m, (sched.p(s), sd(s)), (sched.p(u), sd(u)))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One regression coefficient: Monte-Carlo estimate against the value the
/// crate reports.
pub struct Coef {
    pub label: String,
    pub estimate: f64,
    pub analytic: f64,
    pub se: f64,
}

impl Coef {
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.analytic).abs() / self.se
    }
}

/// Per-coordinate slope and intercept of an affine map `f`, read off at the
/// origin and the unit vectors.
pub fn affine_coefficients(dim: usize, f: impl Fn(&Latent) -> Vec<f64>) -> Vec<(f64, f64)> {
    let at0 = f(&Latent::zeros(dim));
    (0..dim)
        .map(|j| {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            let v = f(&lat(&e));
            (v[j] - at0[j], at0[j])
        })
        .collect()
}

/// Regresses `target(x0, eps)` on `path(x0, eps)` coordinate-wise over `n`
/// draws of `x0 ~ N(m, sigma^2 I)`, `eps ~ N(0, I)`, and pairs the fit with
/// the crate's coefficients.
#[allow(clippy::too_many_arguments)]
pub fn mc_regression(
    label: &str,
    m: &[f64],
    sigma: f64,
    n: usize,
    seed: u64,
    path: impl Fn(f64, f64) -> f64,
    target: impl Fn(f64, f64) -> f64,
    analytic: &[(f64, f64)],
) -> Vec<Coef> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (j, mj) in m.iter().enumerate() {
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let e: f64 = StandardNormal.sample(&mut rng);
            let x0 = mj + sigma * a;
            xs.push(path(x0, e));
            ys.push(target(x0, e));
        }
        let fit = ols(&xs, &ys);
        out.push(Coef {
            label: format!("{label} slope[{j}]"),
            estimate: fit.slope,
            analytic: analytic[j].0,
            se: fit.se_slope,
        });
        out.push(Coef {
            label: format!("{label} offset[{j}]"),
            estimate: fit.intercept,
            analytic: analytic[j].1,
            se: fit.se_intercept,
        });
    }
    out
}
