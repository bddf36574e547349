//! Isotropic Gaussian mixtures on ℝ^d, evolved exactly by the heat flow.
//!
//! A component `(w, μ, s)` has density `w (2πs)^{-d/2} exp(-|x-μ|²/(2s))`;
//! the heat kernel at time `t` is the component `(1, 0, 2t)`, so evolution
//! adds `2t` to every variance.

mod quadrature;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use quadrature::{quadrature_box, tail_radius, QuadratureBox, DEFAULT_EPS_TAIL};

pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Component>", into = "Vec<Component>")]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<Component>,
}

impl TryFrom<Vec<Component>> for GaussianMixture {
    type Error = Error;
    fn try_from(components: Vec<Component>) -> Result<Self> {
        GaussianMixture::new(components)
    }
}

impl From<GaussianMixture> for Vec<Component> {
    fn from(m: GaussianMixture) -> Self {
        m.components
    }
}

impl GaussianMixture {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::param("mixture needs at least one component"))?;
        let dim = first.mean.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::param(format!("mixture dimension {dim} not in 1..=3")));
        }
        for (i, c) in components.iter().enumerate() {
            if c.mean.len() != dim {
                return Err(Error::param(format!("component {i} has mean of length {}", c.mean.len())));
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::param(format!("component {i} has weight {}", c.weight)));
            }
            if !(c.variance > 0.0 && c.variance.is_finite()) {
                return Err(Error::param(format!("component {i} has variance {}", c.variance)));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::param(format!("component {i} has a non-finite mean")));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::param(format!("weights sum to {total}, not 1")));
        }
        Ok(GaussianMixture { dim, components })
    }

    /// Random mixture: means uniform in `[-spread, spread]^d`, variances
    /// uniform in `[lo, hi]`, weights from normalised uniforms on `[0.2, 1]`.
    pub fn random<R: Rng>(dim: usize, count: usize, spread: f64, (lo, hi): (f64, f64), rng: &mut R) -> Result<Self> {
        if count == 0 || !(lo > 0.0 && hi >= lo) || !(spread >= 0.0) {
            return Err(Error::param("random mixture needs count > 0, 0 < lo <= hi and spread >= 0"));
        }
        let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(0.2..=1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut components: Vec<Component> = raw
            .iter()
            .map(|w| Component {
                weight: w / total,
                mean: (0..dim).map(|_| rng.gen_range(-spread..=spread)).collect(),
                variance: rng.gen_range(lo..=hi),
            })
            .collect();
        // absorb rounding so the weights sum to one exactly enough
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        components[0].weight += 1.0 - sum;
        Self::new(components)
    }

    /// Standard isotropic Gaussian with the given mean and variance.
    pub fn single(mean: Vec<f64>, variance: f64) -> Result<Self> {
        Self::new(vec![Component {
            weight: 1.0,
            mean,
            variance,
        }])
    }

    /// The heat kernel `p_t`: one centred component of variance `2t`.
    pub fn heat_kernel(dim: usize, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::param(format!("heat kernel needs t > 0, got {t}")));
        }
        Self::single(vec![0.0; dim], 2.0 * t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn min_variance(&self) -> f64 {
        self.components.iter().map(|c| c.variance).fold(f64::INFINITY, f64::min)
    }

    /// Exact heat flow: `φ_t = φ_0 * p_t`.
    pub fn evolve(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::param(format!("evolution time must be >= 0, got {t}")));
        }
        Ok(GaussianMixture {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| Component {
                    weight: c.weight,
                    mean: c.mean.clone(),
                    variance: c.variance + 2.0 * t,
                })
                .collect(),
        })
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_jet(x, false).value
    }

    /// Closed-form value, gradient and Hessian of the density at `x`.
    pub fn density_and_derivatives(&self, x: &[f64]) -> DensityJet {
        let j = self.log_jet(x, false);
        let d = self.dim;
        let gradient = (0..d).map(|i| j.value * j.g[i]).collect();
        let hessian = (0..d)
            .map(|a| (0..d).map(|b| j.value * j.h[a][b]).collect())
            .collect();
        DensityJet {
            value: j.value,
            gradient,
            hessian,
        }
    }

    /// Derivatives of the density up to third order, each divided by the
    /// density itself. Component responsibilities are formed in log space so
    /// the quotients stay accurate far in the tails.
    pub fn log_jet(&self, x: &[f64], third: bool) -> RelativeJet {
        let d = self.dim;
        let mut logs = [0.0_f64; 16];
        let mut logs_vec;
        let logs: &mut [f64] = if self.components.len() <= 16 {
            &mut logs[..self.components.len()]
        } else {
            logs_vec = vec![0.0; self.components.len()];
            &mut logs_vec
        };
        let half_d = 0.5 * d as f64;
        for (l, c) in logs.iter_mut().zip(&self.components) {
            let r2: f64 = (0..d).map(|i| (x[i] - c.mean[i]).powi(2)).sum();
            *l = c.weight.ln()
                - half_d * (2.0 * std::f64::consts::PI * c.variance).ln()
                - r2 / (2.0 * c.variance);
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in logs.iter_mut() {
            *l = (*l - top).exp();
            total += *l;
        }
        let mut jet = RelativeJet {
            dim: d,
            value: top.exp() * total,
            ..RelativeJet::default()
        };
        for (r, c) in logs.iter().zip(&self.components) {
            let r = r / total;
            let inv = 1.0 / c.variance;
            let mut y = [0.0; 3];
            for i in 0..d {
                y[i] = x[i] - c.mean[i];
            }
            for i in 0..d {
                jet.g[i] -= r * y[i] * inv;
                for j in 0..d {
                    let delta = if i == j { inv } else { 0.0 };
                    jet.h[i][j] += r * (y[i] * y[j] * inv * inv - delta);
                    if third {
                        for k in 0..d {
                            let mut s = -y[i] * y[j] * y[k] * inv * inv * inv;
                            if i == j {
                                s += y[k] * inv * inv;
                            }
                            if i == k {
                                s += y[j] * inv * inv;
                            }
                            if j == k {
                                s += y[i] * inv * inv;
                            }
                            jet.t[i][j][k] += r * s;
                        }
                    }
                }
            }
        }
        jet
    }
}

/// Value, gradient and Hessian of a density at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityJet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

/// Derivatives of a positive function divided by the function:
/// `g = ∇f/f`, `h = ∇²f/f`, `t = ∇³f/f`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RelativeJet {
    pub dim: usize,
    pub value: f64,
    pub g: [f64; 3],
    pub h: [[f64; 3]; 3],
    pub t: [[[f64; 3]; 3]; 3],
}

impl RelativeJet {
    /// Relative jet of `f^a` from that of `f` (chain rule, exact).
    pub fn power(&self, a: f64) -> RelativeJet {
        let d = self.dim;
        let (g, h, t) = (&self.g, &self.h, &self.t);
        let a1 = a * (a - 1.0);
        let a2 = a1 * (a - 2.0);
        let mut out = RelativeJet {
            dim: d,
            value: self.value.powf(a),
            ..RelativeJet::default()
        };
        for i in 0..d {
            out.g[i] = a * g[i];
            for j in 0..d {
                out.h[i][j] = a1 * g[i] * g[j] + a * h[i][j];
                for k in 0..d {
                    out.t[i][j][k] = a2 * g[i] * g[j] * g[k]
                        + a1 * (h[i][j] * g[k] + h[i][k] * g[j] + h[j][k] * g[i])
                        + a * t[i][j][k];
                }
            }
        }
        out
    }

    pub fn laplacian(&self) -> f64 {
        (0..self.dim).map(|i| self.h[i][i]).sum()
    }

    pub fn grad_sq(&self) -> f64 {
        (0..self.dim).map(|i| self.g[i] * self.g[i]).sum()
    }

    pub fn hessian_sq(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.h[i][j] * self.h[i][j];
            }
        }
        s
    }

    /// `∂_i Δf / f`.
    pub fn grad_laplacian(&self, i: usize) -> f64 {
        (0..self.dim).map(|j| self.t[i][j][j]).sum()
    }
}

/// Tsallis entropy of an isotropic Gaussian of variance `s` in `ℝ^d`:
/// `(1 - (2πs)^{d(1-q)/2} q^{-d/2}) / (q - 1)`.
pub fn gaussian_tsallis_closed_form(s: f64, d: usize, q: f64) -> Result<f64> {
    if q == 1.0 {
        return Err(Error::param("q = 1 is the Shannon case; use gaussian_shannon"));
    }
    if !(q > 0.0) {
        return Err(Error::param(format!("entropic index must be positive, got {q}")));
    }
    if !(s > 0.0) {
        return Err(Error::param(format!("variance must be positive, got {s}")));
    }
    let d = d as f64;
    let power_integral = (2.0 * std::f64::consts::PI * s).powf(0.5 * d * (1.0 - q)) * q.powf(-0.5 * d);
    Ok((1.0 - power_integral) / (q - 1.0))
}

/// Shannon entropy `(d/2) log(2πe s)` of an isotropic Gaussian.
pub fn gaussian_shannon(s: f64, d: usize) -> f64 {
    0.5 * d as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E * s).ln()
}
