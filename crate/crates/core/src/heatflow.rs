//! Heat semigroup on both backends and the power transform `u = φ^{1/(1+δ)}`.
//!
//! With `q = 2/(1+δ)` one has `∫u² = ∫φ^q`, so concavity of `S_q` along the
//! flow is convexity in time of `∫u²`. The transformed function solves
//! `∂_t u = Δu + δ|∇u|²/u`; that equation is never stepped here, it is only
//! checked against transforms of the exactly evolved density.

use rand::Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient, laplacian, ScalarField, Spectrum, TorusGrid};
use crate::mixtures::{GaussianMixture, QuadratureBox};

/// Transform parameter `δ ∈ (-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DeltaIndex(f64);

impl DeltaIndex {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > -1.0 && delta <= 1.0) {
            return Err(Error::param(format!("δ must lie in (-1, 1], got {delta}")));
        }
        Ok(DeltaIndex(delta))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Exponent `p = 1/(1+δ)` of the transform.
    pub fn exponent(self) -> f64 {
        1.0 / (1.0 + self.0)
    }

    /// `q = 2/(1+δ)`.
    pub fn to_entropic(self) -> EntropicIndex {
        if self.0 == 1.0 {
            EntropicIndex::Shannon
        } else {
            EntropicIndex::Tsallis(2.0 / (1.0 + self.0))
        }
    }
}

impl TryFrom<f64> for DeltaIndex {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        DeltaIndex::new(v)
    }
}

impl From<DeltaIndex> for f64 {
    fn from(d: DeltaIndex) -> f64 {
        d.0
    }
}

/// Entropic index `q > 0`; `q = 1` is the Shannon case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropicIndex {
    Shannon,
    Tsallis(f64),
}

impl EntropicIndex {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::param(format!("entropic index must be positive, got {q}")));
        }
        Ok(if q == 1.0 {
            EntropicIndex::Shannon
        } else {
            EntropicIndex::Tsallis(q)
        })
    }

    pub fn q(self) -> f64 {
        match self {
            EntropicIndex::Shannon => 1.0,
            EntropicIndex::Tsallis(q) => q,
        }
    }

    /// `δ = 2/q - 1`; defined for `q ≥ 1` (indices below one give `δ > 1`).
    pub fn to_delta(self) -> Result<DeltaIndex> {
        match self {
            EntropicIndex::Shannon => Ok(DeltaIndex(1.0)),
            EntropicIndex::Tsallis(q) => DeltaIndex::new(2.0 / q - 1.0),
        }
    }
}

/// `q ↦ δ = 2/q - 1`.
pub fn q_to_delta(q: f64) -> Result<DeltaIndex> {
    EntropicIndex::new(q)?.to_delta()
}

/// `δ ↦ q = 2/(1+δ)`.
pub fn delta_to_q(delta: DeltaIndex) -> f64 {
    delta.to_entropic().q()
}

/// Exact torus heat flow: mode `k` is multiplied by `exp(-|k|² t)`.
pub fn evolve_torus(phi0: &ScalarField, t: f64) -> Result<ScalarField> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param(format!("evolution time must be >= 0, got {t}")));
    }
    phi0.ensure_finite()?;
    if phi0.min() <= 0.0 {
        return Err(Error::degenerate(format!(
            "initial density has non-positive minimum {:e}",
            phi0.min()
        )));
    }
    if t == 0.0 {
        return Ok(phi0.clone());
    }
    let out = Spectrum::of(phi0).heat(t);
    let min = out.min();
    if !(min > 0.0) {
        return Err(Error::Resolution {
            what: format!("evolved density lost positivity (min {min:e}) at t = {t}"),
            ratio: f64::NAN,
            threshold: 0.0,
        });
    }
    Ok(out)
}

/// Pointwise `u = φ^{1/(1+δ)}` of a positive torus field.
pub fn delta_transform(phi: &ScalarField, delta: DeltaIndex) -> Result<ScalarField> {
    if phi.min() <= 0.0 {
        return Err(Error::degenerate(format!(
            "δ-transform needs a positive field, minimum is {:e}",
            phi.min()
        )));
    }
    let p = delta.exponent();
    if p == 1.0 {
        return Ok(phi.clone());
    }
    if p == 0.5 {
        return phi.map(f64::sqrt);
    }
    phi.map(|v| v.powf(p))
}

/// A positive function on ℝ^d of the form `scale · φ^exponent` with `φ` a
/// Gaussian mixture (already evolved to the time of interest).
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureField {
    pub mixture: GaussianMixture,
    pub exponent: f64,
    pub scale: f64,
}

impl MixtureField {
    pub fn new(mixture: GaussianMixture, exponent: f64, scale: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::param(format!("exponent must be positive, got {exponent}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param(format!("scale must be positive, got {scale}")));
        }
        Ok(MixtureField {
            mixture,
            exponent,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.mixture.dim()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.scale * self.mixture.density(x).powf(self.exponent)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        MixtureField::new(self.mixture.clone(), self.exponent, self.scale * c)
    }
}

/// δ-transform of a mixture density: `u = φ^{1/(1+δ)}`.
pub fn delta_transform_mixture(phi: &GaussianMixture, delta: DeltaIndex) -> MixtureField {
    MixtureField {
        mixture: phi.clone(),
        exponent: delta.exponent(),
        scale: 1.0,
    }
}

/// Max-norm of `(u_{t+h} - u_{t-h})/(2h) - Δu_t - δ|∇u_t|²/u_t` on the torus,
/// every `u_s` being the transform of the exactly evolved density.
pub fn pde_residual_torus(phi0: &ScalarField, delta: DeltaIndex, t: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) || !(t - h > 0.0) {
        return Err(Error::param(format!("need 0 < h < t, got t = {t}, h = {h}")));
    }
    let u = |s: f64| evolve_torus(phi0, s).and_then(|phi| delta_transform(&phi, delta));
    let plus = u(t + h)?;
    let minus = u(t - h)?;
    let mid = u(t)?;
    let lap = laplacian(&mid)?;
    let grad = gradient(&mid)?;
    let d = delta.value();
    let mut worst = 0.0_f64;
    for i in 0..mid.values().len() {
        let dt = (plus.values()[i] - minus.values()[i]) / (2.0 * h);
        let g2: f64 = grad.iter().map(|g| g.values()[i].powi(2)).sum();
        let r = dt - lap.values()[i] - d * g2 / mid.values()[i];
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Mixture version of [`pde_residual_torus`], evaluated on the nodes of
/// `nodes` (closed-form values and derivatives).
pub fn pde_residual_mixture(
    phi0: &GaussianMixture,
    delta: DeltaIndex,
    t: f64,
    h: f64,
    nodes: &QuadratureBox,
) -> Result<f64> {
    if !(h > 0.0) || !(t - h > 0.0) {
        return Err(Error::param(format!("need 0 < h < t, got t = {t}, h = {h}")));
    }
    let p = delta.exponent();
    let plus = phi0.evolve(t + h)?;
    let minus = phi0.evolve(t - h)?;
    let mid = phi0.evolve(t)?;
    let d = delta.value();
    let dim = nodes.dim();
    let mut worst = 0.0_f64;
    for flat in 0..nodes.node_count() {
        let node = nodes.node(flat);
        let x = &node[..dim];
        let jet = mid.log_jet(x, false).power(p);
        let u = jet.value;
        let dt = (plus.density(x).powf(p) - minus.density(x).powf(p)) / (2.0 * h);
        let res = dt - u * jet.laplacian() - d * u * jet.grad_sq();
        worst = worst.max(res.abs());
    }
    Ok(worst)
}

/// Real trigonometric polynomial `P(x) = Σ_m a_m cos(k_m·x) + b_m sin(k_m·x)`
/// over a half-space of nonzero integer modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    pub dim: usize,
    pub modes: Vec<[i64; 3]>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPolynomial {
    /// Nonzero modes with `|m|_1 ≤ bandwidth` whose first nonzero entry is
    /// positive, in lexicographic order.
    pub fn half_space_modes(dim: usize, bandwidth: i64) -> Vec<[i64; 3]> {
        let b = bandwidth;
        let mut modes = Vec::new();
        let range = |active: bool| if active { -b..=b } else { 0..=0 };
        for m0 in range(true) {
            for m1 in range(dim > 1) {
                for m2 in range(dim > 2) {
                    let m = [m0, m1, m2];
                    if m.iter().map(|v| v.abs()).sum::<i64>() > b || m == [0, 0, 0] {
                        continue;
                    }
                    let first = *m.iter().find(|v| **v != 0).unwrap();
                    if first > 0 {
                        modes.push(m);
                    }
                }
            }
        }
        modes
    }

    pub fn zeros(dim: usize, bandwidth: i64) -> Self {
        let modes = Self::half_space_modes(dim, bandwidth);
        let n = modes.len();
        TrigPolynomial {
            dim,
            modes,
            cos: vec![0.0; n],
            sin: vec![0.0; n],
        }
    }

    /// Number of real coefficients.
    pub fn n_params(&self) -> usize {
        2 * self.modes.len()
    }

    /// Coefficients packed as `[a_0, b_0, a_1, b_1, ...]`.
    pub fn params(&self) -> Vec<f64> {
        self.cos
            .iter()
            .zip(&self.sin)
            .flat_map(|(a, b)| [*a, *b])
            .collect()
    }

    pub fn with_params(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.n_params() {
            return Err(Error::param(format!(
                "expected {} coefficients, got {}",
                self.n_params(),
                theta.len()
            )));
        }
        Ok(TrigPolynomial {
            dim: self.dim,
            modes: self.modes.clone(),
            cos: theta.iter().step_by(2).copied().collect(),
            sin: theta.iter().skip(1).step_by(2).copied().collect(),
        })
    }

    pub fn bandwidth(&self) -> i64 {
        self.modes
            .iter()
            .flat_map(|m| m.iter().map(|v| v.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Random coefficients with `Σ |a_m| + |b_m| = amplitude`, so `|P| ≤ amplitude`.
    pub fn random<R: Rng>(dim: usize, bandwidth: i64, amplitude: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(dim, bandwidth);
        for (a, b) in p.cos.iter_mut().zip(p.sin.iter_mut()) {
            *a = rng.gen_range(-1.0..1.0);
            *b = rng.gen_range(-1.0..1.0);
        }
        let l1: f64 = p.cos.iter().chain(&p.sin).map(|v| v.abs()).sum();
        if l1 > 0.0 {
            let c = amplitude / l1;
            p.cos.iter_mut().chain(p.sin.iter_mut()).for_each(|v| *v *= c);
        }
        p
    }

    /// Evaluates on the grid by one inverse FFT (exact; modes must lie
    /// strictly inside `(-n/2, n/2)`).
    pub fn sample(&self, grid: &TorusGrid) -> Result<ScalarField> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch(format!(
                "polynomial in {} dimensions, grid in {}",
                self.dim,
                grid.dim()
            )));
        }
        let n = grid.n() as i64;
        if self.bandwidth() >= n / 2 {
            return Err(Error::param(format!(
                "bandwidth {} does not fit a grid with n = {n}",
                self.bandwidth()
            )));
        }
        let total = grid.len() as f64;
        let mut coeffs = vec![Complex64::default(); grid.len()];
        let bin = |m: i64| m.rem_euclid(n) as usize;
        let flat = |m: [i64; 3]| (0..self.dim).fold(0usize, |acc, a| acc * n as usize + bin(m[a]));
        for ((m, a), b) in self.modes.iter().zip(&self.cos).zip(&self.sin) {
            let c = Complex64::new(*a, -*b) * (0.5 * total);
            let neg = [-m[0], -m[1], -m[2]];
            coeffs[flat(*m)] += c;
            coeffs[flat(neg)] += c.conj();
        }
        Ok(ScalarField::from_raw(grid.clone(), grid.inverse_real(coeffs)))
    }
}

/// `exp(P)` normalised to unit mass: smooth and strictly positive.
pub fn exp_trig_density(poly: &TrigPolynomial, grid: &TorusGrid) -> Result<ScalarField> {
    let p = poly.sample(grid)?;
    p.map(f64::exp)?.normalized()
}

/// Random `exp(P)` density with the dimension's default bandwidth and an
/// amplitude drawn up to `max_amplitude`.
pub fn random_torus_density<R: Rng>(
    grid: &TorusGrid,
    bandwidth: i64,
    max_amplitude: f64,
    rng: &mut R,
) -> Result<(TrigPolynomial, ScalarField)> {
    let amplitude = rng.gen_range(0.25 * max_amplitude..=max_amplitude);
    let poly = TrigPolynomial::random(grid.dim(), bandwidth, amplitude, rng);
    let field = exp_trig_density(&poly, grid)?;
    Ok((poly, field))
}

/// Default `(bandwidth, max amplitude)` for random torus densities, sized so
/// the default grids (n = 1024, 256, 64) pass the resolution policy with margin.
pub fn default_torus_family(dim: usize) -> (i64, f64) {
    match dim {
        1 => (4, 1.5),
        2 => (3, 1.2),
        _ => (2, 0.8),
    }
}
