use rayon::prelude::*;

use super::GaussianMixture;
use crate::error::{Error, Result};
use crate::numerics::SumBank;

pub const DEFAULT_EPS_TAIL: f64 = 1e-12;

/// Axis-aligned box carrying a trapezoid tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureBox {
    pub center: Vec<f64>,
    pub half_widths: Vec<f64>,
    /// Nodes per axis, endpoints included.
    pub points: usize,
}

/// Radius `r` (in standard deviations) such that an isotropic Gaussian in
/// `ℝ^d` puts mass below `eps` outside the cube `[-rσ, rσ]^d`.
///
/// Uses the union bound over axes and `erfc(z) ≤ exp(-z²)/(z√π)`.
pub fn tail_radius(d: usize, eps: f64) -> f64 {
    let bound = |r: f64| {
        let z = r / std::f64::consts::SQRT_2;
        d as f64 * (-z * z).exp() / (z * std::f64::consts::PI.sqrt())
    };
    let (mut lo, mut hi) = (1.0_f64, 60.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Box covering every component of `m` evolved to time `t`, with each
/// component's tail mass outside below `eps_tail`.
pub fn quadrature_box(m: &GaussianMixture, t: f64, eps_tail: f64) -> Result<QuadratureBox> {
    if !(eps_tail > 0.0 && eps_tail < 1.0) {
        return Err(Error::param(format!("tail tolerance must lie in (0,1), got {eps_tail}")));
    }
    let evolved = m.evolve(t)?;
    let d = m.dim();
    let r = tail_radius(d, eps_tail);
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for c in evolved.components() {
        let reach = r * c.variance.sqrt();
        for i in 0..d {
            lo[i] = lo[i].min(c.mean[i] - reach);
            hi[i] = hi[i].max(c.mean[i] + reach);
        }
    }
    let center: Vec<f64> = (0..d).map(|i| 0.5 * (lo[i] + hi[i])).collect();
    let half_widths: Vec<f64> = (0..d).map(|i| 0.5 * (hi[i] - lo[i])).collect();
    let sigma_min = evolved.min_variance().sqrt();
    let widest = half_widths.iter().copied().fold(0.0, f64::max);
    let mut points = (2.0 * widest / sigma_min).ceil() as usize + 1;
    points = points.max(17);
    if points % 2 == 0 {
        points += 1;
    }
    Ok(QuadratureBox {
        center,
        half_widths,
        points,
    })
}

/// Outcome of a self-validating quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveIntegral {
    pub values: Vec<f64>,
    pub points: usize,
}

impl QuadratureBox {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn with_points(&self, points: usize) -> QuadratureBox {
        QuadratureBox {
            points,
            ..self.clone()
        }
    }

    pub fn node_count(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    /// Coordinates of node `flat` (last axis fastest; unused axes zero).
    pub fn node(&self, mut flat: usize) -> [f64; 3] {
        let p = self.points;
        let mut x = [0.0; 3];
        for a in (0..self.dim()).rev() {
            let i = flat % p;
            flat /= p;
            x[a] = self.center[a] - self.half_widths[a]
                + i as f64 * 2.0 * self.half_widths[a] / (p - 1) as f64;
        }
        x
    }

    pub fn volume(&self) -> f64 {
        self.half_widths.iter().map(|h| 2.0 * h).product()
    }

    /// Largest nodes-per-axis the adaptive loop may reach in this dimension.
    pub fn max_points(&self) -> usize {
        match self.dim() {
            1 => 16385,
            2 => 1025,
            _ => 289,
        }
    }

    /// Tensor trapezoid rule for `nvals` integrands at once. `f` fills the
    /// integrand values at a node. Slabs along the first axis are summed in
    /// parallel and merged in slab order, so results are deterministic.
    pub fn integrate_many<F>(&self, nvals: usize, f: F) -> Vec<f64>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let d = self.dim();
        let p = self.points;
        let axes: Vec<(f64, f64)> = (0..d)
            .map(|i| {
                let lo = self.center[i] - self.half_widths[i];
                let h = 2.0 * self.half_widths[i] / (p - 1) as f64;
                (lo, h)
            })
            .collect();
        let weight = |i: usize, h: f64| if i == 0 || i == p - 1 { 0.5 * h } else { h };
        let inner = p.pow(d as u32 - 1);
        let banks: Vec<SumBank> = (0..p)
            .into_par_iter()
            .map(|i0| {
                let mut bank = SumBank::new(nvals);
                let mut x = [0.0_f64; 3];
                let mut vals = vec![0.0; nvals];
                x[0] = axes[0].0 + i0 as f64 * axes[0].1;
                let w0 = weight(i0, axes[0].1);
                for rest in 0..inner {
                    let mut w = w0;
                    let mut r = rest;
                    for a in (1..d).rev() {
                        let i = r % p;
                        r /= p;
                        x[a] = axes[a].0 + i as f64 * axes[a].1;
                        w *= weight(i, axes[a].1);
                    }
                    f(&x[..d], &mut vals);
                    for (k, v) in vals.iter().enumerate() {
                        bank.add(k, w * v);
                    }
                }
                bank
            })
            .collect();
        banks
            .into_iter()
            .reduce(|a, b| a.merge(&b))
            .map(|b| b.totals())
            .unwrap_or_else(|| vec![0.0; nvals])
    }

    /// Doubles the resolution (`p -> 2p - 1`, nested nodes) until every entry
    /// is converged to `rtol`, measured against its own magnitude plus a small
    /// fraction of the largest one (entries may vanish, and then only rounding
    /// is left to compare).
    ///
    /// An entry is converged when two successive passes agree, or when the
    /// relative differences `δ_{k-1} > δ_k` are already in the asymptotic
    /// regime and the remaining error, extrapolated by `extrapolated`, is
    /// within tolerance.
    pub fn integrate_adaptive<F>(&self, nvals: usize, rtol: f64, f: F) -> Result<AdaptiveIntegral>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let mut points = self.points;
        let mut prev = self.with_points(points).integrate_many(nvals, &f);
        let mut prev_diff: Option<Vec<f64>> = None;
        loop {
            let next_points = 2 * points - 1;
            if next_points > self.max_points() {
                return Err(Error::Resolution {
                    what: format!("tensor quadrature did not reach rtol {rtol:e} by {points} points per axis"),
                    ratio: f64::NAN,
                    threshold: rtol,
                });
            }
            let next = self.with_points(next_points).integrate_many(nvals, &f);
            let scale = next.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let floor = (1e-4 * rtol).max(1e-14) * scale;
            let diff: Vec<f64> = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).collect();
            let converged = diff.iter().zip(&next).enumerate().all(|(k, (d, b))| {
                let scale = b.abs() + floor / rtol;
                let tol = rtol * scale;
                *d <= tol || prev_diff.as_ref().is_some_and(|pd| extrapolated(*d / scale, pd[k] / scale) <= rtol)
            });
            if converged {
                return Ok(AdaptiveIntegral {
                    values: next,
                    points: next_points,
                });
            }
            prev = next;
            prev_diff = Some(diff);
            points = next_points;
        }
    }
}

/// Error left after the finer of two halvings, given the relative
/// differences `prev` then `cur` of the passes that led to it.
///
/// For integrands analytic in a strip the trapezoid error is `exp(-c/h)`,
/// so each halving squares it; Gaussian tails give `exp(-c/h²)` and a
/// fourth power. The observed order `p = ln cur / ln prev` is capped at 2
/// and the estimate is `cur^p`. Only trusted once `prev` is below 0.1.
pub fn extrapolated(cur: f64, prev: f64) -> f64 {
    if !(cur < prev && prev <= 0.1) {
        return f64::INFINITY;
    }
    if cur == 0.0 {
        return 0.0;
    }
    let p = (cur.ln() / prev.ln()).min(2.0);
    cur.powf(p)
}
