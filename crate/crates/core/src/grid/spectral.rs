use rustfft::num_complex::Complex64;

use super::{ScalarField, SymmetricFields, TorusGrid};
use crate::error::{Error, Result};

/// Fourier coefficients of a real field; one forward transform feeds any
/// number of derivative fields.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
    /// Per-bin first-derivative symbol (Nyquist zeroed).
    k1: Vec<f64>,
    /// Per-bin wavenumber (Nyquist kept) for second derivatives.
    k2: Vec<f64>,
}

impl Spectrum {
    pub fn of(field: &ScalarField) -> Spectrum {
        let grid = field.grid().clone();
        let coeffs = grid.forward(field.values());
        Self::from_coeffs(grid, coeffs)
    }

    fn from_coeffs(grid: TorusGrid, coeffs: Vec<Complex64>) -> Spectrum {
        let n = grid.n();
        let k2: Vec<f64> = (0..n).map(|i| grid.wavenumber(grid.mode(i))).collect();
        let k1: Vec<f64> = (0..n)
            .map(|i| if i == n / 2 { 0.0 } else { k2[i] })
            .collect();
        Spectrum {
            grid,
            coeffs,
            k1,
            k2,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Multiplies every coefficient by `symbol(bin multi-index)` and returns
    /// the real part of the inverse transform.
    pub fn apply<F: Fn([usize; 3]) -> Complex64>(&self, symbol: F) -> ScalarField {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(flat, c)| c * symbol(self.grid.unravel(flat)))
            .collect();
        ScalarField::from_raw(self.grid.clone(), self.grid.inverse_real(coeffs))
    }

    fn neg_k_sq(&self, idx: [usize; 3]) -> f64 {
        (0..self.grid.dim()).map(|a| -self.k2[idx[a]] * self.k2[idx[a]]).sum()
    }

    pub fn derivative(&self, axis: usize) -> ScalarField {
        self.apply(|idx| Complex64::new(0.0, self.k1[idx[axis]]))
    }

    pub fn second_derivative(&self, i: usize, j: usize) -> ScalarField {
        if i == j {
            self.apply(|idx| Complex64::new(-self.k2[idx[i]] * self.k2[idx[i]], 0.0))
        } else {
            self.apply(|idx| Complex64::new(-self.k1[idx[i]] * self.k1[idx[j]], 0.0))
        }
    }

    pub fn laplacian(&self) -> ScalarField {
        self.apply(|idx| Complex64::new(self.neg_k_sq(idx), 0.0))
    }

    /// `∂_axis Δ f`.
    pub fn grad_laplacian(&self, axis: usize) -> ScalarField {
        self.apply(|idx| Complex64::new(0.0, self.k1[idx[axis]] * self.neg_k_sq(idx)))
    }

    pub fn hessian(&self) -> SymmetricFields {
        let dim = self.grid.dim();
        let mut entries = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                entries.push(self.second_derivative(i, j));
            }
        }
        SymmetricFields { dim, entries }
    }

    /// Heat semigroup: mode `k` decays by `exp(-|k|² t)`; the zero mode is untouched.
    pub fn heat(&self, t: f64) -> ScalarField {
        self.apply(|idx| Complex64::new((self.neg_k_sq(idx) * t).exp(), 0.0))
    }

    /// Ratio of the largest coefficient magnitude among modes with some
    /// `|m_j| > n/3` to the largest coefficient overall.
    pub fn high_mode_ratio(&self) -> f64 {
        let n = self.grid.n();
        let cutoff = (n / 3) as i64;
        let dim = self.grid.dim();
        let mut peak = 0.0_f64;
        let mut high = 0.0_f64;
        for (flat, c) in self.coeffs.iter().enumerate() {
            let mag = c.norm();
            peak = peak.max(mag);
            let idx = self.grid.unravel(flat);
            if (0..dim).any(|a| self.grid.mode(idx[a]).abs() > cutoff) {
                high = high.max(mag);
            }
        }
        if peak == 0.0 {
            0.0
        } else {
            high / peak
        }
    }
}

/// Aliasing guard: a field is resolved when its top-third spectrum sits
/// below `threshold` times the spectral peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionPolicy {
    pub threshold: f64,
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        ResolutionPolicy { threshold: 1e-10 }
    }
}

impl ResolutionPolicy {
    pub fn check(&self, field: &ScalarField, what: &str) -> Result<f64> {
        self.check_spectrum(&Spectrum::of(field), what)
    }

    pub fn check_spectrum(&self, spec: &Spectrum, what: &str) -> Result<f64> {
        let ratio = spec.high_mode_ratio();
        if ratio > self.threshold {
            return Err(Error::Resolution {
                what: what.to_string(),
                ratio,
                threshold: self.threshold,
            });
        }
        Ok(ratio)
    }
}
