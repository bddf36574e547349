//! Periodic tensor-product grids on the flat torus `[0, L)^d` and
//! Fourier-pseudospectral calculus on them.
//!
//! Samples are stored in lexicographic order with the last axis fastest:
//! `flat = i_0 n^{d-1} + i_1 n^{d-2} + ... + i_{d-1}`, and sample `i_j` sits at
//! `x_j = i_j L / n`. FFT bin `i` carries integer mode `m = i` for `i < n/2` and
//! `m = i - n` otherwise, so `m ∈ [-n/2, n/2)` and the wavenumber is
//! `k_m = 2π m / L`. First-derivative symbols vanish on the Nyquist bin
//! (`m = -n/2`); second-derivative symbols along one axis keep `-k²` there.

pub mod io;
mod spectral;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::numerics::compensated_sum;

pub use spectral::{ResolutionPolicy, Spectrum};

/// Largest admissible `n^d` unless a different budget is requested.
pub const DEFAULT_MAX_POINTS: usize = 1 << 24;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Periodic grid with `n` points per axis on `[0, length)^dim`.
#[derive(Clone)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    length: f64,
    plans: Arc<Plans>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        Self::with_budget(dim, n, length, DEFAULT_MAX_POINTS)
    }

    pub fn with_budget(dim: usize, n: usize, length: f64, max_points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("side length must be positive, got {length}")));
        }
        let total = (n as u128).pow(dim as u32);
        if total > max_points as u128 {
            return Err(Error::InvalidGrid(format!(
                "{n}^{dim} = {total} points exceeds the budget of {max_points}"
            )));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        };
        Ok(TorusGrid {
            dim,
            n,
            length,
            plans: Arc::new(plans),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Total number of samples, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Integer mode carried by FFT bin `i`.
    pub fn mode(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub fn wavenumber(&self, m: i64) -> f64 {
        2.0 * PI * m as f64 / self.length
    }

    /// Per-axis multi-index of a flat sample index (unused axes are zero).
    pub fn unravel(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for axis in (0..self.dim).rev() {
            idx[axis] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn coordinate(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let h = self.spacing();
        [idx[0] as f64 * h, idx[1] as f64 * h, idx[2] as f64 * h]
    }

    /// Samples `f` at every grid point; `f` receives a slice of length `dim`.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<ScalarField> {
        let values = (0..self.len())
            .map(|i| {
                let x = self.coordinate(i);
                f(&x[..self.dim])
            })
            .collect();
        ScalarField::new(self.clone(), values)
    }

    pub fn constant(&self, value: f64) -> Result<ScalarField> {
        ScalarField::new(self.clone(), vec![value; self.len()])
    }

    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        buf
    }

    pub(crate) fn inverse_real(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut coeffs, true);
        coeffs.into_iter().map(|c| c.re).collect()
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let fft = if inverse {
            &self.plans.inverse
        } else {
            &self.plans.forward
        };
        let n = self.n;
        let total = buf.len();
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // Last axis is contiguous: the plan walks consecutive length-n chunks.
        fft.process_with_scratch(buf, &mut scratch);
        let mut line = vec![Complex64::default(); n];
        for axis in 0..self.dim - 1 {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..total).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = buf[start + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, slot) in line.iter().enumerate() {
                        buf[start + k * stride] = *slot;
                    }
                }
            }
        }
        if inverse {
            let scale = 1.0 / total as f64;
            for c in buf.iter_mut() {
                *c *= scale;
            }
        }
    }
}

/// Real samples of a function on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        let field = ScalarField { grid, values };
        field.ensure_finite()?;
        Ok(field)
    }

    /// Builds a field from values produced by finite arithmetic on finite fields.
    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) / self.values.len() as f64
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<ScalarField> {
        ScalarField::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        ScalarField::from_raw(self.grid.clone(), self.values.iter().map(|v| c * v).collect())
    }

    /// Checks the density tag: strictly positive with unit mass within `tol`.
    pub fn check_density(&self, tol: f64) -> Result<()> {
        let min = self.min();
        if min <= 0.0 {
            return Err(Error::degenerate(format!(
                "density has non-positive minimum {min:e}"
            )));
        }
        let mass = integrate(self);
        if (mass - 1.0).abs() > tol {
            return Err(Error::degenerate(format!("density has mass {mass} (tolerance {tol:e})")));
        }
        Ok(())
    }

    /// Rescales a positive field to unit mass.
    pub fn normalized(&self) -> Result<ScalarField> {
        let mass = integrate(self);
        if !(mass > 0.0) {
            return Err(Error::degenerate(format!("cannot normalize field of mass {mass}")));
        }
        Ok(self.scaled(1.0 / mass))
    }
}

/// Symmetric `d x d` matrix of fields, one stored entry per unordered pair.
#[derive(Debug, Clone)]
pub struct SymmetricFields {
    dim: usize,
    entries: Vec<ScalarField>,
}

impl SymmetricFields {
    fn slot(dim: usize, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * dim - a * (a + 1) / 2 + b
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[Self::slot(self.dim, i, j)]
    }

    pub fn trace(&self) -> ScalarField {
        let first = self.get(0, 0);
        let mut acc = first.values().to_vec();
        for j in 1..self.dim {
            for (a, b) in acc.iter_mut().zip(self.get(j, j).values()) {
                *a += b;
            }
        }
        ScalarField::from_raw(first.grid().clone(), acc)
    }

    /// Pointwise squared Frobenius norm `Σ_ij H_ij²`.
    pub fn frobenius_sq(&self) -> Vec<f64> {
        let len = self.entries[0].values().len();
        let mut out = vec![0.0; len];
        for i in 0..self.dim {
            for j in 0..self.dim {
                for (o, h) in out.iter_mut().zip(self.get(i, j).values()) {
                    *o += h * h;
                }
            }
        }
        out
    }
}

/// Spectral gradient: component `j` is `∂_j f`.
pub fn gradient(f: &ScalarField) -> Result<Vec<ScalarField>> {
    f.ensure_finite()?;
    let spec = Spectrum::of(f);
    Ok((0..f.grid().dim()).map(|j| spec.derivative(j)).collect())
}

/// Spectral Laplacian, symbol `-|k|²`.
pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    f.ensure_finite()?;
    Ok(Spectrum::of(f).laplacian())
}

/// Spectral Hessian; each unordered pair is transformed once.
pub fn hessian(f: &ScalarField) -> Result<SymmetricFields> {
    f.ensure_finite()?;
    Ok(Spectrum::of(f).hessian())
}

/// `∫_{T^d} f dx`: sample mean times volume (exact for band-limited integrands).
pub fn integrate(f: &ScalarField) -> f64 {
    f.mean() * f.grid().volume()
}

/// Same as [`integrate`] for raw samples on `grid`.
pub fn integrate_values(grid: &TorusGrid, values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64 * grid.volume()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize) -> TorusGrid {
        TorusGrid::new(1, n, 2.0 * PI).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusGrid::new(4, 16, 1.0).is_err());
        assert!(TorusGrid::new(1, 6, 1.0).is_err());
        assert!(TorusGrid::new(1, 15, 1.0).is_err());
        assert!(TorusGrid::new(1, 16, 0.0).is_err());
        assert!(TorusGrid::with_budget(3, 64, 1.0, 1000).is_err());
    }

    #[test]
    fn mode_convention() {
        let g = grid1(8);
        let modes: Vec<i64> = (0..8).map(|i| g.mode(i)).collect();
        assert_eq!(modes, vec![0, 1, 2, 3, -4, -3, -2, -1]);
    }

    #[test]
    fn lexicographic_order_last_axis_fastest() {
        let g = TorusGrid::new(2, 8, 8.0).unwrap();
        assert_eq!(g.unravel(9), [1, 1, 0]);
        assert_eq!(g.coordinate(10), [1.0, 2.0, 0.0]);
    }

    #[test]
    fn gradient_of_sine_is_cosine() {
        let g = grid1(64);
        let f = g.sample(|x| x[0].sin()).unwrap();
        let df = gradient(&f).unwrap();
        let err = df[0]
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - g.coordinate(i)[0].cos()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = TorusGrid::new(2, 16, 3.0).unwrap();
        let f = g.constant(2.5).unwrap();
        for d in gradient(&f).unwrap() {
            assert!(d.max_abs() < 1e-14);
        }
        assert!(laplacian(&f).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn exp_cos_derivatives_match_symbolic_oracle() {
        let g = grid1(128);
        let f = g.sample(|x| x[0].cos().exp()).unwrap();
        let df = gradient(&f).unwrap();
        let lf = laplacian(&f).unwrap();
        for i in 0..g.len() {
            let x = g.coordinate(i)[0];
            let d1 = -x.sin() * x.cos().exp();
            let d2 = (x.sin().powi(2) - x.cos()) * x.cos().exp();
            assert!((df[0].values()[i] - d1).abs() < 1e-10);
            assert!((lf.values()[i] - d2).abs() < 1e-10);
        }
    }

    #[test]
    fn laplacian_eigenfunction() {
        let g = grid1(32);
        let f = g.sample(|x| (3.0 * x[0]).cos()).unwrap();
        let lf = laplacian(&f).unwrap();
        for (a, b) in lf.values().iter().zip(f.values()) {
            assert!((a + 9.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_hessian_entry() {
        let g = TorusGrid::new(2, 32, 2.0 * PI).unwrap();
        let f = g.sample(|x| x[0].cos() * x[1].cos()).unwrap();
        let h = hessian(&f).unwrap();
        for i in 0..g.len() {
            let x = g.coordinate(i);
            assert!((h.get(0, 1).values()[i] - x[0].sin() * x[1].sin()).abs() < 1e-12);
            assert_eq!(h.get(0, 1).values()[i], h.get(1, 0).values()[i]);
        }
    }

    #[test]
    fn one_dimensional_hessian_is_laplacian() {
        let g = grid1(64);
        let f = g.sample(|x| (x[0].sin() * 0.7).exp()).unwrap();
        let h = hessian(&f).unwrap();
        let l = laplacian(&f).unwrap();
        assert_eq!(h.get(0, 0).values(), l.values());
    }

    #[test]
    fn quadrature_examples() {
        let g = grid1(16);
        assert!((integrate(&g.constant(1.0).unwrap()) - 2.0 * PI).abs() < 1e-14);
        let s2 = g.sample(|x| x[0].sin().powi(2)).unwrap();
        assert!((integrate(&s2) - PI).abs() < 1e-14);
    }

    #[test]
    fn exp_cos_integral_matches_bessel_series() {
        // 2π I_0(1) with I_0(1) = Σ (1/4)^k / (k!)^2.
        let mut i0 = 0.0;
        let mut term = 1.0;
        for k in 0..30 {
            if k > 0 {
                term *= 0.25 / (k as f64 * k as f64);
            }
            i0 += term;
        }
        let g = grid1(64);
        let f = g.sample(|x| x[0].cos().exp()).unwrap();
        assert!((integrate(&f) - 2.0 * PI * i0).abs() < 1e-13);
        assert!((2.0 * PI * i0 - 7.95493).abs() < 1e-5);
    }

    #[test]
    fn non_finite_rejected() {
        let g = grid1(8);
        let mut v = vec![1.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(
            ScalarField::new(g, v),
            Err(Error::NonFinite { index: 3 })
        ));
    }

    #[test]
    fn density_tag() {
        let g = grid1(16);
        let u = g.constant(1.0 / (2.0 * PI)).unwrap();
        u.check_density(1e-12).unwrap();
        assert!(g.constant(1.0).unwrap().check_density(1e-12).is_err());
        assert!(g.constant(0.0).unwrap().check_density(1e-12).is_err());
    }
}
