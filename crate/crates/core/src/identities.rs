//! Exact identities among the functionals, checked as relative residuals
//! `|a - b| / (|a| + |b| + 1e-300)`.
//!
//! * `cross_lap_sqrt`: `3 cross = quartic + 8 hess_sqrt - 8 lap_sqrt`
//! * `cross_laplacian`: `cross = quartic/2 + 8 hess_sqrt - 2 laplacian_sq`
//! * Bochner: `½Δ|∇u|² = ‖∇²u‖² + ⟨∇Δu, ∇u⟩` pointwise (torus only)
//! * integration by parts:
//!   - `ibp_1`: `∫uΔu = -∫|∇u|²`
//!   - `ibp_2`: `∫Δ|∇u|² = 0`, measured against `2∫‖∇²u‖² + 2∫(Δu)²`
//!   - `ibp_3`: `∫⟨∇Δu, ∇u⟩ = -∫(Δu)²`
//!   - `ibp_4a`: `∫Δu|∇√u|² = -∫⟨∇u, ∇|∇√u|²⟩`
//!   - `ibp_4b`: `∫Δu|∇√u|² = ∫uΔ|∇√u|²`
//! * `one_d_reduction` (d = 1): `quartic = 3 cross`

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::functionals::{
    functional_box, mixture_node, report, torus_report, FunctionalReport, PositiveField, ReportContext,
    TorusDerivatives,
};
use crate::grid::{integrate_values, ScalarField, Spectrum};
use crate::heatflow::MixtureField;
use crate::numerics::{fmt17, fmt17_opt, relative_residual, RELATIVE_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub cross_lap_sqrt: f64,
    pub cross_laplacian: f64,
    /// Torus only: the mixture version would compare a closed form with itself.
    pub bochner: Option<f64>,
    pub ibp_1: f64,
    pub ibp_2: f64,
    pub ibp_3: f64,
    pub ibp_4a: f64,
    pub ibp_4b: f64,
    /// Only in one dimension.
    pub one_d_reduction: Option<f64>,
}

impl IdentityResiduals {
    pub const CSV_HEADER: &'static str = "cross_lap_sqrt,cross_laplacian,bochner,ibp_1,ibp_2,ibp_3,ibp_4a,ibp_4b,one_d_reduction";

    pub fn csv_row(&self) -> String {
        [
            fmt17(self.cross_lap_sqrt),
            fmt17(self.cross_laplacian),
            fmt17_opt(self.bochner),
            fmt17(self.ibp_1),
            fmt17(self.ibp_2),
            fmt17(self.ibp_3),
            fmt17(self.ibp_4a),
            fmt17(self.ibp_4b),
            fmt17_opt(self.one_d_reduction),
        ]
        .join(",")
    }

    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("cross_lap_sqrt", self.cross_lap_sqrt),
            ("cross_laplacian", self.cross_laplacian),
            ("ibp_1", self.ibp_1),
            ("ibp_2", self.ibp_2),
            ("ibp_3", self.ibp_3),
            ("ibp_4a", self.ibp_4a),
            ("ibp_4b", self.ibp_4b),
        ];
        if let Some(b) = self.bochner {
            out.push(("bochner", b));
        }
        if let Some(r) = self.one_d_reduction {
            out.push(("one_d_reduction", r));
        }
        out
    }

    pub fn max(&self) -> f64 {
        self.entries().iter().fold(0.0, |m, (_, v)| m.max(*v))
    }
}

pub fn cross_lap_sqrt_residual(r: &FunctionalReport) -> f64 {
    relative_residual(3.0 * r.cross, r.quartic + 8.0 * r.hess_sqrt - 8.0 * r.lap_sqrt)
}

pub fn cross_laplacian_residual(r: &FunctionalReport) -> f64 {
    relative_residual(r.cross, 0.5 * r.quartic + 8.0 * r.hess_sqrt - 2.0 * r.laplacian_sq)
}

pub fn one_d_reduction_residual(r: &FunctionalReport) -> Option<f64> {
    (r.meta.dim == 1).then(|| relative_residual(r.quartic, 3.0 * r.cross))
}

pub fn check_cross_lap_sqrt(u: PositiveField<'_>, ctx: &ReportContext) -> Result<f64> {
    Ok(cross_lap_sqrt_residual(&report(u, ctx)?))
}

pub fn check_cross_laplacian(u: PositiveField<'_>, ctx: &ReportContext) -> Result<f64> {
    Ok(cross_laplacian_residual(&report(u, ctx)?))
}

pub fn check_1d_reduction(u: PositiveField<'_>, ctx: &ReportContext) -> Result<Option<f64>> {
    Ok(one_d_reduction_residual(&report(u, ctx)?))
}

/// Both sides of the Bochner formula, sampled on the grid.
pub fn bochner_sides(u: &ScalarField) -> (ScalarField, ScalarField) {
    let spec = Spectrum::of(u);
    let d = u.grid().dim();
    let grads: Vec<ScalarField> = (0..d).map(|j| spec.derivative(j)).collect();
    let grad_sq = sum_of_products(&grads, &grads);
    let gsq = ScalarField::from_raw(u.grid().clone(), grad_sq);
    let lhs = Spectrum::of(&gsq).laplacian().scaled(0.5);
    let hess_sq = spec.hessian().frobenius_sq();
    let grad_lap: Vec<ScalarField> = (0..d).map(|j| spec.grad_laplacian(j)).collect();
    let dot = sum_of_products(&grad_lap, &grads);
    let rhs: Vec<f64> = hess_sq.iter().zip(&dot).map(|(a, b)| a + b).collect();
    (lhs, ScalarField::from_raw(u.grid().clone(), rhs))
}

/// Max over the grid of `|½Δ|∇u|² - ‖∇²u‖² - ⟨∇Δu, ∇u⟩|`, divided by the
/// max over the grid of the sum of the magnitudes of the three terms.
/// Needs no positivity.
pub fn check_bochner(u: &ScalarField) -> Result<f64> {
    u.ensure_finite()?;
    let (lhs, rhs) = bochner_sides(u);
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for (a, b) in lhs.values().iter().zip(rhs.values()) {
        worst = worst.max((a - b).abs());
        scale = scale.max(a.abs() + b.abs());
    }
    Ok(if scale > 0.0 { worst / scale } else { 0.0 })
}

fn sum_of_products(a: &[ScalarField], b: &[ScalarField]) -> Vec<f64> {
    let mut out = vec![0.0; a[0].values().len()];
    for (x, y) in a.iter().zip(b) {
        for ((o, p), q) in out.iter_mut().zip(x.values()).zip(y.values()) {
            *o += p * q;
        }
    }
    out
}

/// Raw integrals entering the integration-by-parts residuals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct IbpIntegrals {
    u_lap_u: f64,
    grad_sq: f64,
    lap_grad_sq: f64,
    hess_sq: f64,
    lap_sq: f64,
    grad_lap_dot_grad: f64,
    lap_u_grad_v_sq: f64,
    grad_u_dot_grad_grad_v_sq: f64,
    u_lap_grad_v_sq: f64,
}

impl IbpIntegrals {
    fn residuals(&self) -> [f64; 5] {
        let ibp_2 = self.lap_grad_sq.abs() / (2.0 * self.hess_sq + 2.0 * self.lap_sq + RELATIVE_FLOOR);
        [
            relative_residual(self.u_lap_u, -self.grad_sq),
            ibp_2,
            relative_residual(self.grad_lap_dot_grad, -self.lap_sq),
            relative_residual(self.lap_u_grad_v_sq, -self.grad_u_dot_grad_grad_v_sq),
            relative_residual(self.lap_u_grad_v_sq, self.u_lap_grad_v_sq),
        ]
    }
}

fn torus_ibp(derivs: &TorusDerivatives) -> IbpIntegrals {
    let u = &derivs.u;
    let grid = u.grid();
    let d = grid.dim();
    let int = |v: &[f64]| integrate_values(grid, v);
    let pointwise = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };

    let grad_sq = derivs.grad_sq();
    let lap_u = derivs.lap_u.values();
    let lap_grad_sq = Spectrum::of(&ScalarField::from_raw(grid.clone(), grad_sq.clone())).laplacian();
    let grad_lap: Vec<ScalarField> = (0..d).map(|j| derivs.spec_u.grad_laplacian(j)).collect();
    let grad_v: Vec<ScalarField> = (0..d).map(|j| derivs.spec_v.derivative(j)).collect();
    let z = ScalarField::from_raw(grid.clone(), sum_of_products(&grad_v, &grad_v));
    let spec_z = Spectrum::of(&z);
    let grad_z: Vec<ScalarField> = (0..d).map(|j| spec_z.derivative(j)).collect();
    let lap_z = spec_z.laplacian();

    IbpIntegrals {
        u_lap_u: int(&pointwise(u.values(), lap_u)),
        grad_sq: int(&grad_sq),
        lap_grad_sq: int(lap_grad_sq.values()),
        hess_sq: int(&derivs.hess_u.frobenius_sq()),
        lap_sq: int(&pointwise(lap_u, lap_u)),
        grad_lap_dot_grad: int(&sum_of_products(&grad_lap, &derivs.grad_u)),
        lap_u_grad_v_sq: int(&pointwise(lap_u, z.values())),
        grad_u_dot_grad_grad_v_sq: int(&sum_of_products(&derivs.grad_u, &grad_z)),
        u_lap_grad_v_sq: int(&pointwise(u.values(), lap_z.values())),
    }
}

fn mixture_ibp(m: &MixtureField, rtol: f64) -> Result<IbpIntegrals> {
    let d = m.dim();
    let qbox = functional_box(m)?;
    let r = qbox.integrate_adaptive(9, rtol, |x, out| {
        let (ju, jv, u, _) = mixture_node(m, x, true);
        let lap = u * ju.laplacian();
        let grad_sq = u * u * ju.grad_sq();
        let hess_sq = u * u * ju.hessian_sq();
        let mut gl_dot_g = 0.0;
        // ∇|∇v|² = 2 v² (∇²v/v)(∇v/v) = 2u h_v g_v
        let mut gu_dot_gz = 0.0;
        let mut glv_dot_gv = 0.0;
        for i in 0..d {
            gl_dot_g += ju.grad_laplacian(i) * ju.g[i];
            let hg: f64 = (0..d).map(|j| jv.h[i][j] * jv.g[j]).sum();
            gu_dot_gz += ju.g[i] * hg;
            glv_dot_gv += jv.grad_laplacian(i) * jv.g[i];
        }
        let z = u * jv.grad_sq();
        let lap_z = 2.0 * u * (jv.hessian_sq() + glv_dot_gv);
        out[0] = u * lap;
        out[1] = grad_sq;
        out[2] = 2.0 * hess_sq + 2.0 * u * u * gl_dot_g;
        out[3] = hess_sq;
        out[4] = lap * lap;
        out[5] = u * u * gl_dot_g;
        out[6] = lap * z;
        out[7] = 2.0 * u * u * gu_dot_gz;
        out[8] = u * lap_z;
    })?;
    let v = &r.values;
    Ok(IbpIntegrals {
        u_lap_u: v[0],
        grad_sq: v[1],
        lap_grad_sq: v[2],
        hess_sq: v[3],
        lap_sq: v[4],
        grad_lap_dot_grad: v[5],
        lap_u_grad_v_sq: v[6],
        grad_u_dot_grad_grad_v_sq: v[7],
        u_lap_grad_v_sq: v[8],
    })
}

/// Every residual, sharing one set of derivatives. The report is returned
/// alongside so callers can log it.
pub fn residual_suite(u: PositiveField<'_>, ctx: &ReportContext) -> Result<(IdentityResiduals, FunctionalReport)> {
    let (rep, ibp, bochner) = match u {
        PositiveField::Torus(f) => {
            let derivs = TorusDerivatives::new(f, &ctx.policy)?;
            let rep = torus_report(&derivs, ctx);
            (rep, torus_ibp(&derivs), Some(check_bochner(f)?))
        }
        PositiveField::Mixture(m) => (report(u, ctx)?, mixture_ibp(m, ctx.quadrature_rtol)?, None),
    };
    let [ibp_1, ibp_2, ibp_3, ibp_4a, ibp_4b] = ibp.residuals();
    let res = IdentityResiduals {
        cross_lap_sqrt: cross_lap_sqrt_residual(&rep),
        cross_laplacian: cross_laplacian_residual(&rep),
        bochner,
        ibp_1,
        ibp_2,
        ibp_3,
        ibp_4a,
        ibp_4b,
        one_d_reduction: one_d_reduction_residual(&rep),
    };
    Ok((res, rep))
}

/// The five integration-by-parts residuals (the other entries of the
/// returned suite are filled as well).
pub fn check_ibp_suite(u: PositiveField<'_>, ctx: &ReportContext) -> Result<IdentityResiduals> {
    residual_suite(u, ctx).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::heatflow::{delta_transform_mixture, random_torus_density, DeltaIndex};
    use crate::mixtures::{Component, GaussianMixture};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ctx() -> ReportContext {
        ReportContext::default()
    }

    #[test]
    fn random_torus_density_d2() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = TorusGrid::new(2, 64, 2.0 * PI).unwrap();
        let (_, rho) = random_torus_density(&g, 3, 1.2, &mut rng).unwrap();
        let (r, _) = residual_suite(PositiveField::Torus(&rho), &ctx()).unwrap();
        assert!(r.cross_lap_sqrt < 1e-8 && r.cross_laplacian < 1e-8, "{r:?}");
        for (name, v) in [("ibp_1", r.ibp_1), ("ibp_2", r.ibp_2), ("ibp_3", r.ibp_3), ("ibp_4a", r.ibp_4a), ("ibp_4b", r.ibp_4b)] {
            assert!(v < 1e-10, "{name} = {v}");
        }
        assert!(r.bochner.unwrap() < 1e-9);
        assert!(r.one_d_reduction.is_none());
    }

    #[test]
    fn constant_field_gives_zero_residuals() {
        let g = TorusGrid::new(2, 16, 2.0 * PI).unwrap();
        let u = g.constant(0.3).unwrap();
        let (r, _) = residual_suite(PositiveField::Torus(&u), &ctx()).unwrap();
        assert_eq!(r.max(), 0.0, "{r:?}");
        let g1 = TorusGrid::new(1, 16, 2.0 * PI).unwrap();
        let u1 = g1.constant(0.3).unwrap();
        assert_eq!(check_1d_reduction(PositiveField::Torus(&u1), &ctx()).unwrap(), Some(0.0));
    }

    #[test]
    fn one_d_mixtures() {
        let single = GaussianMixture::single(vec![0.3], 0.8).unwrap();
        let two = GaussianMixture::new(vec![
            Component {
                weight: 0.3,
                mean: vec![-1.2],
                variance: 0.5,
            },
            Component {
                weight: 0.7,
                mean: vec![0.9],
                variance: 0.9,
            },
        ])
        .unwrap();
        for m in [single, two] {
            let f = delta_transform_mixture(&m, DeltaIndex::new(0.4).unwrap());
            let (r, _) = residual_suite(PositiveField::Mixture(&f), &ctx()).unwrap();
            assert!(r.cross_lap_sqrt < 1e-7 && r.cross_laplacian < 1e-7, "{r:?}");
            assert!(r.one_d_reduction.unwrap() < 1e-7);
            assert!(r.bochner.is_none());
        }
    }

    #[test]
    fn mixture_d2_ibp() {
        let m = GaussianMixture::new(vec![
            Component {
                weight: 0.6,
                mean: vec![0.0, 0.5],
                variance: 0.6,
            },
            Component {
                weight: 0.4,
                mean: vec![1.0, -0.5],
                variance: 1.3,
            },
        ])
        .unwrap();
        let f = delta_transform_mixture(&m, DeltaIndex::new(-0.25).unwrap());
        let r = check_ibp_suite(PositiveField::Mixture(&f), &ctx()).unwrap();
        assert!(r.max() < 1e-7, "{r:?}");
    }

    #[test]
    fn exp_cos_one_d_reduction() {
        let g = TorusGrid::new(1, 128, 2.0 * PI).unwrap();
        let rho = g.sample(|x| x[0].cos().exp()).unwrap().normalized().unwrap();
        let r = check_1d_reduction(PositiveField::Torus(&rho), &ctx()).unwrap().unwrap();
        assert!(r < 1e-9, "{r}");
    }

    #[test]
    fn d3_random_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = TorusGrid::new(3, 32, 2.0 * PI).unwrap();
        let (_, rho) = random_torus_density(&g, 2, 0.8, &mut rng).unwrap();
        let r = check_cross_laplacian(PositiveField::Torus(&rho), &ctx()).unwrap();
        assert!(r < 1e-7, "{r}");
    }

    #[test]
    fn plane_wave_bochner() {
        let k = 3.0;
        let g = TorusGrid::new(1, 64, 2.0 * PI).unwrap();
        let u = g.sample(|x| (k * x[0]).cos()).unwrap();
        let (lhs, rhs) = bochner_sides(&u);
        for (i, (a, b)) in lhs.values().iter().zip(rhs.values()).enumerate() {
            let x = g.coordinate(i)[0];
            let exact = k.powi(4) * (2.0 * k * x).cos();
            assert!((a - exact).abs() < 1e-9 * k.powi(4));
            assert!((b - exact).abs() < 1e-9 * k.powi(4));
        }
        assert!(check_bochner(&u).unwrap() < 1e-12);
    }

    #[test]
    fn residuals_invariant_under_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = TorusGrid::new(2, 32, 2.0 * PI).unwrap();
        let (_, rho) = random_torus_density(&g, 2, 0.8, &mut rng).unwrap();
        let a = check_cross_lap_sqrt(PositiveField::Torus(&rho), &ctx()).unwrap();
        let b = check_cross_lap_sqrt(PositiveField::Torus(&rho.scaled(5.0)), &ctx()).unwrap();
        assert!((a - b).abs() < 1e-13, "{a} {b}");
    }

    #[test]
    fn csv_row_arity() {
        let g = TorusGrid::new(1, 64, 2.0 * PI).unwrap();
        let u = g.sample(|x| 2.0 + x[0].sin()).unwrap();
        let r = check_ibp_suite(PositiveField::Torus(&u), &ctx()).unwrap();
        assert_eq!(r.csv_row().split(',').count(), IdentityResiduals::CSV_HEADER.split(',').count());
    }
}
