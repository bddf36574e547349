//! Integral functionals of a positive function `u` (with `v = √u`):
//!
//! | entry          | integrand            |
//! |----------------|----------------------|
//! | `dirichlet`    | `|∇u|²`              |
//! | `laplacian_sq` | `(Δu)²`              |
//! | `hessian_sq`   | `‖∇²u‖²` (Frobenius) |
//! | `quartic`      | `|∇u|⁴/u²`           |
//! | `cross`        | `Δu |∇u|²/u`         |
//! | `hess_sqrt`    | `u ‖∇²v‖²`           |
//! | `lap_sqrt`     | `u (Δv)²`            |
//!
//! When `u` is the δ-transform of a density `φ = u^{1+δ}` the report also
//! carries the mass, `∫u² = ∫φ^q`, and the Tsallis and Shannon entropies of `φ`.
//!
//! On the torus every derivative is spectral and every quotient uses the
//! exact pointwise `u`. On mixtures all derivatives of `u` and `v` come from
//! closed-form mixture jets through the chain rule, and the integrals from the
//! self-validating tensor trapezoid rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate_values, ResolutionPolicy, ScalarField, Spectrum, SymmetricFields};
use crate::heatflow::{DeltaIndex, MixtureField};
use crate::mixtures::{quadrature_box, QuadratureBox, RelativeJet};
use crate::numerics::{fmt17, fmt17_opt};

/// Inputs with `min u < POSITIVITY_FLOOR · mean u` are rejected.
pub const POSITIVITY_FLOOR: f64 = 1e-10;

/// Tail tolerance for the boxes behind mixture functionals; integrands carry
/// polynomial weights up to fourth order, hence far below the default.
pub const FUNCTIONAL_EPS_TAIL: f64 = 1e-18;

pub const DEFAULT_QUADRATURE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Torus,
    Mixture,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Torus => "torus",
            Backend::Mixture => "mixture",
        }
    }
}

/// A strictly positive function on either backend.
#[derive(Debug, Clone, Copy)]
pub enum PositiveField<'a> {
    Torus(&'a ScalarField),
    Mixture(&'a MixtureField),
}

impl PositiveField<'_> {
    pub fn dim(&self) -> usize {
        match self {
            PositiveField::Torus(f) => f.grid().dim(),
            PositiveField::Mixture(m) => m.dim(),
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            PositiveField::Torus(_) => Backend::Torus,
            PositiveField::Mixture(_) => Backend::Mixture,
        }
    }
}

/// Settings shared by every functional evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportContext {
    pub t: Option<f64>,
    pub delta: DeltaIndex,
    pub policy: ResolutionPolicy,
    pub quadrature_rtol: f64,
}

impl ReportContext {
    pub fn new(delta: DeltaIndex) -> Self {
        ReportContext {
            t: None,
            delta,
            policy: ResolutionPolicy::default(),
            quadrature_rtol: DEFAULT_QUADRATURE_RTOL,
        }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }
}

impl Default for ReportContext {
    fn default() -> Self {
        ReportContext::new(DeltaIndex::new(0.0).expect("0 is a valid δ"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub backend: Backend,
    pub dim: usize,
    /// Grid points per axis (torus) or quadrature nodes per axis (mixture).
    pub resolution: usize,
    pub t: Option<f64>,
    pub delta: f64,
    pub q: f64,
    /// Sample minimum of `u`; mixtures are positive in closed form and leave it empty.
    pub min_u: Option<f64>,
}

/// Every functional of one field at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub meta: ReportMeta,
    pub mass: f64,
    pub int_u2: f64,
    /// `(1 - ∫φ^q)/(q - 1)`; empty in the Shannon case `δ = 1`.
    pub tsallis_sq: Option<f64>,
    pub shannon_h: f64,
    pub dirichlet: f64,
    pub laplacian_sq: f64,
    pub hessian_sq: f64,
    pub quartic: f64,
    pub cross: f64,
    pub hess_sqrt: f64,
    pub lap_sqrt: f64,
}

impl FunctionalReport {
    pub const CSV_HEADER: &'static str = "backend,dim,resolution,t,delta,q,min_u,mass,int_u2,tsallis_sq,shannon_h,dirichlet,laplacian_sq,hessian_sq,quartic,cross,hess_sqrt,lap_sqrt";

    pub fn csv_row(&self) -> String {
        let m = &self.meta;
        [
            m.backend.as_str().to_string(),
            m.dim.to_string(),
            m.resolution.to_string(),
            fmt17_opt(m.t),
            fmt17(m.delta),
            fmt17(m.q),
            fmt17_opt(m.min_u),
            fmt17(self.mass),
            fmt17(self.int_u2),
            fmt17_opt(self.tsallis_sq),
            fmt17(self.shannon_h),
            fmt17(self.dirichlet),
            fmt17(self.laplacian_sq),
            fmt17(self.hessian_sq),
            fmt17(self.quartic),
            fmt17(self.cross),
            fmt17(self.hess_sqrt),
            fmt17(self.lap_sqrt),
        ]
        .join(",")
    }

    /// Relative residual of the integrated algebraic identity
    /// `8 lap_sqrt = 2 laplacian_sq - 2 cross + quartic/2`.
    pub fn decomposition_residual(&self) -> f64 {
        let lhs = 8.0 * self.lap_sqrt;
        let rhs = 2.0 * self.laplacian_sq - 2.0 * self.cross + 0.5 * self.quartic;
        let scale = lhs.abs() + 2.0 * self.laplacian_sq + 2.0 * self.cross.abs() + 0.5 * self.quartic;
        (lhs - rhs).abs() / (scale + crate::numerics::RELATIVE_FLOOR)
    }

    /// Entries that must be nonnegative, with their names.
    pub fn nonnegative_entries(&self) -> [(&'static str, f64); 6] {
        [
            ("dirichlet", self.dirichlet),
            ("laplacian_sq", self.laplacian_sq),
            ("hessian_sq", self.hessian_sq),
            ("quartic", self.quartic),
            ("hess_sqrt", self.hess_sqrt),
            ("lap_sqrt", self.lap_sqrt),
        ]
    }
}

// Indices of the per-node integrands.
const MASS: usize = 0;
const INT_U2: usize = 1;
const NEG_ENTROPY: usize = 2;
const DIRICHLET: usize = 3;
const LAP_SQ: usize = 4;
const HESS_SQ: usize = 5;
const QUARTIC: usize = 6;
const CROSS: usize = 7;
const HESS_SQRT: usize = 8;
const LAP_SQRT: usize = 9;
const N_TERMS: usize = 10;

/// Per-node values needed by every integrand, in absolute (not relative) form.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NodeValues {
    pub u: f64,
    pub log_u: f64,
    pub grad_sq: f64,
    pub lap: f64,
    pub hess_sq: f64,
    pub hess_v_sq: f64,
    pub lap_v: f64,
}

fn fill_terms(n: &NodeValues, one_plus_delta: f64, out: &mut [f64]) {
    let phi = (one_plus_delta * n.log_u).exp();
    out[MASS] = phi;
    out[INT_U2] = n.u * n.u;
    out[NEG_ENTROPY] = phi * one_plus_delta * n.log_u;
    out[DIRICHLET] = n.grad_sq;
    out[LAP_SQ] = n.lap * n.lap;
    out[HESS_SQ] = n.hess_sq;
    let g_over_u = n.grad_sq / n.u;
    out[QUARTIC] = g_over_u * g_over_u;
    out[CROSS] = n.lap * g_over_u;
    out[HESS_SQRT] = n.u * n.hess_v_sq;
    out[LAP_SQRT] = n.u * n.lap_v * n.lap_v;
}

fn assemble(sums: &[f64], meta: ReportMeta) -> FunctionalReport {
    let q = meta.q;
    FunctionalReport {
        tsallis_sq: if meta.delta == 1.0 {
            None
        } else {
            Some((1.0 - sums[INT_U2]) / (q - 1.0))
        },
        meta,
        mass: sums[MASS],
        int_u2: sums[INT_U2],
        shannon_h: -sums[NEG_ENTROPY],
        dirichlet: sums[DIRICHLET],
        laplacian_sq: sums[LAP_SQ],
        hessian_sq: sums[HESS_SQ],
        quartic: sums[QUARTIC],
        cross: sums[CROSS],
        hess_sqrt: sums[HESS_SQRT],
        lap_sqrt: sums[LAP_SQRT],
    }
}

/// Rejects torus inputs whose minimum falls below the positivity floor.
pub fn check_positivity_floor(u: &ScalarField) -> Result<f64> {
    let min = u.min();
    let mean = u.mean();
    if !(mean > 0.0) || !(min >= POSITIVITY_FLOOR * mean) {
        return Err(Error::degenerate(format!(
            "u has minimum {min:e} below the positivity floor {POSITIVITY_FLOOR:e} x mean {mean:e}"
        )));
    }
    Ok(min)
}

/// Spectral derivatives of `u` and `v = √u` on the torus.
pub(crate) struct TorusDerivatives {
    pub u: ScalarField,
    pub spec_u: Spectrum,
    pub grad_u: Vec<ScalarField>,
    pub hess_u: SymmetricFields,
    pub lap_u: ScalarField,
    pub spec_v: Spectrum,
    pub hess_v: SymmetricFields,
    pub lap_v: ScalarField,
    pub min_u: f64,
}

impl TorusDerivatives {
    pub fn new(u: &ScalarField, policy: &ResolutionPolicy) -> Result<Self> {
        u.ensure_finite()?;
        let min_u = check_positivity_floor(u)?;
        let spec_u = Spectrum::of(u);
        policy.check_spectrum(&spec_u, "u")?;
        let v = u.map(f64::sqrt)?;
        let spec_v = Spectrum::of(&v);
        policy.check_spectrum(&spec_v, "v = sqrt(u)")?;
        let dim = u.grid().dim();
        let grad_u = (0..dim).map(|j| spec_u.derivative(j)).collect();
        let hess_u = spec_u.hessian();
        let lap_u = spec_u.laplacian();
        let hess_v = spec_v.hessian();
        let lap_v = spec_v.laplacian();
        Ok(TorusDerivatives {
            u: u.clone(),
            spec_u,
            grad_u,
            hess_u,
            lap_u,
            spec_v,
            hess_v,
            lap_v,
            min_u,
        })
    }

    pub fn len(&self) -> usize {
        self.u.values().len()
    }

    pub fn grad_sq(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for g in &self.grad_u {
            for (o, v) in out.iter_mut().zip(g.values()) {
                *o += v * v;
            }
        }
        out
    }

    pub fn node_values(&self) -> Vec<NodeValues> {
        let grad_sq = self.grad_sq();
        let hess_sq = self.hess_u.frobenius_sq();
        let hess_v_sq = self.hess_v.frobenius_sq();
        (0..self.len())
            .map(|i| {
                let u = self.u.values()[i];
                NodeValues {
                    u,
                    log_u: u.ln(),
                    grad_sq: grad_sq[i],
                    lap: self.lap_u.values()[i],
                    hess_sq: hess_sq[i],
                    hess_v_sq: hess_v_sq[i],
                    lap_v: self.lap_v.values()[i],
                }
            })
            .collect()
    }
}

/// Closed-form node values of `u = scale·φ^a` from the mixture jet.
pub(crate) fn mixture_node(field: &MixtureField, x: &[f64], third: bool) -> (RelativeJet, RelativeJet, f64, f64) {
    let base = field.mixture.log_jet(x, third);
    let a = field.exponent;
    let ju = base.power(a);
    let jv = base.power(0.5 * a);
    let log_u = field.scale.ln() + a * base.value.ln();
    let u = log_u.exp();
    (ju, jv, u, log_u)
}

fn mixture_node_values(field: &MixtureField, x: &[f64]) -> NodeValues {
    let (ju, jv, u, log_u) = mixture_node(field, x, false);
    NodeValues {
        u,
        log_u,
        grad_sq: u * u * ju.grad_sq(),
        lap: u * ju.laplacian(),
        hess_sq: u * u * ju.hessian_sq(),
        // v² = u, so ‖∇²v‖² = u ‖∇²v / v‖²
        hess_v_sq: u * jv.hessian_sq(),
        lap_v: u.sqrt() * jv.laplacian(),
    }
}

/// Quadrature box for functionals of a mixture field.
pub fn functional_box(field: &MixtureField) -> Result<QuadratureBox> {
    quadrature_box(&field.mixture, 0.0, FUNCTIONAL_EPS_TAIL)
}

fn make_meta(backend: Backend, dim: usize, resolution: usize, min_u: Option<f64>, ctx: &ReportContext) -> ReportMeta {
    let delta = ctx.delta.value();
    ReportMeta {
        backend,
        dim,
        resolution,
        t: ctx.t,
        delta,
        q: 2.0 / (1.0 + delta),
        min_u,
    }
}

pub(crate) fn torus_report(derivs: &TorusDerivatives, ctx: &ReportContext) -> FunctionalReport {
    let grid = derivs.u.grid();
    let nodes = derivs.node_values();
    let one_plus_delta = 1.0 + ctx.delta.value();
    let mut columns = vec![vec![0.0; nodes.len()]; N_TERMS];
    let mut buf = [0.0; N_TERMS];
    for (i, n) in nodes.iter().enumerate() {
        fill_terms(n, one_plus_delta, &mut buf);
        for k in 0..N_TERMS {
            columns[k][i] = buf[k];
        }
    }
    let sums: Vec<f64> = columns.iter().map(|c| integrate_values(grid, c)).collect();
    let meta = make_meta(Backend::Torus, grid.dim(), grid.n(), Some(derivs.min_u), ctx);
    assemble(&sums, meta)
}

/// Assembles the full [`FunctionalReport`] of `u`.
pub fn report(u: PositiveField<'_>, ctx: &ReportContext) -> Result<FunctionalReport> {
    let delta = ctx.delta.value();
    match u {
        PositiveField::Torus(f) => {
            let derivs = TorusDerivatives::new(f, &ctx.policy)?;
            Ok(torus_report(&derivs, ctx))
        }
        PositiveField::Mixture(m) => {
            let qbox = functional_box(m)?;
            let r = qbox.integrate_adaptive(N_TERMS, ctx.quadrature_rtol, |x, out| {
                fill_terms(&mixture_node_values(m, x), 1.0 + delta, out)
            })?;
            Ok(assemble(&r.values, make_meta(Backend::Mixture, m.dim(), r.points, None, ctx)))
        }
    }
}

/// `S_q(ρ) = (1 - ∫ρ^q)/(q - 1)` for a positive density on either backend.
pub fn tsallis(rho: PositiveField<'_>, q: f64) -> Result<f64> {
    if q == 1.0 {
        return Err(Error::param("q = 1 is the Shannon entropy; call shannon"));
    }
    if !(q > 0.0) {
        return Err(Error::param(format!("entropic index must be positive, got {q}")));
    }
    Ok((1.0 - power_integral(rho, q)?) / (q - 1.0))
}

/// `∫ρ^q`.
pub fn power_integral(rho: PositiveField<'_>, q: f64) -> Result<f64> {
    match rho {
        PositiveField::Torus(f) => {
            if f.min() <= 0.0 {
                return Err(Error::degenerate("density must be strictly positive"));
            }
            let vals: Vec<f64> = f.values().iter().map(|v| v.powf(q)).collect();
            Ok(integrate_values(f.grid(), &vals))
        }
        PositiveField::Mixture(m) => {
            let qbox = functional_box(m)?;
            let r = qbox.integrate_adaptive(1, DEFAULT_QUADRATURE_RTOL, |x, out| out[0] = m.value(x).powf(q))?;
            Ok(r.values[0])
        }
    }
}

/// `H(ρ) = -∫ρ log ρ`.
pub fn shannon(rho: PositiveField<'_>) -> Result<f64> {
    match rho {
        PositiveField::Torus(f) => {
            if f.min() <= 0.0 {
                return Err(Error::degenerate("density must be strictly positive"));
            }
            let vals: Vec<f64> = f.values().iter().map(|v| -v * v.ln()).collect();
            Ok(integrate_values(f.grid(), &vals))
        }
        PositiveField::Mixture(m) => {
            let qbox = functional_box(m)?;
            let r = qbox.integrate_adaptive(1, DEFAULT_QUADRATURE_RTOL, |x, out| {
                let log_u = m.scale.ln() + m.exponent * m.mixture.density(x).ln();
                out[0] = -log_u.exp() * log_u;
            })?;
            Ok(r.values[0])
        }
    }
}

/// Max over nodes of the pointwise residual of
/// `u(Δv)² = (Δu)²/4 - Δu|∇u|²/(4u) + |∇u|⁴/(16u²)`, relative to the
/// largest pointwise magnitude of its terms. Mixtures are probed on the
/// nodes of their functional box.
pub fn pointwise_b_decomposition(u: PositiveField<'_>, policy: &ResolutionPolicy) -> Result<f64> {
    let nodes: Vec<NodeValues> = match u {
        PositiveField::Torus(f) => TorusDerivatives::new(f, policy)?.node_values(),
        PositiveField::Mixture(m) => {
            let qbox = functional_box(m)?;
            (0..qbox.node_count())
                .map(|i| mixture_node_values(m, &qbox.node(i)[..m.dim()]))
                .collect()
        }
    };
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for n in &nodes {
        let lhs = n.u * n.lap_v * n.lap_v;
        let g = n.grad_sq / n.u;
        let t1 = 0.25 * n.lap * n.lap;
        let t2 = 0.25 * n.lap * g;
        let t3 = g * g / 16.0;
        worst = worst.max((lhs - (t1 - t2 + t3)).abs());
        scale = scale.max(lhs.abs() + t1 + t2.abs() + t3);
    }
    Ok(if scale > 0.0 { worst / scale } else { 0.0 })
}
