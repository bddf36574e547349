//! Time derivatives of `∫u²` and `S_q` along the heat flow, checked against
//! finite differences of the exactly evolved densities.
//!
//! With `u = φ^{1/(1+δ)}`, `q = 2/(1+δ)` and `bracket = laplacian_sq + δ cross`:
//!
//! ```text
//! d/dt ½∫u²  = -(1-δ) dirichlet
//! d²/dt² ∫u² = 4(1-δ) bracket
//! d²/dt² S_q = -4(1-δ) bracket/(q-1) = -(8/q) bracket
//! ```
//!
//! The last form is used everywhere; at `q = 1` it is `d²H/dt²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    self, report, Backend, FunctionalReport, PositiveField, ReportContext, FUNCTIONAL_EPS_TAIL,
};
use crate::grid::ScalarField;
use crate::heatflow::{delta_transform, evolve_torus, q_to_delta, DeltaIndex, MixtureField};
use crate::inequalities::SurdConstant;
use crate::mixtures::{quadrature_box, GaussianMixture, QuadratureBox};
use crate::numerics::{fmt17, fmt17_opt};

/// Upper end `2(√5+1)/√5` of the entropic indices covered in `d > 1`.
pub const MULTI_D_Q_MAX: SurdConstant = SurdConstant::new(10, 2, 5);
/// Upper end of the entropic indices covered in `d = 1`.
pub const ONE_D_Q_MAX: f64 = 3.0;
/// Earliest time a scan may use.
pub const T_MIN: f64 = 0.01;
/// Sign tolerance on `d²S_q/dt²`, relative to its scale.
pub const CONCAVITY_RTOL: f64 = 1e-8;
/// Accepted window for the measured finite-difference order.
pub const FD_ORDER_RANGE: (f64, f64) = (1.7, 2.3);
/// Relative rounding level assumed for one evaluation of a flow quantity.
const VALUE_EPS: f64 = 1e-15;

/// Whether `q` lies in the range where concavity is claimed (`q = 1` is the
/// Shannon case and always included).
pub fn q_in_claimed_range(q: f64, dim: usize) -> bool {
    if q == 1.0 {
        return true;
    }
    let top = if dim == 1 { ONE_D_Q_MAX } else { MULTI_D_Q_MAX.value() };
    q > 1.0 && q <= top
}

/// Default finite-difference step for time `t`.
pub fn default_step(t: f64) -> f64 {
    (t / 100.0).max(1e-3)
}

/// Initial density of a flow.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDensity {
    Torus(ScalarField),
    Mixture(GaussianMixture),
}

/// A density at some positive time.
#[derive(Debug, Clone, PartialEq)]
pub enum Evolved {
    Torus(ScalarField),
    Mixture(GaussianMixture),
}

/// `u = φ^{1/(1+δ)}` on either backend, owned.
#[derive(Debug, Clone, PartialEq)]
pub enum Transformed {
    Torus(ScalarField),
    Mixture(MixtureField),
}

impl Transformed {
    pub fn as_positive(&self) -> PositiveField<'_> {
        match self {
            Transformed::Torus(f) => PositiveField::Torus(f),
            Transformed::Mixture(m) => PositiveField::Mixture(m),
        }
    }
}

impl Evolved {
    pub fn transform(&self, delta: DeltaIndex) -> Result<Transformed> {
        Ok(match self {
            Evolved::Torus(f) => Transformed::Torus(delta_transform(f, delta)?),
            Evolved::Mixture(m) => Transformed::Mixture(MixtureField::new(m.clone(), delta.exponent(), 1.0)?),
        })
    }
}

impl InitialDensity {
    /// Torus densities must be positive with unit mass (to `1e-10`).
    pub fn torus(phi0: ScalarField) -> Result<Self> {
        phi0.check_density(1e-10)?;
        Ok(InitialDensity::Torus(phi0))
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialDensity::Torus(f) => f.grid().dim(),
            InitialDensity::Mixture(m) => m.dim(),
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            InitialDensity::Torus(_) => Backend::Torus,
            InitialDensity::Mixture(_) => Backend::Mixture,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            InitialDensity::Torus(f) => {
                let g = f.grid();
                format!("torus dim={} n={} length={}", g.dim(), g.n(), fmt17(g.length()))
            }
            InitialDensity::Mixture(m) => format!(
                "mixture {}",
                serde_json::to_string(m).unwrap_or_else(|_| "<unserializable>".into())
            ),
        }
    }

    pub fn at(&self, t: f64) -> Result<Evolved> {
        Ok(match self {
            InitialDensity::Torus(f) => Evolved::Torus(evolve_torus(f, t)?),
            InitialDensity::Mixture(m) => Evolved::Mixture(m.evolve(t)?),
        })
    }
}

/// Analytic time derivatives at one `(q, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDerivatives {
    pub q: f64,
    pub delta: f64,
    pub dirichlet: f64,
    pub laplacian_sq: f64,
    pub cross: f64,
    /// `d/dt ½∫u²`.
    pub d_dt_first: f64,
    pub bracket: f64,
    /// `d²/dt² ∫u² = d²/dt² ∫φ^q`.
    pub d2_dt2_int_u2: f64,
    /// `d²/dt² S_q` (`d²H/dt²` at `q = 1`).
    pub d2_dt2_sq: f64,
}

impl TimeDerivatives {
    pub fn from_report(r: &FunctionalReport) -> Self {
        let delta = r.meta.delta;
        let q = r.meta.q;
        let bracket = r.laplacian_sq + delta * r.cross;
        TimeDerivatives {
            q,
            delta,
            dirichlet: r.dirichlet,
            laplacian_sq: r.laplacian_sq,
            cross: r.cross,
            d_dt_first: -(1.0 - delta) * r.dirichlet,
            bracket,
            d2_dt2_int_u2: 4.0 * (1.0 - delta) * bracket,
            d2_dt2_sq: -(8.0 / q) * bracket,
        }
    }

    /// Magnitude against which the sign of `d2_dt2_sq` is judged.
    pub fn scale(&self) -> f64 {
        (8.0 / self.q) * (self.laplacian_sq + (self.delta * self.cross).abs())
    }

    pub fn concave_within(&self, rtol: f64) -> bool {
        self.d2_dt2_sq <= rtol * self.scale()
    }
}

/// `d/dt ½∫u² = -(1-δ) ∫|∇u|²` for `u` the transform at index `ctx.delta`.
pub fn first_derivative(u: PositiveField<'_>, ctx: &ReportContext) -> Result<f64> {
    let r = report(u, ctx)?;
    Ok(-(1.0 - r.meta.delta) * r.dirichlet)
}

pub fn second_derivative_bracket(u: PositiveField<'_>, ctx: &ReportContext) -> Result<TimeDerivatives> {
    Ok(TimeDerivatives::from_report(&report(u, ctx)?))
}

/// Report of the transform of `φ_t` at index `q`.
pub fn report_at(initial: &InitialDensity, q: f64, t: f64, ctx: &ReportContext) -> Result<FunctionalReport> {
    let delta = q_to_delta(q)?;
    let ctx = ReportContext { delta, ..ctx.at_time(t) };
    let u = initial.at(t)?.transform(delta)?;
    report(u.as_positive(), &ctx)
}

/// Quantity sampled along the flow by the finite-difference oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowQuantity {
    /// `∫φ_s^q`
    PowerIntegral(f64),
    /// `-∫φ_s log φ_s`
    Shannon,
    /// `∫|∇φ_s|²/φ_s`
    Fisher,
}

impl FlowQuantity {
    pub fn name(&self) -> &'static str {
        match self {
            FlowQuantity::PowerIntegral(_) => "int_phi_q",
            FlowQuantity::Shannon => "shannon_h",
            FlowQuantity::Fisher => "fisher",
        }
    }
}

/// Evaluates a [`FlowQuantity`] at several times, on mixtures with one
/// quadrature box and node set shared by all times.
struct FlowSampler<'a> {
    initial: &'a InitialDensity,
    quantity: FlowQuantity,
    mixture_box: Option<QuadratureBox>,
    ctx: ReportContext,
}

impl<'a> FlowSampler<'a> {
    fn new(initial: &'a InitialDensity, quantity: FlowQuantity, t_lo: f64, t_hi: f64, ctx: &ReportContext) -> Result<Self> {
        let mixture_box = match initial {
            InitialDensity::Torus(_) => None,
            InitialDensity::Mixture(m) => {
                let wide = quadrature_box(m, t_hi, FUNCTIONAL_EPS_TAIL)?;
                let narrow = m.evolve(t_lo)?;
                let sampler = FlowSampler {
                    initial,
                    quantity,
                    mixture_box: None,
                    ctx: *ctx,
                };
                let r = wide.integrate_adaptive(1, 1e-14, |x, out| out[0] = sampler.integrand(&narrow, x))?;
                Some(wide.with_points(r.points))
            }
        };
        Ok(FlowSampler {
            initial,
            quantity,
            mixture_box,
            ctx: *ctx,
        })
    }

    fn integrand(&self, m: &GaussianMixture, x: &[f64]) -> f64 {
        match self.quantity {
            FlowQuantity::PowerIntegral(q) => m.density(x).powf(q),
            FlowQuantity::Shannon => {
                let p = m.density(x);
                if p > 0.0 {
                    -p * p.ln()
                } else {
                    0.0
                }
            }
            FlowQuantity::Fisher => {
                let j = m.log_jet(x, false);
                j.value * j.grad_sq()
            }
        }
    }

    fn value(&self, s: f64) -> Result<f64> {
        match (self.initial.at(s)?, &self.mixture_box) {
            (Evolved::Mixture(m), Some(b)) => Ok(b.integrate_many(1, |x, out| out[0] = self.integrand(&m, x))[0]),
            (Evolved::Torus(phi), _) => {
                let f = PositiveField::Torus(&phi);
                match self.quantity {
                    FlowQuantity::PowerIntegral(q) => functionals::power_integral(f, q),
                    FlowQuantity::Shannon => functionals::shannon(f),
                    FlowQuantity::Fisher => {
                        let ctx = ReportContext {
                            delta: DeltaIndex::new(1.0)?,
                            ..self.ctx
                        };
                        let u = delta_transform(&phi, ctx.delta)?;
                        Ok(4.0 * report(PositiveField::Torus(&u), &ctx)?.dirichlet)
                    }
                }
            }
            (Evolved::Mixture(_), None) => Err(Error::degenerate("mixture sampler without a quadrature box")),
        }
    }
}

fn check_stencil(t: f64, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param(format!("finite-difference step must be positive, got {h}")));
    }
    if !(t - 2.0 * h > 0.0) {
        return Err(Error::param(format!("finite-difference stencil needs t - 2h > 0 (t = {t}, h = {h})")));
    }
    Ok(())
}

/// `(f(t+h) - 2f(t) + f(t-h))/h²` for `f(s) = ∫φ_s^q`.
pub fn fd_second_derivative(initial: &InitialDensity, q: f64, t: f64, h: f64) -> Result<f64> {
    check_stencil(t, h)?;
    let s = FlowSampler::new(initial, FlowQuantity::PowerIntegral(q), t - h, t + h, &ReportContext::default())?;
    Ok((s.value(t + h)? - 2.0 * s.value(t)? + s.value(t - h)?) / (h * h))
}

/// Central second differences at steps `h, h/2, h/4`, compared with an
/// analytic value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdLadder {
    pub quantity: FlowQuantity,
    pub t: f64,
    pub steps: [f64; 3],
    pub values: [f64; 3],
    pub analytic: f64,
    pub gaps: [f64; 3],
    /// `log2(gap(h_i)/gap(h_{i+1}))`, when both gaps sit above rounding.
    pub orders: [Option<f64>; 2],
    /// Rounding level of the second difference at each step.
    pub noise: [f64; 3],
}

impl FdLadder {
    /// Gap at the smallest step.
    pub fn best_gap(&self) -> f64 {
        self.gaps[2]
    }

    /// Measured orders inside [`FD_ORDER_RANGE`], or the finest gap already at rounding level.
    pub fn passes(&self) -> bool {
        let measured: Vec<f64> = self.orders.iter().flatten().copied().collect();
        if measured.is_empty() {
            return self.gaps[2] <= 10.0 * self.noise[2];
        }
        measured.iter().all(|o| *o >= FD_ORDER_RANGE.0 && *o <= FD_ORDER_RANGE.1)
    }
}

/// Second-difference ladder of `quantity` at `t`, starting from step `h`.
/// Errors when the differences between successive steps grow, i.e. the
/// step is too large to be in the asymptotic regime.
pub fn fd_ladder(initial: &InitialDensity, quantity: FlowQuantity, t: f64, h: f64, analytic: f64, ctx: &ReportContext) -> Result<FdLadder> {
    check_stencil(t, h)?;
    let sampler = FlowSampler::new(initial, quantity, t - h, t + h, ctx)?;
    let centre = sampler.value(t)?;
    let steps = [h, h / 2.0, h / 4.0];
    let mut values = [0.0; 3];
    let mut noise = [0.0; 3];
    for (i, &k) in steps.iter().enumerate() {
        let plus = sampler.value(t + k)?;
        let minus = sampler.value(t - k)?;
        values[i] = (plus - 2.0 * centre + minus) / (k * k);
        noise[i] = 4.0 * VALUE_EPS * centre.abs().max(plus.abs()) / (k * k);
    }
    let d1 = values[0] - values[1];
    let d2 = values[1] - values[2];
    if d1.abs() > 10.0 * noise[1] && d2.abs() > d1.abs() {
        return Err(Error::Resolution {
            what: format!("finite-difference ladder at t = {t} is not converging; step {h} too large"),
            ratio: (d2 / d1).abs(),
            threshold: 1.0,
        });
    }
    let gaps = [
        (values[0] - analytic).abs(),
        (values[1] - analytic).abs(),
        (values[2] - analytic).abs(),
    ];
    let order = |i: usize| {
        (gaps[i] > 10.0 * noise[i] && gaps[i + 1] > 10.0 * noise[i + 1]).then(|| (gaps[i] / gaps[i + 1]).log2())
    };
    Ok(FdLadder {
        quantity,
        t,
        steps,
        values,
        analytic,
        gaps,
        orders: [order(0), order(1)],
        noise,
    })
}

/// Finite-difference settings of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSettings {
    /// Fixed first step; `None` uses [`default_step`].
    pub step: Option<f64>,
    pub enabled: bool,
}

impl Default for FdSettings {
    fn default() -> Self {
        FdSettings {
            step: None,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub q: f64,
    pub delta: f64,
    pub t: f64,
    pub d_dt_first: f64,
    pub bracket: f64,
    pub d2_dt2_int_u2: f64,
    pub d2_dt2_sq: f64,
    pub scale: f64,
    /// Which quantity the finite difference was taken of: `∫φ^q`, or `H` at `q = 1`.
    pub fd_quantity: Option<FlowQuantity>,
    pub fd_second_derivative: Option<f64>,
    pub fd_gap: Option<f64>,
    pub fd_order: Option<f64>,
    pub fd_passes: Option<bool>,
    pub in_range: bool,
    pub concave: bool,
}

impl ScanRow {
    pub const CSV_HEADER: &'static str = "q,delta,t,d_dt_first,bracket,d2_dt2_int_u2,d2_dt2_Sq,scale,fd_quantity,fd_second_derivative,fd_gap,fd_order,fd_passes,in_range,concave";

    pub fn csv_row(&self) -> String {
        [
            fmt17(self.q),
            fmt17(self.delta),
            fmt17(self.t),
            fmt17(self.d_dt_first),
            fmt17(self.bracket),
            fmt17(self.d2_dt2_int_u2),
            fmt17(self.d2_dt2_sq),
            fmt17(self.scale),
            self.fd_quantity.map(|q| q.name().to_string()).unwrap_or_default(),
            fmt17_opt(self.fd_second_derivative),
            fmt17_opt(self.fd_gap),
            fmt17_opt(self.fd_order),
            self.fd_passes.map(|b| b.to_string()).unwrap_or_default(),
            self.in_range.to_string(),
            self.concave.to_string(),
        ]
        .join(",")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub rows: usize,
    pub in_range_rows: usize,
    /// In-range rows with `d²S_q/dt²` above tolerance.
    pub in_range_positive: usize,
    /// Exploratory rows with `d²S_q/dt²` above tolerance (never asserted).
    pub exploratory_positive: usize,
    /// In-range rows whose finite-difference ladder failed its order check.
    pub fd_failures: usize,
    pub max_fd_gap: f64,
}

impl ScanSummary {
    pub fn claims_hold(&self) -> bool {
        self.in_range_positive == 0 && self.fd_failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityScan {
    pub backend: Backend,
    pub dim: usize,
    pub initial: String,
    pub rows: Vec<ScanRow>,
    pub summary: ScanSummary,
}

impl ConcavityScan {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(ScanRow::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

fn scan_row(initial: &InitialDensity, q: f64, t: f64, ctx: &ReportContext, fd: &FdSettings) -> Result<ScanRow> {
    let r = report_at(initial, q, t, ctx)?;
    let der = TimeDerivatives::from_report(&r);
    let in_range = q_in_claimed_range(q, initial.dim());
    let mut row = ScanRow {
        q,
        delta: der.delta,
        t,
        d_dt_first: der.d_dt_first,
        bracket: der.bracket,
        d2_dt2_int_u2: der.d2_dt2_int_u2,
        d2_dt2_sq: der.d2_dt2_sq,
        scale: der.scale(),
        fd_quantity: None,
        fd_second_derivative: None,
        fd_gap: None,
        fd_order: None,
        fd_passes: None,
        in_range,
        concave: der.concave_within(CONCAVITY_RTOL),
    };
    if fd.enabled {
        let h = fd.step.unwrap_or_else(|| default_step(t));
        let (quantity, analytic) = if q == 1.0 {
            (FlowQuantity::Shannon, der.d2_dt2_sq)
        } else {
            (FlowQuantity::PowerIntegral(q), der.d2_dt2_int_u2)
        };
        let ladder = fd_ladder(initial, quantity, t, h, analytic, ctx)?;
        row.fd_quantity = Some(quantity);
        row.fd_second_derivative = Some(ladder.values[0]);
        row.fd_gap = Some(ladder.gaps[0]);
        row.fd_order = ladder.orders.iter().flatten().last().copied();
        row.fd_passes = Some(ladder.passes());
    }
    Ok(row)
}

/// Every `(q, t)` combination, rows in `q`-major order.
pub fn concavity_scan(
    initial: &InitialDensity,
    q_list: &[f64],
    t_list: &[f64],
    ctx: &ReportContext,
    fd: &FdSettings,
) -> Result<ConcavityScan> {
    for &t in t_list {
        if !(t >= T_MIN) {
            return Err(Error::param(format!("scan times must be at least {T_MIN}, got {t}")));
        }
    }
    let pairs: Vec<(f64, f64)> = q_list.iter().flat_map(|&q| t_list.iter().map(move |&t| (q, t))).collect();
    let rows = pairs
        .par_iter()
        .map(|&(q, t)| scan_row(initial, q, t, ctx, fd))
        .collect::<Result<Vec<_>>>()?;
    let mut summary = ScanSummary {
        rows: rows.len(),
        ..ScanSummary::default()
    };
    for r in &rows {
        if r.in_range {
            summary.in_range_rows += 1;
            if !r.concave {
                summary.in_range_positive += 1;
            }
            if r.fd_passes == Some(false) {
                summary.fd_failures += 1;
            }
            summary.max_fd_gap = summary.max_fd_gap.max(r.fd_gap.unwrap_or(0.0));
        } else if !r.concave {
            summary.exploratory_positive += 1;
        }
    }
    Ok(ConcavityScan {
        backend: initial.backend(),
        dim: initial.dim(),
        initial: initial.describe(),
        rows,
        summary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShannonRow {
    pub t: f64,
    pub entropy: f64,
    /// `∫|∇φ|²/φ = 4∫|∇√φ|² = dH/dt`.
    pub fisher: f64,
    /// Central difference of `H`.
    pub fisher_fd: f64,
    /// `-8 bracket` at `δ = 1`.
    pub d2h_dt2: f64,
    /// Central difference of the Fisher information.
    pub d2h_dt2_fd: f64,
}

/// Entropy, Fisher information and `d²H/dt²` at each time, with central
/// differences of step `h` as oracles.
pub fn shannon_branch(initial: &InitialDensity, t_list: &[f64], h: f64, ctx: &ReportContext) -> Result<Vec<ShannonRow>> {
    let delta = DeltaIndex::new(1.0)?;
    let ctx = ReportContext { delta, ..*ctx };
    t_list
        .par_iter()
        .map(|&t| {
            check_stencil(t, h)?;
            let u = initial.at(t)?.transform(delta)?;
            let r = report(u.as_positive(), &ctx.at_time(t))?;
            let der = TimeDerivatives::from_report(&r);
            let hs = FlowSampler::new(initial, FlowQuantity::Shannon, t - h, t + h, &ctx)?;
            let fs = FlowSampler::new(initial, FlowQuantity::Fisher, t - h, t + h, &ctx)?;
            Ok(ShannonRow {
                t,
                entropy: r.shannon_h,
                fisher: 4.0 * r.dirichlet,
                fisher_fd: (hs.value(t + h)? - hs.value(t - h)?) / (2.0 * h),
                d2h_dt2: der.d2_dt2_sq,
                d2h_dt2_fd: (fs.value(t + h)? - fs.value(t - h)?) / (2.0 * h),
            })
        })
        .collect()
}
