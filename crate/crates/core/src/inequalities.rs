//! Margins of the functional inequalities
//!
//! * `cross ≤ (√5+1) laplacian_sq`
//! * `quartic ≤ (2√5+6) laplacian_sq`
//! * in one dimension, `0 ≤ cross ≤ 3 laplacian_sq`
//!
//! and the two scalar optimizations behind the constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{report, FunctionalReport, PositiveField, ReportContext};
use crate::grid::ScalarField;
use crate::heatflow::MixtureField;
use crate::mixtures::Component;
use crate::numerics::fmt17;

/// The real number `(a + b√5)/c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurdConstant {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl SurdConstant {
    pub const fn new(a: i64, b: i64, c: i64) -> Self {
        SurdConstant { a, b, c }
    }

    pub fn value(self) -> f64 {
        (self.a as f64 + self.b as f64 * 5.0_f64.sqrt()) / self.c as f64
    }
}

impl std::fmt::Display for SurdConstant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let num = match (self.a, self.b) {
            (a, 0) => format!("{a}"),
            (0, 1) => "√5".to_string(),
            (0, b) => format!("{b}√5"),
            (a, 1) => format!("{a}+√5"),
            (a, b) => format!("{a}+{b}√5"),
        };
        if self.c == 1 {
            f.write_str(&num)
        } else {
            write!(f, "({num})/{}", self.c)
        }
    }
}

/// `√5 + 1`, the constant bounding `cross / laplacian_sq`.
pub const CROSS_CONSTANT: SurdConstant = SurdConstant::new(1, 1, 1);
/// `2√5 + 6`, the constant bounding `quartic / laplacian_sq`.
pub const QUARTIC_CONSTANT: SurdConstant = SurdConstant::new(6, 2, 1);
/// `3`, the one-dimensional bound on `cross / laplacian_sq`.
pub const ONE_D_CROSS_CONSTANT: SurdConstant = SurdConstant::new(3, 0, 1);
/// `(1+√5)/2`.
pub const GOLDEN_RATIO: SurdConstant = SurdConstant::new(1, 1, 2);

/// Default tolerance on margins, relative to `|rhs|`.
pub const MARGIN_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityMargin {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    /// `lhs / rhs`, when `rhs > 0`.
    pub ratio: Option<f64>,
    /// `lhs` over the functional on the right without its constant
    /// (e.g. `quartic / laplacian_sq`), when that is positive.
    pub ratio_to_base: Option<f64>,
}

impl InequalityMargin {
    fn new(name: &str, lhs: f64, base: f64, constant: f64) -> Self {
        let rhs = constant * base;
        InequalityMargin {
            name: name.to_string(),
            lhs,
            rhs,
            margin: rhs - lhs,
            ratio: (rhs > 0.0).then(|| lhs / rhs),
            ratio_to_base: (base > 0.0).then(|| lhs / base),
        }
    }

    pub fn tolerance(&self, rtol: f64) -> f64 {
        rtol * self.rhs.abs()
    }

    /// True when the margin is below `-rtol |rhs|`.
    pub fn violated(&self, rtol: f64) -> bool {
        self.margin < -self.tolerance(rtol)
    }

    pub const CSV_HEADER: &'static str = "name,lhs,rhs,margin,ratio";

    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.name,
            fmt17(self.lhs),
            fmt17(self.rhs),
            fmt17(self.margin),
            crate::numerics::fmt17_opt(self.ratio)
        )
    }
}

fn check_zero_base(name: &str, lhs: f64, base: f64) -> Result<()> {
    if base == 0.0 && lhs != 0.0 {
        return Err(Error::degenerate(format!(
            "internal error: {name} has vanishing laplacian_sq but lhs {lhs:e}"
        )));
    }
    Ok(())
}

pub fn cross_margin_of(r: &FunctionalReport) -> Result<InequalityMargin> {
    check_zero_base("cross", r.cross, r.laplacian_sq)?;
    Ok(InequalityMargin::new("cross_sqrt5", r.cross, r.laplacian_sq, CROSS_CONSTANT.value()))
}

pub fn quartic_margin_of(r: &FunctionalReport) -> Result<InequalityMargin> {
    check_zero_base("quartic", r.quartic, r.laplacian_sq)?;
    Ok(InequalityMargin::new("quartic_2sqrt5_6", r.quartic, r.laplacian_sq, QUARTIC_CONSTANT.value()))
}

/// `(cross ≥ 0, cross ≤ 3 laplacian_sq)`; needs `d = 1`.
pub fn one_d_margins_of(r: &FunctionalReport) -> Result<(InequalityMargin, InequalityMargin)> {
    if r.meta.dim != 1 {
        return Err(Error::param(format!("the one-dimensional cross bound needs d = 1, got {}", r.meta.dim)));
    }
    check_zero_base("cross", r.cross, r.laplacian_sq)?;
    let lower = InequalityMargin {
        name: "cross_nonnegative".to_string(),
        lhs: 0.0,
        rhs: r.cross,
        margin: r.cross,
        ratio: (r.cross > 0.0).then_some(0.0),
        ratio_to_base: None,
    };
    let upper = InequalityMargin::new("cross_one_d", r.cross, r.laplacian_sq, ONE_D_CROSS_CONSTANT.value());
    Ok((lower, upper))
}

pub fn sqrt5_cross_margin(u: PositiveField<'_>, ctx: &ReportContext) -> Result<InequalityMargin> {
    cross_margin_of(&report(u, ctx)?)
}

pub fn functional_inequality_margin(u: PositiveField<'_>, ctx: &ReportContext) -> Result<InequalityMargin> {
    quartic_margin_of(&report(u, ctx)?)
}

pub fn one_d_cross_bound(u: PositiveField<'_>, ctx: &ReportContext) -> Result<(InequalityMargin, InequalityMargin)> {
    one_d_margins_of(&report(u, ctx)?)
}

/// Every margin applicable to a report (the one-dimensional pair only for d = 1).
pub fn all_margins(r: &FunctionalReport) -> Result<Vec<InequalityMargin>> {
    let mut out = vec![cross_margin_of(r)?, quartic_margin_of(r)?];
    if r.meta.dim == 1 {
        let (lo, hi) = one_d_margins_of(r)?;
        out.push(lo);
        out.push(hi);
    }
    Ok(out)
}

/// Rearranging `cross = quartic/2 + 8 hess_sqrt - 2 laplacian_sq` gives
/// `quartic = 2 cross - 16 hess_sqrt + 4 laplacian_sq`, so the cross bound and
/// `hess_sqrt ≥ 0` force the quartic bound. This replays that arithmetic on a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub cross_bound_holds: bool,
    /// `2 cross - 16 hess_sqrt + 4 laplacian_sq`.
    pub implied_quartic: f64,
    pub implied_bound_holds: bool,
    /// True unless the cross bound holds while the implied quartic bound fails.
    pub consistent: bool,
}

pub fn chain_consistency(r: &FunctionalReport, rtol: f64) -> ChainCheck {
    let l = r.laplacian_sq;
    let cross_rhs = CROSS_CONSTANT.value() * l;
    let cross_bound_holds = r.cross <= cross_rhs + rtol * (r.cross.abs() + cross_rhs.abs());
    let implied_quartic = 2.0 * r.cross - 16.0 * r.hess_sqrt + 4.0 * l;
    let quartic_rhs = QUARTIC_CONSTANT.value() * l;
    let implied_bound_holds = implied_quartic <= quartic_rhs + rtol * (implied_quartic.abs() + quartic_rhs.abs());
    ChainCheck {
        cross_bound_holds,
        implied_quartic,
        implied_bound_holds,
        consistent: !cross_bound_holds || implied_bound_holds || r.hess_sqrt < 0.0,
    }
}

/// A field as it can be replayed later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum FieldDump {
    Torus {
        dim: usize,
        n: usize,
        length: f64,
        values: Vec<f64>,
    },
    Mixture {
        components: Vec<Component>,
        exponent: f64,
        scale: f64,
    },
}

impl FieldDump {
    pub fn of(u: PositiveField<'_>) -> FieldDump {
        match u {
            PositiveField::Torus(f) => FieldDump::torus(f),
            PositiveField::Mixture(m) => FieldDump::mixture(m),
        }
    }

    pub fn torus(f: &ScalarField) -> FieldDump {
        let g = f.grid();
        FieldDump::Torus {
            dim: g.dim(),
            n: g.n(),
            length: g.length(),
            values: f.values().to_vec(),
        }
    }

    pub fn mixture(m: &MixtureField) -> FieldDump {
        FieldDump::Mixture {
            components: m.mixture.components().to_vec(),
            exponent: m.exponent,
            scale: m.scale,
        }
    }
}

/// A computed case contradicting a claimed inequality or identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub claim: String,
    pub detail: String,
    pub margin: Option<InequalityMargin>,
    pub report: Option<FunctionalReport>,
    pub field: FieldDump,
}

/// Returns a finding for every margin of `r` violated beyond `rtol`.
pub fn escalate(u: PositiveField<'_>, r: &FunctionalReport, rtol: f64) -> Result<Vec<Finding>> {
    let mut out = Vec::new();
    for m in all_margins(r)? {
        if m.violated(rtol) {
            out.push(Finding {
                claim: m.name.clone(),
                detail: format!("margin {:e} below tolerance {:e}", m.margin, -m.tolerance(rtol)),
                margin: Some(m),
                report: Some(r.clone()),
                field: FieldDump::of(u),
            });
        }
    }
    Ok(out)
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = 1.0 / GOLDEN_RATIO.value();
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    (a, b)
}

/// Root of `g` on `[a, b]` by bisection; `g(a)` and `g(b)` must differ in sign.
pub fn bisect<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `(2ε² + 2)/(2ε - 1)`.
pub fn cross_constant_objective(eps: f64) -> f64 {
    (2.0 * eps * eps + 2.0) / (2.0 * eps - 1.0)
}

/// Minimizes [`cross_constant_objective`] over `ε ∈ (1/2, 100]`: golden-section search,
/// then bisection on the sign of the derivative (whose numerator is `4(ε² - ε - 1)`).
pub fn cross_constant_minimize() -> (f64, f64) {
    let (a, b) = golden_section_min(cross_constant_objective, 0.5 + 1e-9, 100.0, 1e-6);
    let slope = |e: f64| e * e - e - 1.0;
    let (mut lo, mut hi) = (a, b);
    while slope(lo) > 0.0 {
        lo = 0.5 + 0.5 * (lo - 0.5);
    }
    while slope(hi) < 0.0 {
        hi = (2.0 * hi).min(100.0);
    }
    let arg = bisect(slope, lo, hi);
    (arg, cross_constant_objective(arg))
}

/// `ε(2 - 3ε)`.
pub fn one_d_objective(eps: f64) -> f64 {
    eps * (2.0 - 3.0 * eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSweep {
    /// `(ε, ε(2 - 3ε))` on a uniform grid of `[0, 2/3]`.
    pub rows: Vec<(f64, f64)>,
    pub argmax: f64,
    pub max: f64,
}

/// Tabulates `ε(2 - 3ε)` on `[0, 2/3]` and locates its maximum by
/// golden-section search refined with bisection on `2 - 6ε`.
pub fn epsilon_sweep_1d(samples: usize) -> EpsilonSweep {
    let samples = samples.max(2);
    let top = 2.0 / 3.0;
    let rows = (0..samples)
        .map(|i| {
            let e = top * i as f64 / (samples - 1) as f64;
            (e, one_d_objective(e))
        })
        .collect();
    let (a, b) = golden_section_min(|e| -one_d_objective(e), 0.0, top, 1e-6);
    let argmax = bisect(|e| 2.0 - 6.0 * e, a - 1e-6, b + 1e-6);
    EpsilonSweep {
        rows,
        argmax,
        max: one_d_objective(argmax),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::heatflow::{delta_transform_mixture, DeltaIndex};
    use crate::mixtures::GaussianMixture;
    use std::f64::consts::PI;

    #[test]
    fn constants_render() {
        assert!((CROSS_CONSTANT.value() - 3.2360680).abs() < 1e-7);
        assert!((QUARTIC_CONSTANT.value() - 10.4721360).abs() < 1e-7);
        assert_eq!(QUARTIC_CONSTANT.value(), 2.0 * CROSS_CONSTANT.value() + 4.0);
        assert_eq!(CROSS_CONSTANT.to_string(), "1+√5");
        assert_eq!(GOLDEN_RATIO.to_string(), "(1+√5)/2");
    }

    #[test]
    fn cross_constant_minimizer() {
        let (arg, val) = cross_constant_minimize();
        assert!((arg - GOLDEN_RATIO.value()).abs() < 1e-8);
        assert!((arg - 1.6180340).abs() < 1e-7);
        assert!((val - CROSS_CONSTANT.value()).abs() < 1e-10);
        assert!((val - 3.2360680).abs() < 1e-7);
        assert_eq!(cross_constant_objective(1.0), 4.0);
        assert!(cross_constant_objective(0.5 + 1e-8) > 1e7);
    }

    #[test]
    fn one_d_sweep() {
        let s = epsilon_sweep_1d(301);
        assert!((s.argmax - 1.0 / 3.0).abs() < 1e-10);
        assert!((s.max - 1.0 / 3.0).abs() < 1e-10);
        assert_eq!(s.rows[0].1, 0.0);
        assert!(s.rows.last().unwrap().1.abs() < 1e-15);
        for h in [0.01, 0.1, 0.3] {
            let third = 1.0 / 3.0;
            assert!((one_d_objective(third + h) - one_d_objective(third - h)).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_field_margins_are_zero() {
        let g = TorusGrid::new(1, 16, 2.0 * PI).unwrap();
        let u = g.constant(1.0).unwrap();
        let ctx = ReportContext::default();
        let m = sqrt5_cross_margin(PositiveField::Torus(&u), &ctx).unwrap();
        assert_eq!((m.lhs, m.rhs, m.margin, m.ratio), (0.0, 0.0, 0.0, None));
        let m = functional_inequality_margin(PositiveField::Torus(&u), &ctx).unwrap();
        assert_eq!(m.margin, 0.0);
        let (lo, hi) = one_d_cross_bound(PositiveField::Torus(&u), &ctx).unwrap();
        assert_eq!((lo.margin, hi.margin), (0.0, 0.0));
    }

    #[test]
    fn perturbed_constant_quartic_ratio() {
        let g = TorusGrid::new(1, 64, 2.0 * PI).unwrap();
        let u = g.sample(|x| 1.0 + 0.1 * x[0].cos()).unwrap();
        let m = functional_inequality_margin(PositiveField::Torus(&u), &ReportContext::default()).unwrap();
        assert!((m.ratio_to_base.unwrap() - 0.0075).abs() < 5e-4);
        assert!(m.margin > 0.0);
    }

    #[test]
    fn exp_cos_one_d_bounds() {
        let g = TorusGrid::new(1, 128, 2.0 * PI).unwrap();
        let rho = g.sample(|x| x[0].cos().exp()).unwrap().normalized().unwrap();
        let (lo, hi) = one_d_cross_bound(PositiveField::Torus(&rho), &ReportContext::default()).unwrap();
        assert!(lo.margin > 0.0 && hi.margin > 0.0);
    }

    #[test]
    fn single_gaussian_d2_ratio_below_one() {
        let m = GaussianMixture::single(vec![0.0, 0.0], 1.0).unwrap();
        let f = delta_transform_mixture(&m, DeltaIndex::new(0.5).unwrap());
        let c = sqrt5_cross_margin(PositiveField::Mixture(&f), &ReportContext::default()).unwrap();
        assert!(c.ratio.unwrap() < 1.0);
        assert!(c.margin > 0.0);
    }

    #[test]
    fn chain_consistency_holds_on_reports() {
        let g = TorusGrid::new(2, 64, 2.0 * PI).unwrap();
        let u = g.sample(|x| (0.5 * x[0].cos() + 0.3 * (x[0] + x[1]).sin()).exp()).unwrap();
        let r = report(PositiveField::Torus(&u), &ReportContext::default()).unwrap();
        let c = chain_consistency(&r, MARGIN_RTOL);
        assert!(c.cross_bound_holds && c.implied_bound_holds && c.consistent);
        assert!((c.implied_quartic - r.quartic).abs() < 1e-8 * r.quartic);
        assert!(escalate(PositiveField::Torus(&u), &r, MARGIN_RTOL).unwrap().is_empty());
    }

    #[test]
    fn violation_is_escalated_with_field() {
        let g = TorusGrid::new(1, 64, 2.0 * PI).unwrap();
        let u = g.sample(|x| 1.0 + 0.1 * x[0].cos()).unwrap();
        let mut r = report(PositiveField::Torus(&u), &ReportContext::default()).unwrap();
        r.quartic = 20.0 * r.laplacian_sq;
        let f = escalate(PositiveField::Torus(&u), &r, MARGIN_RTOL).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].claim, "quartic_2sqrt5_6");
        let json = serde_json::to_string(&f[0]).unwrap();
        let back: Finding = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f[0]);
    }
}
