//! Search for densities with large inequality ratios `quartic/laplacian_sq`
//! and `cross/laplacian_sq` on the torus.
//!
//! Candidates are `u = exp(P_θ)` with `P_θ` a real trigonometric polynomial
//! over the modes `|m|_1 ≤ bandwidth`. Each start draws a random `θ_0`, a
//! random subspace of directions through it, and runs Nelder–Mead there.
//! A candidate counts only if it passes the resolution policy and the
//! identity suite; otherwise it is rejected with a penalty.

use std::cell::RefCell;
use std::time::Instant;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{FunctionalReport, PositiveField, ReportContext};
use crate::grid::{ResolutionPolicy, ScalarField, TorusGrid};
use crate::heatflow::TrigPolynomial;
use crate::identities::residual_suite;
use crate::inequalities::{FieldDump, Finding, SurdConstant, CROSS_CONSTANT, ONE_D_CROSS_CONSTANT, QUARTIC_CONSTANT};

/// Denominators below this are treated as zero.
pub const EPS_ABS: f64 = 1e-300;
/// Relative excess over a constant that is escalated as a finding.
pub const EXCESS_RTOL: f64 = 1e-6;
/// Candidates must pass the identity suite to this level.
pub const IDENTITY_TOL: f64 = 1e-7;
const PENALTY: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioObjective {
    QuarticOverLap,
    CrossOverLap,
}

impl RatioObjective {
    pub fn name(self) -> &'static str {
        match self {
            RatioObjective::QuarticOverLap => "quartic_over_lap",
            RatioObjective::CrossOverLap => "cross_over_lap",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quartic_over_lap" => Ok(RatioObjective::QuarticOverLap),
            "cross_over_lap" => Ok(RatioObjective::CrossOverLap),
            _ => Err(Error::Config(format!(
                "unknown objective {s:?} (expected quartic_over_lap or cross_over_lap)"
            ))),
        }
    }

    /// The bound claimed for this ratio in dimension `dim`.
    pub fn constant(self, dim: usize) -> SurdConstant {
        match (self, dim) {
            (RatioObjective::QuarticOverLap, _) => QUARTIC_CONSTANT,
            (RatioObjective::CrossOverLap, 1) => ONE_D_CROSS_CONSTANT,
            (RatioObjective::CrossOverLap, _) => CROSS_CONSTANT,
        }
    }

    fn of(self, r: &FunctionalReport) -> f64 {
        let num = match self {
            RatioObjective::QuarticOverLap => r.quartic,
            RatioObjective::CrossOverLap => r.cross,
        };
        num / r.laplacian_sq
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

impl GridSpec {
    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.dim, self.n, self.length)
    }
}

/// `u = exp(P_θ)` on a grid, optionally scaled to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityParam {
    pub grid: GridSpec,
    pub bandwidth: i64,
    pub theta: Vec<f64>,
    pub normalize: bool,
}

impl DensityParam {
    pub fn zeros(grid: GridSpec, bandwidth: i64) -> Self {
        let n_params = TrigPolynomial::zeros(grid.dim, bandwidth).n_params();
        DensityParam {
            grid,
            bandwidth,
            theta: vec![0.0; n_params],
            normalize: true,
        }
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Self {
        DensityParam { theta, ..self.clone() }
    }

    pub fn polynomial(&self) -> Result<TrigPolynomial> {
        if 3 * self.bandwidth as usize > self.grid.n {
            return Err(Error::param(format!(
                "bandwidth {} exceeds n/3 for n = {}",
                self.bandwidth, self.grid.n
            )));
        }
        if let Some(i) = self.theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        TrigPolynomial::zeros(self.grid.dim, self.bandwidth).with_params(&self.theta)
    }

    pub fn field(&self) -> Result<ScalarField> {
        let grid = self.grid.grid()?;
        let u = self.polynomial()?.sample(&grid)?.map(f64::exp)?;
        if self.normalize {
            u.normalized()
        } else {
            Ok(u)
        }
    }
}

/// One accepted candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub ratio: f64,
    pub report: FunctionalReport,
    /// Largest residual of the identity suite.
    pub identity_max: f64,
}

/// Full evaluation of a candidate. Errors on resolution failure, on a
/// vanishing denominator, and on an identity residual above [`IDENTITY_TOL`].
pub fn evaluate(param: &DensityParam, objective: RatioObjective, policy: &ResolutionPolicy) -> Result<Evaluation> {
    let u = param.field()?;
    let ctx = ReportContext {
        policy: *policy,
        ..ReportContext::default()
    };
    let (res, report) = residual_suite(PositiveField::Torus(&u), &ctx)?;
    if !(report.laplacian_sq > EPS_ABS) {
        return Err(Error::degenerate(format!(
            "laplacian_sq = {:e}: ratio undefined (constant density?)",
            report.laplacian_sq
        )));
    }
    let identity_max = res.max();
    if !(identity_max <= IDENTITY_TOL) {
        return Err(Error::degenerate(format!(
            "identity residual {identity_max:e} above {IDENTITY_TOL:e}"
        )));
    }
    Ok(Evaluation {
        ratio: objective.of(&report),
        report,
        identity_max,
    })
}

/// `quartic/laplacian_sq` or `cross/laplacian_sq` of `exp(P_θ)`, with
/// `template` supplying grid and bandwidth.
pub fn ratio_objective(theta: &[f64], objective: RatioObjective, template: &DensityParam) -> Result<f64> {
    let p = template.with_theta(theta.to_vec());
    Ok(evaluate(&p, objective, &ResolutionPolicy::default())?.ratio)
}

/// Settings of one search; together with the seed they determine the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub objective: RatioObjective,
    pub grid: GridSpec,
    pub bandwidth: i64,
    pub starts: usize,
    /// Objective evaluations per start.
    pub budget: usize,
    pub seed: u64,
    /// `Σ|θ|` of the random starting coefficients.
    pub start_amplitude: f64,
    /// Edge length of the initial simplex, in the same units.
    pub initial_step: f64,
    /// Nelder–Mead runs in a random subspace of at most this many directions.
    pub subspace_dim: usize,
    pub resolution_threshold: f64,
}

impl SearchConfig {
    pub fn default_for(objective: RatioObjective, dim: usize) -> Self {
        // d = 3 keeps the bandwidth low: the (2,0,0) harmonic of exp(P) must
        // stay under the resolution threshold on a grid small enough to search
        let (n, bandwidth, amp, budget) = match dim {
            1 => (256, 8, 1.0, 120),
            2 => (128, 8, 0.6, 120),
            _ => (32, 2, 0.6, 60),
        };
        SearchConfig {
            objective,
            grid: GridSpec {
                dim,
                n,
                length: 2.0 * std::f64::consts::PI,
            },
            bandwidth,
            starts: 20,
            budget,
            seed: 0,
            start_amplitude: amp,
            initial_step: 0.25 * amp,
            subspace_dim: 8,
            resolution_threshold: ResolutionPolicy::default().threshold,
        }
    }

    fn policy(&self) -> ResolutionPolicy {
        ResolutionPolicy {
            threshold: self.resolution_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// 1-based evaluation count (global across starts in the merged trace).
    pub evaluation: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Rejections {
    pub resolution: usize,
    pub identity_or_degenerate: usize,
    pub other: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartResult {
    pub start: usize,
    pub best_ratio: Option<f64>,
    pub best_theta: Option<Vec<f64>>,
    pub evaluations: usize,
    pub rejections: Rejections,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalResult {
    pub config: SearchConfig,
    pub objective: RatioObjective,
    pub constant: f64,
    pub best_ratio: f64,
    pub best_theta: Vec<f64>,
    pub best_start: usize,
    /// Incumbent over all evaluations, starts taken in order.
    pub trace: Vec<TracePoint>,
    pub starts: Vec<StartResult>,
    pub findings: Vec<Finding>,
    /// Not persisted, so artifacts replay bit-for-bit.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl ExtremalResult {
    /// Equality of everything except the wall time.
    pub fn same_outcome(&self, other: &ExtremalResult) -> bool {
        let mut a = self.clone();
        a.wall_time_s = other.wall_time_s;
        &a == other
    }

    pub fn total_evaluations(&self) -> usize {
        self.starts.iter().map(|s| s.evaluations).sum()
    }

    /// Re-evaluates the recorded best `θ`.
    pub fn replay_best(&self) -> Result<f64> {
        let p = DensityParam::zeros(self.config.grid, self.config.bandwidth).with_theta(self.best_theta.clone());
        Ok(evaluate(&p, self.objective, &self.config.policy())?.ratio)
    }
}

struct StartState {
    evaluations: usize,
    best: Option<(f64, Vec<f64>)>,
    trace: Vec<TracePoint>,
    rejections: Rejections,
    findings: Vec<Finding>,
    exhausted: bool,
}

struct SubspaceProblem<'a> {
    config: &'a SearchConfig,
    template: DensityParam,
    origin: Vec<f64>,
    basis: Vec<Vec<f64>>,
    constant: f64,
    state: RefCell<StartState>,
}

impl SubspaceProblem<'_> {
    fn theta(&self, c: &[f64]) -> Vec<f64> {
        let mut theta = self.origin.clone();
        for (ci, b) in c.iter().zip(&self.basis) {
            for (t, bj) in theta.iter_mut().zip(b) {
                *t += ci * bj;
            }
        }
        theta
    }
}

#[derive(Debug)]
struct BudgetExhausted;

impl std::fmt::Display for BudgetExhausted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("evaluation budget exhausted")
    }
}

impl std::error::Error for BudgetExhausted {}

impl CostFunction for SubspaceProblem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, c: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let mut st = self.state.borrow_mut();
        if st.evaluations >= self.config.budget {
            st.exhausted = true;
            return Err(BudgetExhausted.into());
        }
        st.evaluations += 1;
        let theta = self.theta(c);
        let param = self.template.with_theta(theta.clone());
        match evaluate(&param, self.config.objective, &self.config.policy()) {
            Ok(ev) => {
                if ev.ratio > self.constant * (1.0 + EXCESS_RTOL) {
                    let field = param.field().map_err(|e| argmin::core::Error::msg(e.to_string()))?;
                    st.findings.push(Finding {
                        claim: self.config.objective.name().to_string(),
                        detail: format!("ratio {:e} exceeds constant {:e}", ev.ratio, self.constant),
                        margin: None,
                        report: Some(ev.report.clone()),
                        field: FieldDump::torus(&field),
                    });
                }
                if st.best.as_ref().is_none_or(|(b, _)| ev.ratio > *b) {
                    st.best = Some((ev.ratio, theta));
                    let n = st.evaluations;
                    st.trace.push(TracePoint {
                        evaluation: n,
                        ratio: ev.ratio,
                    });
                }
                Ok(-ev.ratio)
            }
            Err(Error::Resolution { .. }) => {
                st.rejections.resolution += 1;
                Ok(PENALTY)
            }
            Err(Error::Degenerate(_)) => {
                st.rejections.identity_or_degenerate += 1;
                Ok(PENALTY)
            }
            Err(_) => {
                st.rejections.other += 1;
                Ok(PENALTY)
            }
        }
    }
}

fn unit_l1(v: &mut [f64]) {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 > 0.0 {
        v.iter_mut().for_each(|x| *x /= l1);
    }
}

fn run_start(config: &SearchConfig, start: usize) -> Result<(StartResult, Vec<Finding>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(start as u64);
    let template = DensityParam::zeros(config.grid, config.bandwidth);
    let origin = TrigPolynomial::random(config.grid.dim, config.bandwidth, config.start_amplitude, &mut rng).params();
    let n_params = origin.len();
    let k = config.subspace_dim.min(n_params).max(1);
    let basis: Vec<Vec<f64>> = if k == n_params {
        (0..n_params)
            .map(|i| {
                let mut e = vec![0.0; n_params];
                e[i] = 1.0;
                e
            })
            .collect()
    } else {
        (0..k)
            .map(|_| {
                let mut v: Vec<f64> = (0..n_params).map(|_| rng.gen_range(-1.0..1.0)).collect();
                unit_l1(&mut v);
                v
            })
            .collect()
    };
    let mut simplex = vec![vec![0.0; k]];
    for i in 0..k {
        let mut v = vec![0.0; k];
        v[i] = config.initial_step;
        simplex.push(v);
    }
    let problem = SubspaceProblem {
        config,
        template,
        origin,
        basis,
        constant: config.objective.constant(config.grid.dim).value(),
        state: RefCell::new(StartState {
            evaluations: 0,
            best: None,
            trace: Vec::new(),
            rejections: Rejections::default(),
            findings: Vec::new(),
            exhausted: false,
        }),
    };
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-12)
        .map_err(|e| Error::param(e.to_string()))?;
    let outcome = Executor::new(&problem, solver)
        .configure(|s| s.max_iters(config.budget as u64))
        .run()
        .map(|_| ())
        .map_err(|e| e.to_string());
    let st = problem.state.into_inner();
    if let Err(e) = outcome {
        if !st.exhausted {
            return Err(Error::degenerate(format!("start {start}: optimizer failed: {e}")));
        }
    }
    let (best_ratio, best_theta) = match st.best {
        Some((r, t)) => (Some(r), Some(t)),
        None => (None, None),
    };
    Ok((
        StartResult {
            start,
            best_ratio,
            best_theta,
            evaluations: st.evaluations,
            rejections: st.rejections,
            trace: st.trace,
        },
        st.findings,
    ))
}

/// Re-runs one start of a search. Starts draw from independent streams, so
/// this reproduces `starts[start]` of the full run without the others.
pub fn replay_start(config: &SearchConfig, start: usize) -> Result<StartResult> {
    if start >= config.starts {
        return Err(Error::param(format!("start {start} out of range for {} starts", config.starts)));
    }
    Ok(run_start(config, start)?.0)
}

impl CostFunction for &SubspaceProblem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, c: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        (**self).cost(c)
    }
}

/// Multi-start search; starts run in parallel and merge in start order.
pub fn maximize(config: &SearchConfig) -> Result<ExtremalResult> {
    if config.starts == 0 || config.budget == 0 {
        return Err(Error::param("extremal search needs at least one start and a positive budget"));
    }
    let clock = Instant::now();
    let outcomes = (0..config.starts)
        .into_par_iter()
        .map(|s| run_start(config, s))
        .collect::<Result<Vec<_>>>()?;
    let mut starts = Vec::with_capacity(outcomes.len());
    let mut findings = Vec::new();
    for (s, f) in outcomes {
        starts.push(s);
        findings.extend(f);
    }
    let mut best: Option<(f64, usize)> = None;
    let mut trace = Vec::new();
    let mut offset = 0;
    for s in &starts {
        for p in &s.trace {
            if best.is_none_or(|(b, _)| p.ratio > b) {
                best = Some((p.ratio, s.start));
                trace.push(TracePoint {
                    evaluation: offset + p.evaluation,
                    ratio: p.ratio,
                });
            }
        }
        offset += s.evaluations;
    }
    let (best_ratio, best_start) =
        best.ok_or_else(|| Error::degenerate("every start was degenerate or under-resolved"))?;
    let best_theta = starts[best_start].best_theta.clone().expect("best start has a θ");
    Ok(ExtremalResult {
        config: config.clone(),
        objective: config.objective,
        constant: config.objective.constant(config.grid.dim).value(),
        best_ratio,
        best_theta,
        best_start,
        trace,
        starts,
        findings,
        wall_time_s: clock.elapsed().as_secs_f64(),
    })
}

/// Empirical distance of the best ratio from a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessGap {
    pub objective: RatioObjective,
    pub dim: usize,
    pub constant: f64,
    pub best_ratio: f64,
    /// `constant - best_ratio`.
    pub gap: f64,
    pub starts: usize,
    pub evaluations: usize,
    pub seed: u64,
}

pub fn report_gap(result: &ExtremalResult, constant: f64) -> SharpnessGap {
    SharpnessGap {
        objective: result.objective,
        dim: result.config.grid.dim,
        constant,
        best_ratio: result.best_ratio,
        gap: constant - result.best_ratio,
        starts: result.config.starts,
        evaluations: result.total_evaluations(),
        seed: result.config.seed,
    }
}
