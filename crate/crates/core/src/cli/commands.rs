use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, Tolerances};
use super::{in_trial, trial_rng, ArtifactWriter, Outcome};
use crate::concavity::{concavity_scan, ConcavityScan, FdSettings, InitialDensity};
use crate::error::{Error, Result};
use crate::extremal::{maximize, report_gap, RatioObjective, SearchConfig};
use crate::functionals::{Backend, FunctionalReport, PositiveField, ReportContext};
use crate::grid::{ResolutionPolicy, TorusGrid};
use crate::heatflow::{delta_to_q, delta_transform, delta_transform_mixture, random_torus_density, DeltaIndex};
use crate::identities::{residual_suite, IdentityResiduals};
use crate::inequalities::{all_margins, escalate, Finding, InequalityMargin};
use crate::mixtures::GaussianMixture;
use crate::numerics::{fmt17, fmt17_opt};

/// One check of one trial that missed its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckFailure {
    pub trial: usize,
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub delta: f64,
    pub q: f64,
    pub residuals: IdentityResiduals,
    /// Pointwise `8 lap_sqrt = 2 laplacian_sq - 2 cross + quartic/2`, relative.
    pub decomposition: f64,
    pub margins: Vec<InequalityMargin>,
    pub report: FunctionalReport,
    pub failures: Vec<CheckFailure>,
    #[serde(skip)]
    findings: Vec<Finding>,
}

impl TrialRecord {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn margin(&self, name: &str) -> Option<&InequalityMargin> {
        self.margins.iter().find(|m| m.name == name)
    }
}

const MARGIN_COLUMNS: [&str; 4] = ["cross_sqrt5", "quartic_2sqrt5_6", "cross_nonnegative", "cross_one_d"];

fn identities_csv(records: &[TrialRecord]) -> String {
    let mut header = vec![
        "trial".to_string(),
        "seed".into(),
        "delta".into(),
        "q".into(),
        IdentityResiduals::CSV_HEADER.into(),
        "decomposition".into(),
    ];
    for m in MARGIN_COLUMNS {
        header.push(format!("{m}_margin"));
        header.push(format!("{m}_ratio_to_base"));
    }
    header.push("passed".into());
    let mut out = header.join(",");
    out.push('\n');
    for r in records {
        let mut row = vec![
            r.trial.to_string(),
            r.seed.to_string(),
            fmt17(r.delta),
            fmt17(r.q),
            r.residuals.csv_row(),
            fmt17(r.decomposition),
        ];
        for name in MARGIN_COLUMNS {
            let m = r.margin(name);
            row.push(fmt17_opt(m.map(|m| m.margin)));
            row.push(fmt17_opt(m.and_then(|m| m.ratio_to_base)));
        }
        row.push(r.passed().to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn functionals_csv(records: &[TrialRecord]) -> String {
    let mut out = format!("trial,{}\n", FunctionalReport::CSV_HEADER);
    for r in records {
        out.push_str(&format!("{},{}\n", r.trial, r.report.csv_row()));
    }
    out
}

/// Aggregate of an identity run, written as `identities.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub seed: u64,
    pub backend: Backend,
    pub dim: usize,
    pub trials: usize,
    pub failed_trials: usize,
    pub passed: bool,
    pub tolerances: Tolerances,
    /// Largest residual of each identity over all trials.
    pub worst: BTreeMap<String, f64>,
    /// Smallest `rhs - lhs` of each inequality over all trials.
    pub min_margin: BTreeMap<String, f64>,
    /// Largest `lhs / base` of each inequality over all trials.
    pub max_ratio_to_base: BTreeMap<String, f64>,
    pub failures: Vec<CheckFailure>,
    pub findings: Vec<Finding>,
}

fn context(tol: &Tolerances, delta: DeltaIndex) -> ReportContext {
    ReportContext {
        policy: ResolutionPolicy {
            threshold: tol.resolution,
        },
        quadrature_rtol: tol.quadrature_rtol,
        ..ReportContext::new(delta)
    }
}

enum Density {
    Torus(crate::grid::ScalarField),
    Mixture(GaussianMixture),
}

/// The initial density of trial `stream`: a random `exp(trig)` density on
/// the torus, or a random (or the configured) Gaussian mixture.
fn draw_density(cfg: &RunConfig, stream: u64) -> Result<Density> {
    let mut rng = trial_rng(cfg.seed, stream);
    match cfg.backend {
        Backend::Torus => {
            let (n, bandwidth, amp) = cfg.torus.resolved(cfg.dim);
            let grid = TorusGrid::new(cfg.dim, n, cfg.torus.length).map_err(|e| Error::Config(e.to_string()))?;
            Ok(Density::Torus(random_torus_density(&grid, bandwidth, amp, &mut rng)?.1))
        }
        Backend::Mixture => {
            let m = match &cfg.mixture.components {
                Some(c) => GaussianMixture::new(c.clone()).map_err(|e| Error::Config(e.to_string()))?,
                None => {
                    let [lo, hi] = cfg.mixture.variance_range;
                    GaussianMixture::random(cfg.dim, cfg.mixture.count, cfg.mixture.mean_spread, (lo, hi), &mut rng)?
                }
            };
            Ok(Density::Mixture(m))
        }
    }
}

fn run_trial(cfg: &RunConfig, trial: usize) -> Result<TrialRecord> {
    let tol = &cfg.tolerances;
    let list = &cfg.identities.delta_list;
    let delta = DeltaIndex::new(list[trial % list.len()]).map_err(|e| Error::Config(e.to_string()))?;
    let ctx = context(tol, delta);
    let density = draw_density(cfg, trial as u64)?;
    let (u_torus, u_mixture);
    let u = match &density {
        Density::Torus(phi) => {
            u_torus = delta_transform(phi, delta)?;
            PositiveField::Torus(&u_torus)
        }
        Density::Mixture(m) => {
            u_mixture = delta_transform_mixture(m, delta);
            PositiveField::Mixture(&u_mixture)
        }
    };
    let (residuals, report) = residual_suite(u, &ctx)?;
    let decomposition = report.decomposition_residual();
    let margins = all_margins(&report)?;

    let (identity_tol, ibp_tol) = match cfg.backend {
        Backend::Torus => (tol.identity_torus, tol.ibp_torus),
        Backend::Mixture => (tol.identity_mixture, tol.ibp_mixture),
    };
    let mut failures = Vec::new();
    let mut check = |name: &str, value: f64, tolerance: f64| {
        if !(value <= tolerance) {
            failures.push(CheckFailure {
                trial,
                check: name.to_string(),
                value,
                tolerance,
            });
        }
    };
    for (name, value) in residuals.entries() {
        let t = match name {
            "cross_lap_sqrt" | "cross_laplacian" => identity_tol,
            "bochner" => tol.bochner,
            "one_d_reduction" => tol.one_d_reduction,
            _ => ibp_tol,
        };
        check(name, value, t);
    }
    check("decomposition", decomposition, tol.decomposition);
    for m in &margins {
        // margins fail from below: report the deficit against the allowance
        check(&m.name, -m.margin, m.tolerance(tol.margin));
    }
    let findings = escalate(u, &report, tol.margin)?;
    Ok(TrialRecord {
        trial,
        seed: cfg.seed,
        delta: delta.value(),
        q: delta_to_q(delta),
        residuals,
        decomposition,
        margins,
        report,
        failures,
        findings,
    })
}

/// Randomized identity, IBP, decomposition and margin checks.
///
/// Writes `identities.csv` (one row per trial), `functionals.csv` and
/// `identities.json`. A trial whose field is under-resolved aborts the run
/// with that trial named.
pub fn cmd_verify_identities(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    cfg.validate()?;
    // an explicit mixture is a single deterministic case
    let trials = match (cfg.backend, &cfg.mixture.components) {
        (Backend::Mixture, Some(_)) => 1,
        _ => cfg.identities.trials,
    };
    if trials == 0 {
        return Err(Error::Config("identities.trials must be positive".into()));
    }
    let records = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i).map_err(|e| in_trial(e, &format!("trial {i}"))))
        .collect::<Result<Vec<_>>>()?;

    let mut worst = BTreeMap::new();
    let mut min_margin = BTreeMap::new();
    let mut max_ratio = BTreeMap::new();
    let mut failures = Vec::new();
    let mut findings = Vec::new();
    for r in &records {
        for (name, v) in r.residuals.entries().into_iter().chain([("decomposition", r.decomposition)]) {
            let e = worst.entry(name.to_string()).or_insert(v);
            *e = f64::max(*e, v);
        }
        for m in &r.margins {
            let e = min_margin.entry(m.name.clone()).or_insert(m.margin);
            *e = f64::min(*e, m.margin);
            if let Some(x) = m.ratio_to_base {
                let e = max_ratio.entry(m.name.clone()).or_insert(x);
                *e = f64::max(*e, x);
            }
        }
        failures.extend(r.failures.iter().cloned());
        findings.extend(r.findings.iter().cloned());
    }
    let failed_trials = records.iter().filter(|r| !r.passed()).count();
    let summary = IdentitySummary {
        seed: cfg.seed,
        backend: cfg.backend,
        dim: cfg.dim,
        trials,
        failed_trials,
        passed: failed_trials == 0,
        tolerances: cfg.tolerances,
        worst,
        min_margin,
        max_ratio_to_base: max_ratio,
        failures,
        findings,
    };

    let mut w = ArtifactWriter::new(out)?;
    w.config(cfg)?;
    w.text("identities.csv", &identities_csv(&records))?;
    w.text("functionals.csv", &functionals_csv(&records))?;
    w.json("identities.json", &summary)?;

    let message = match summary.failures.first() {
        None => format!(
            "{} {}d: {trials} trials passed, worst residual {:.3e}",
            cfg.backend.as_str(),
            cfg.dim,
            summary.worst.values().fold(0.0_f64, |a, b| a.max(*b))
        ),
        Some(f) => format!(
            "{failed_trials} of {trials} trials failed; first is trial {}: {} = {:e} exceeds {:e}",
            f.trial, f.check, f.value, f.tolerance
        ),
    };
    Ok(Outcome {
        passed: summary.passed,
        message,
        artifacts: w.finish(),
    })
}

/// `scan.json`: the scan plus its verdict under the configured tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanArtifact {
    pub seed: u64,
    pub concavity_rtol: f64,
    /// In-range rows with `d²S_q/dt² > concavity_rtol · scale`.
    pub in_range_positive: usize,
    pub passed: bool,
    pub scan: ConcavityScan,
}

/// Concavity scan of `S_q` along the flow from one initial density
/// (stream 0 of the seed). Exploratory `q` rows are recorded but never
/// affect the verdict.
pub fn cmd_scan_concavity(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    cfg.validate()?;
    let initial = match draw_density(cfg, 0)? {
        Density::Torus(f) => InitialDensity::torus(f)?,
        Density::Mixture(m) => InitialDensity::Mixture(m),
    };
    let q_list = cfg.concavity.q_values(cfg.dim)?;
    let ctx = context(&cfg.tolerances, DeltaIndex::new(0.0)?);
    let fd = FdSettings {
        step: cfg.concavity.fd_step,
        enabled: cfg.concavity.finite_differences,
    };
    let scan = concavity_scan(&initial, &q_list, &cfg.concavity.t_list, &ctx, &fd)?;
    let rtol = cfg.tolerances.concavity;
    let in_range_positive = scan
        .rows
        .iter()
        .filter(|r| r.in_range && r.d2_dt2_sq > rtol * r.scale)
        .count();
    let passed = in_range_positive == 0 && scan.summary.fd_failures == 0;
    let artifact = ScanArtifact {
        seed: cfg.seed,
        concavity_rtol: rtol,
        in_range_positive,
        passed,
        scan,
    };

    let mut w = ArtifactWriter::new(out)?;
    w.config(cfg)?;
    w.text("scan.csv", &artifact.scan.to_csv())?;
    w.json("scan.json", &artifact)?;
    let s = &artifact.scan.summary;
    let message = format!(
        "{} rows ({} in range): {} in-range rows not concave, {} exploratory rows positive, {} finite-difference failures, max fd gap {:.3e}",
        s.rows, s.in_range_rows, in_range_positive, s.exploratory_positive, s.fd_failures, s.max_fd_gap
    );
    Ok(Outcome {
        passed,
        message,
        artifacts: w.finish(),
    })
}

/// The search configuration a run config resolves to.
pub fn search_config(cfg: &RunConfig) -> Result<SearchConfig> {
    let objective = RatioObjective::parse(&cfg.extremal.objective)?;
    let e = &cfg.extremal;
    let mut s = SearchConfig::default_for(objective, cfg.dim);
    s.seed = cfg.seed;
    s.starts = e.starts.unwrap_or(s.starts);
    s.budget = e.budget.unwrap_or(s.budget);
    s.grid.n = e.n.unwrap_or(s.grid.n);
    s.bandwidth = e.bandwidth.unwrap_or(s.bandwidth);
    if let Some(a) = e.start_amplitude {
        s.start_amplitude = a;
        s.initial_step = 0.25 * a;
    }
    s.initial_step = e.initial_step.unwrap_or(s.initial_step);
    s.subspace_dim = e.subspace_dim.unwrap_or(s.subspace_dim);
    Ok(s)
}

/// Multi-start search for densities with a large inequality ratio.
/// Writes `extremal.json` (the full, replayable result) and `gap.json`.
/// Fails only when some candidate beats the constant.
pub fn cmd_extremal(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    cfg.validate()?;
    if cfg.backend != Backend::Torus {
        return Err(Error::Config("the extremal search parametrizes torus densities; set backend = \"torus\"".into()));
    }
    let search = search_config(cfg)?;
    let result = maximize(&search)?;
    let gap = report_gap(&result, result.constant);
    let passed = result.findings.is_empty();

    let mut w = ArtifactWriter::new(out)?;
    w.config(cfg)?;
    w.json("extremal.json", &result)?;
    w.json("gap.json", &gap)?;
    let message = format!(
        "{} d={}: best ratio {} vs constant {} (gap {:.3e}) after {} evaluations in {:.1}s",
        search.objective.name(),
        cfg.dim,
        fmt17(result.best_ratio),
        fmt17(result.constant),
        gap.gap,
        gap.evaluations,
        result.wall_time_s
    );
    Ok(Outcome {
        passed,
        message,
        artifacts: w.finish(),
    })
}
