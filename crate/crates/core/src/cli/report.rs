use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::commands::ScanArtifact;
use super::{ArtifactWriter, Outcome};
use crate::error::{Error, Result};
use crate::extremal::SharpnessGap;
use crate::numerics::fmt17;

/// How a metric combines across runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Max,
    Min,
    Sum,
}

impl Aggregate {
    fn merge(self, a: f64, b: f64) -> f64 {
        match self {
            Aggregate::Max => a.max(b),
            Aggregate::Min => a.min(b),
            Aggregate::Sum => a + b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub source: String,
    pub name: String,
    pub value: f64,
    pub aggregate: Aggregate,
}

type MetricMap = BTreeMap<(String, String), (f64, Aggregate)>;

fn put(map: &mut MetricMap, source: &str, name: &str, value: f64, agg: Aggregate) {
    map.entry((source.to_string(), name.to_string()))
        .and_modify(|(v, _)| *v = agg.merge(*v, value))
        .or_insert((value, agg));
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run: String,
    pub metrics: Vec<Metric>,
}

fn to_metrics(map: MetricMap) -> Vec<Metric> {
    map.into_iter()
        .map(|((source, name), (value, aggregate))| Metric {
            source,
            name,
            value,
            aggregate,
        })
        .collect()
}

const RESIDUAL_COLUMNS: [&str; 10] = [
    "cross_lap_sqrt",
    "cross_laplacian",
    "bochner",
    "ibp_1",
    "ibp_2",
    "ibp_3",
    "ibp_4a",
    "ibp_4b",
    "one_d_reduction",
    "decomposition",
];

fn read_identities(path: &Path, map: &mut MetricMap) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let mut trials = 0.0;
    let mut failed = 0.0;
    for rec in rdr.records() {
        let rec = rec?;
        trials += 1.0;
        for (h, field) in headers.iter().zip(rec.iter()) {
            if h == "passed" {
                if field != "true" {
                    failed += 1.0;
                }
                continue;
            }
            if field.is_empty() {
                continue;
            }
            let agg = if RESIDUAL_COLUMNS.contains(&h) || h.ends_with("_ratio_to_base") {
                Aggregate::Max
            } else if h.ends_with("_margin") {
                Aggregate::Min
            } else {
                continue;
            };
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Serde(format!("{}: bad number {field:?} in column {h}", path.display())))?;
            let name = if agg == Aggregate::Min {
                format!("min_{h}")
            } else if h.ends_with("_ratio_to_base") {
                format!("max_{h}")
            } else {
                format!("worst_{h}")
            };
            put(map, "identities", &name, v, agg);
        }
    }
    put(map, "identities", "trials", trials, Aggregate::Sum);
    put(map, "identities", "failed_trials", failed, Aggregate::Sum);
    Ok(())
}

fn read_scan(path: &Path, map: &mut MetricMap) -> Result<()> {
    let a: ScanArtifact = serde_json::from_str(&fs::read_to_string(path)?)?;
    let s = &a.scan.summary;
    let negative = a.scan.rows.iter().filter(|r| r.d2_dt2_sq < 0.0).count();
    let worst = a
        .scan
        .rows
        .iter()
        .filter(|r| r.in_range && r.scale > 0.0)
        .map(|r| r.d2_dt2_sq / r.scale)
        .fold(f64::NEG_INFINITY, f64::max);
    put(map, "scan", "rows", s.rows as f64, Aggregate::Sum);
    put(map, "scan", "in_range_rows", s.in_range_rows as f64, Aggregate::Sum);
    put(map, "scan", "negative_rows", negative as f64, Aggregate::Sum);
    put(map, "scan", "in_range_positive", a.in_range_positive as f64, Aggregate::Sum);
    put(map, "scan", "exploratory_positive", s.exploratory_positive as f64, Aggregate::Sum);
    put(map, "scan", "fd_failures", s.fd_failures as f64, Aggregate::Sum);
    put(map, "scan", "max_fd_gap", s.max_fd_gap, Aggregate::Max);
    if worst.is_finite() {
        put(map, "scan", "max_in_range_d2_dt2_sq_over_scale", worst, Aggregate::Max);
    }
    Ok(())
}

fn read_gap(path: &Path, map: &mut MetricMap) -> Result<()> {
    let g: SharpnessGap = serde_json::from_str(&fs::read_to_string(path)?)?;
    let source = format!("extremal_{}_d{}", g.objective.name(), g.dim);
    put(map, &source, "best_ratio", g.best_ratio, Aggregate::Max);
    put(map, &source, "constant", g.constant, Aggregate::Max);
    put(map, &source, "min_gap", g.gap, Aggregate::Min);
    put(map, &source, "evaluations", g.evaluations as f64, Aggregate::Sum);
    Ok(())
}

/// Summaries of each run directory (sorted, duplicates dropped) followed by
/// a merged `all` entry. Order-independent in its arguments.
pub fn summarize(dirs: &[PathBuf]) -> Result<Vec<RunSummary>> {
    let mut dirs: Vec<&PathBuf> = dirs.iter().collect();
    dirs.sort();
    dirs.dedup();
    let mut runs = Vec::new();
    let mut merged = MetricMap::new();
    for dir in dirs {
        if !dir.is_dir() {
            return Err(Error::Config(format!("{} is not a directory", dir.display())));
        }
        let mut map = MetricMap::new();
        let ids = dir.join("identities.csv");
        if ids.exists() {
            read_identities(&ids, &mut map)?;
        }
        let scan = dir.join("scan.json");
        if scan.exists() {
            read_scan(&scan, &mut map)?;
        }
        let gap = dir.join("gap.json");
        if gap.exists() {
            read_gap(&gap, &mut map)?;
        }
        if map.is_empty() {
            continue;
        }
        for ((src, name), (v, agg)) in &map {
            put(&mut merged, src, name, *v, *agg);
        }
        runs.push(RunSummary {
            run: dir.display().to_string(),
            metrics: to_metrics(map),
        });
    }
    if runs.is_empty() {
        return Err(Error::Config("no artifacts found in the given run directories".into()));
    }
    runs.push(RunSummary {
        run: "all".into(),
        metrics: to_metrics(merged),
    });
    Ok(runs)
}

fn tidy_csv(runs: &[RunSummary]) -> String {
    let mut out = String::from("run,source,metric,value\n");
    for r in runs {
        for m in &r.metrics {
            out.push_str(&format!("{},{},{},{}\n", r.run, m.source, m.name, fmt17(m.value)));
        }
    }
    out
}

fn text(runs: &[RunSummary]) -> String {
    let mut out = String::new();
    for r in runs {
        out.push_str(&format!("run {}\n", r.run));
        let mut source = "";
        for m in &r.metrics {
            if m.source != source {
                source = &m.source;
                out.push_str(&format!("  {source}\n"));
            }
            let v = if m.aggregate == Aggregate::Sum {
                format!("{}", m.value)
            } else {
                format!("{:.6e}", m.value)
            };
            out.push_str(&format!("    {:<40} {v}\n", m.name));
        }
    }
    out
}

/// Aggregates finished runs: worst residuals, minimum margin per
/// inequality, sign counts of the scans and extremal gaps. Prints the
/// summary and, with `out`, writes `summary.txt` and a tidy `summary.csv`.
pub fn cmd_report(dirs: &[PathBuf], out: Option<&Path>) -> Result<Outcome> {
    if dirs.is_empty() {
        return Err(Error::Config("report needs at least one run directory".into()));
    }
    let runs = summarize(dirs)?;
    let body = text(&runs);
    let artifacts = match out {
        Some(dir) => {
            let mut w = ArtifactWriter::new(dir)?;
            w.text("summary.txt", &body)?;
            w.text("summary.csv", &tidy_csv(&runs))?;
            w.finish()
        }
        None => Vec::new(),
    };
    Ok(Outcome {
        passed: true,
        message: body,
        artifacts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dir_has_no_artifacts() {
        let d = tempfile::tempdir().unwrap();
        let err = cmd_report(&[d.path().to_path_buf()], None).unwrap_err();
        assert!(err.to_string().contains("no artifacts"));
    }

    #[test]
    fn aggregation_takes_min_margin_and_max_residual() {
        let d = tempfile::tempdir().unwrap();
        fs::write(
            d.path().join("identities.csv"),
            "trial,cross_lap_sqrt,cross_sqrt5_margin,cross_sqrt5_ratio_to_base,passed\n0,1e-14,0.5,1.2,true\n1,3e-14,0.25,0.9,true\n2,2e-14,0.75,1.1,false\n",
        )
        .unwrap();
        let runs = summarize(&[d.path().to_path_buf()]).unwrap();
        let get = |name: &str| runs[0].metrics.iter().find(|m| m.name == name).unwrap().value;
        assert_eq!(get("min_cross_sqrt5_margin"), 0.25);
        assert_eq!(get("max_cross_sqrt5_ratio_to_base"), 1.2);
        assert_eq!(get("worst_cross_lap_sqrt"), 3e-14);
        assert_eq!(get("trials"), 3.0);
        assert_eq!(get("failed_trials"), 1.0);
    }
}
