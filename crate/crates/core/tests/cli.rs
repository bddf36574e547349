use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use heatlab::cli::ScanArtifact;

fn heatlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatlab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, format!("schema_version = 1\n{body}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn default_identity_run_passes_in_two_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let out = heatlab(&["--out", "run", "verify-identities"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("run/identities.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/identities.json")).unwrap()).unwrap();
    assert_eq!(summary["trials"], 100);
    assert_eq!(summary["passed"], true);
}

#[test]
fn under_resolved_grid_exits_with_resolution_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "backend = \"torus\"\ndim = 1\n[torus]\nn = 16\n");
    let out = heatlab(&["--config", &cfg, "--out", "run", "verify-identities"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("under-resolved") && err.contains("trial 0"), "{err}");
}

#[test]
fn one_dimensional_trials_fill_the_reduction_column() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "seed = 4\nbackend = \"mixture\"\ndim = 1\n[identities]\ntrials = 5\ndelta_list = [0.0, 1.0]\n",
    );
    let out = heatlab(&["--config", &cfg, "--out", "run", "verify-identities"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let mut rdr = csv::Reader::from_path(tmp.path().join("run/identities.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "one_d_reduction").unwrap();
    let seed = rdr.headers().unwrap().iter().position(|h| h == "seed").unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let v: f64 = rec[col].parse().unwrap();
        assert!(v <= 1e-8);
        assert_eq!(&rec[seed], "4");
    }
}

#[test]
fn gaussian_scan_with_exploratory_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "backend = \"mixture\"\ndim = 1\n[mixture]\ncomponents = [{ weight = 1.0, mean = [0.0], variance = 1.0 }]\n[concavity]\nq_list = [1.0, 1.5, 2.0, 2.5, 3.0, 5.0]\n",
    );
    let out = heatlab(&["--config", &cfg, "--out", "run", "scan-concavity"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let a: ScanArtifact = serde_json::from_str(&fs::read_to_string(tmp.path().join("run/scan.json")).unwrap()).unwrap();
    assert!(a.passed);
    assert_eq!(a.scan.rows.len(), 60);
    let exploratory: Vec<_> = a.scan.rows.iter().filter(|r| r.q == 5.0).collect();
    assert_eq!(exploratory.len(), 10);
    assert!(exploratory.iter().all(|r| !r.in_range));
    assert!(fs::read_to_string(tmp.path().join("run/scan.csv")).unwrap().starts_with("q,delta,t,"));
}

#[test]
fn torus_scan_in_three_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "seed = 1\nbackend = \"torus\"\ndim = 3\n[concavity]\nq_list = [1.0, 2.0, 2.894]\nt_list = [0.05, 0.5, 1.0]\n",
    );
    let out = heatlab(&["--config", &cfg, "--out", "run", "scan-concavity"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn extremal_runs_replay_bit_for_bit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "seed = 9\nbackend = \"torus\"\ndim = 1\n[extremal]\nobjective = \"cross_over_lap\"\nstarts = 3\nbudget = 30\n",
    );
    for dir in ["a", "b"] {
        let out = heatlab(&["--config", &cfg, "--out", dir, "extremal"], tmp.path());
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for f in ["extremal.json", "gap.json", "run_config.toml"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f} differs"
        );
    }
    // the persisted config alone reproduces the run
    let out = heatlab(&["--config", "a/run_config.toml", "--out", "c", "extremal"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        fs::read(tmp.path().join("a/extremal.json")).unwrap(),
        fs::read(tmp.path().join("c/extremal.json")).unwrap()
    );
    let gap: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/gap.json")).unwrap()).unwrap();
    assert!(gap["gap"].as_f64().unwrap() > 0.0);
    assert_eq!(gap["seed"], 9);
}

#[test]
fn seed_override_changes_identity_trials() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "backend = \"torus\"\ndim = 1\n[identities]\ntrials = 3\n");
    heatlab(&["--config", &cfg, "--out", "a", "--seed", "1", "verify-identities"], tmp.path());
    heatlab(&["--config", &cfg, "--out", "b", "--seed", "2", "--threads", "1", "verify-identities"], tmp.path());
    let a = fs::read_to_string(tmp.path().join("a/functionals.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("b/functionals.csv")).unwrap();
    assert_ne!(a, b);
    assert!(fs::read_to_string(tmp.path().join("b/run_config.toml")).unwrap().contains("seed = 2"));
}

#[test]
fn report_on_empty_dir_names_missing_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = heatlab(&["report", "empty"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no artifacts"));
}

#[test]
fn report_merges_runs_independently_of_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "backend = \"torus\"\ndim = 1\n[identities]\ntrials = 6\n");
    heatlab(&["--config", &cfg, "--out", "r1", "--seed", "1", "verify-identities"], tmp.path());
    heatlab(&["--config", &cfg, "--out", "r2", "--seed", "2", "verify-identities"], tmp.path());
    let a = heatlab(&["report", "r1", "r2", "--out", "s1"], tmp.path());
    let b = heatlab(&["report", "r2", "r1", "--out", "s2"], tmp.path());
    assert_eq!(a.status.code(), Some(0));
    // only the artifact paths may differ
    let body = |o: &Output| -> String {
        String::from_utf8_lossy(&o.stdout).lines().filter(|l| !l.starts_with("wrote ")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(body(&a), body(&b));
    let csv = fs::read_to_string(tmp.path().join("s1/summary.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(tmp.path().join("s2/summary.csv")).unwrap());

    // the merged minimum margin is the minimum over both runs' trials
    let min_of = |run: &str| -> f64 {
        let mut rdr = csv::Reader::from_path(tmp.path().join(run).join("identities.csv")).unwrap();
        let col = rdr.headers().unwrap().iter().position(|h| h == "cross_sqrt5_margin").unwrap();
        rdr.records().map(|r| r.unwrap()[col].parse::<f64>().unwrap()).fold(f64::INFINITY, f64::min)
    };
    let expected = min_of("r1").min(min_of("r2"));
    let line = csv
        .lines()
        .find(|l| l.starts_with("all,identities,min_cross_sqrt5_margin,"))
        .unwrap();
    let got: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(got, expected);
}

#[test]
fn config_errors_exit_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "backend = \"torus\"\ndim = 2\n[concavity]\nq_list = [2.0]\ndelta_list = [0.3]\n",
    );
    let out = heatlab(&["--config", &cfg, "scan-concavity"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("q = 2/(1+delta)"));
    let out = heatlab(&["--config", "missing.toml", "extremal"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = heatlab(&["no-such-command"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}
