//! Batch runner behind the `heatlab` binary.
//!
//! Every command reads a [`RunConfig`], computes in parallel, merges results
//! in a fixed order and then writes its artifacts from a single thread, so a
//! config and seed determine every output byte.

pub mod config;
mod commands;
mod report;

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use commands::{
    cmd_extremal, cmd_scan_concavity, cmd_verify_identities, search_config, CheckFailure, IdentitySummary, ScanArtifact,
    TrialRecord,
};
pub use config::RunConfig;
pub use report::{cmd_report, summarize, Aggregate, Metric, RunSummary};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
/// A claim failed beyond its tolerance.
pub const EXIT_CLAIM: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// Under-resolved, degenerate or non-finite input.
pub const EXIT_NUMERICAL: i32 = 3;

/// What a command found, once its artifacts are on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub message: String,
    pub artifacts: Vec<PathBuf>,
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.passed => EXIT_OK,
        Ok(_) => EXIT_CLAIM,
        Err(e) if e.is_numerical() => EXIT_NUMERICAL,
        Err(_) => EXIT_USAGE,
    }
}

/// Independent random stream for trial `stream` of a seeded run.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Output directory: the explicit one, then the config's, then `heatlab-out`.
pub fn output_dir(explicit: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("heatlab-out"))
}

struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }

    /// The resolved config, so the run can be repeated from its own directory.
    fn config(&mut self, cfg: &RunConfig) -> Result<()> {
        self.text("run_config.toml", &cfg.to_toml())
    }

    fn finish(self) -> Vec<PathBuf> {
        self.written
    }
}

/// Prefixes a trial label to errors that carry a message.
fn in_trial(e: Error, label: &str) -> Error {
    match e {
        Error::Resolution { what, ratio, threshold } => Error::Resolution {
            what: format!("{label}: {what}"),
            ratio,
            threshold,
        },
        Error::Degenerate(m) => Error::Degenerate(format!("{label}: {m}")),
        Error::InvalidParameter(m) => Error::InvalidParameter(format!("{label}: {m}")),
        Error::NonFinite { index } => Error::Degenerate(format!("{label}: non-finite value at sample {index}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let ok = Ok(Outcome {
            passed: true,
            message: String::new(),
            artifacts: vec![],
        });
        assert_eq!(exit_code(&ok), 0);
        let bad = Ok(Outcome {
            passed: false,
            message: String::new(),
            artifacts: vec![],
        });
        assert_eq!(exit_code(&bad), 1);
        assert_eq!(exit_code(&Err(Error::Config("x".into()))), 2);
        let res = Err(Error::Resolution {
            what: "u".into(),
            ratio: 1.0,
            threshold: 1e-10,
        });
        assert_eq!(exit_code(&res), 3);
    }

    #[test]
    fn trial_streams_differ_but_repeat() {
        use rand::Rng;
        let a: u64 = trial_rng(5, 0).gen();
        let b: u64 = trial_rng(5, 1).gen();
        assert_ne!(a, b);
        assert_eq!(a, trial_rng(5, 0).gen::<u64>());
    }
}
