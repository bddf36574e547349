//! Run configuration, read from TOML.
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//! backend = "torus"        # or "mixture"
//! dim = 2
//! output_dir = "runs/d2"   # optional, --out wins
//!
//! [torus]                  # random exp(trig) densities
//! n = 256
//! length = 6.283185307179586
//! bandwidth = 3            # default by dimension
//! max_amplitude = 1.2
//!
//! [mixture]                # random mixtures, unless `components` is given
//! count = 3
//! mean_spread = 1.5
//! variance_range = [0.4, 1.6]
//! # components = [{ weight = 1.0, mean = [0.0, 0.0], variance = 1.0 }]
//!
//! [identities]
//! trials = 100
//! delta_list = [0.0]
//!
//! [concavity]
//! q_list = [1.0, 1.5, 2.0, 2.894]   # or delta_list, or both if consistent
//! t_list = [0.05, 0.1, 0.2]
//! fd_step = 0.001                   # optional
//!
//! [extremal]
//! objective = "quartic_over_lap"
//! starts = 20
//! budget = 120
//!
//! [tolerances]
//! identity_torus = 1e-8
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Backend;
use crate::heatflow::{default_torus_family, delta_to_q, q_to_delta, DeltaIndex};
use crate::mixtures::Component;

pub const SCHEMA_VERSION: u32 = 1;

fn two_pi() -> f64 {
    2.0 * std::f64::consts::PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub backend: Backend,
    pub dim: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub torus: TorusSpec,
    #[serde(default)]
    pub mixture: MixtureSpec,
    #[serde(default)]
    pub identities: IdentitySpec,
    #[serde(default)]
    pub concavity: ConcavitySpec,
    #[serde(default)]
    pub extremal: ExtremalSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusSpec {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "two_pi")]
    pub length: f64,
    #[serde(default)]
    pub bandwidth: Option<i64>,
    #[serde(default)]
    pub max_amplitude: Option<f64>,
}

impl Default for TorusSpec {
    fn default() -> Self {
        TorusSpec {
            n: None,
            length: two_pi(),
            bandwidth: None,
            max_amplitude: None,
        }
    }
}

impl TorusSpec {
    /// `(n, bandwidth, max_amplitude)` with dimension defaults filled in.
    pub fn resolved(&self, dim: usize) -> (usize, i64, f64) {
        let (b, a) = default_torus_family(dim);
        let n = self.n.unwrap_or(match dim {
            1 => 1024,
            2 => 256,
            _ => 64,
        });
        (n, self.bandwidth.unwrap_or(b), self.max_amplitude.unwrap_or(a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    /// Explicit mixture; when absent, random mixtures are drawn.
    #[serde(default)]
    pub components: Option<Vec<Component>>,
    #[serde(default = "MixtureSpec::default_count")]
    pub count: usize,
    #[serde(default = "MixtureSpec::default_spread")]
    pub mean_spread: f64,
    #[serde(default = "MixtureSpec::default_variances")]
    pub variance_range: [f64; 2],
}

impl MixtureSpec {
    fn default_count() -> usize {
        3
    }
    fn default_spread() -> f64 {
        1.5
    }
    fn default_variances() -> [f64; 2] {
        [0.4, 1.6]
    }
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec {
            components: None,
            count: Self::default_count(),
            mean_spread: Self::default_spread(),
            variance_range: Self::default_variances(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitySpec {
    #[serde(default = "IdentitySpec::default_trials")]
    pub trials: usize,
    /// Trial `i` checks the transform at `delta_list[i % len]`.
    #[serde(default = "IdentitySpec::default_deltas")]
    pub delta_list: Vec<f64>,
}

impl IdentitySpec {
    fn default_trials() -> usize {
        100
    }
    fn default_deltas() -> Vec<f64> {
        vec![0.0]
    }
}

impl Default for IdentitySpec {
    fn default() -> Self {
        IdentitySpec {
            trials: Self::default_trials(),
            delta_list: Self::default_deltas(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcavitySpec {
    #[serde(default)]
    pub q_list: Option<Vec<f64>>,
    #[serde(default)]
    pub delta_list: Option<Vec<f64>>,
    #[serde(default = "ConcavitySpec::default_times")]
    pub t_list: Vec<f64>,
    #[serde(default)]
    pub fd_step: Option<f64>,
    #[serde(default = "yes")]
    pub finite_differences: bool,
}

fn yes() -> bool {
    true
}

impl ConcavitySpec {
    /// Ten points from 0.05 to 1.
    pub fn default_times() -> Vec<f64> {
        (0..10).map(|i| 0.05 + 0.95 * i as f64 / 9.0).collect()
    }

    /// The entropic indices of the scan. `q_list` and `delta_list` must
    /// agree under `q = 2/(1+δ)` when both are given.
    pub fn q_values(&self, dim: usize) -> Result<Vec<f64>> {
        match (&self.q_list, &self.delta_list) {
            (Some(qs), Some(ds)) => {
                if qs.len() != ds.len() {
                    return Err(Error::Config("q_list and delta_list differ in length".into()));
                }
                for (q, d) in qs.iter().zip(ds) {
                    let expected = delta_to_q(DeltaIndex::new(*d).map_err(|e| Error::Config(e.to_string()))?);
                    if (expected - q).abs() > 1e-12 * q.abs() {
                        return Err(Error::Config(format!("q = {q} and delta = {d} violate q = 2/(1+delta)")));
                    }
                }
                Ok(qs.clone())
            }
            (Some(qs), None) => Ok(qs.clone()),
            (None, Some(ds)) => ds
                .iter()
                .map(|d| Ok(delta_to_q(DeltaIndex::new(*d).map_err(|e| Error::Config(e.to_string()))?)))
                .collect(),
            (None, None) => Ok(if dim == 1 {
                vec![1.0, 1.5, 2.0, 2.5, 3.0]
            } else {
                vec![1.0, 1.5, 2.0, 2.894]
            }),
        }
    }
}

impl Default for ConcavitySpec {
    fn default() -> Self {
        ConcavitySpec {
            q_list: None,
            delta_list: None,
            t_list: Self::default_times(),
            fd_step: None,
            finite_differences: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtremalSpec {
    #[serde(default = "ExtremalSpec::default_objective")]
    pub objective: String,
    #[serde(default)]
    pub starts: Option<usize>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub bandwidth: Option<i64>,
    #[serde(default)]
    pub start_amplitude: Option<f64>,
    #[serde(default)]
    pub initial_step: Option<f64>,
    #[serde(default)]
    pub subspace_dim: Option<usize>,
}

impl ExtremalSpec {
    fn default_objective() -> String {
        "quartic_over_lap".into()
    }
}

impl Default for ExtremalSpec {
    fn default() -> Self {
        ExtremalSpec {
            objective: Self::default_objective(),
            starts: None,
            budget: None,
            n: None,
            bandwidth: None,
            start_amplitude: None,
            initial_step: None,
            subspace_dim: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub identity_torus: f64,
    pub identity_mixture: f64,
    pub ibp_torus: f64,
    pub ibp_mixture: f64,
    pub bochner: f64,
    pub one_d_reduction: f64,
    pub decomposition: f64,
    /// Margins may fall below zero by this fraction of `|lhs| + |rhs|`.
    pub margin: f64,
    /// `d²S_q/dt²` may exceed zero by this fraction of its scale.
    pub concavity: f64,
    pub resolution: f64,
    pub quadrature_rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity_torus: 1e-8,
            identity_mixture: 1e-7,
            ibp_torus: 1e-10,
            ibp_mixture: 1e-7,
            bochner: 1e-9,
            one_d_reduction: 1e-8,
            decomposition: 1e-9,
            margin: 1e-8,
            concavity: 1e-8,
            resolution: 1e-10,
            quadrature_rtol: 1e-12,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if !(1..=3).contains(&self.dim) {
            return bad(format!("dim must be 1, 2 or 3, got {}", self.dim));
        }
        for d in &self.identities.delta_list {
            DeltaIndex::new(*d).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.identities.delta_list.is_empty() {
            return bad("identities.delta_list is empty".into());
        }
        for q in self.concavity.q_values(self.dim)? {
            q_to_delta(q).map_err(|e| Error::Config(format!("q = {q}: {e}")))?;
        }
        if let Some(comps) = &self.mixture.components {
            if comps.iter().any(|c| c.mean.len() != self.dim) {
                return bad("mixture component means must have `dim` entries".into());
            }
        }
        let [lo, hi] = self.mixture.variance_range;
        if !(lo > 0.0 && hi >= lo) {
            return bad(format!("mixture.variance_range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"));
        }
        if self.mixture.count == 0 {
            return bad("mixture.count must be positive".into());
        }
        crate::extremal::RatioObjective::parse(&self.extremal.objective)?;
        Ok(())
    }

    /// A minimal configuration with every default.
    pub fn default_for(backend: Backend, dim: usize) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            backend,
            dim,
            output_dir: None,
            torus: TorusSpec::default(),
            mixture: MixtureSpec::default(),
            identities: IdentitySpec::default(),
            concavity: ConcavitySpec::default(),
            extremal: ExtremalSpec::default(),
            tolerances: Tolerances::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let c = RunConfig::from_toml("schema_version = 1\nbackend = \"torus\"\ndim = 2\n").unwrap();
        assert_eq!(c, RunConfig::default_for(Backend::Torus, 2));
        assert_eq!(c.torus.resolved(2), (256, 3, 1.2));
        assert_eq!(c.concavity.t_list.len(), 10);
        assert!((c.concavity.t_list[9] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig::default_for(Backend::Mixture, 1);
        c.seed = 99;
        c.concavity.q_list = Some(vec![1.5, 2.0]);
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_toml("schema_version = 2\nbackend = \"torus\"\ndim = 2\n").is_err());
        assert!(RunConfig::from_toml("schema_version = 1\nbackend = \"torus\"\ndim = 4\n").is_err());
        assert!(RunConfig::from_toml("schema_version = 1\nbackend = \"torus\"\ndim = 1\nbogus = 1\n").is_err());
        let inconsistent = "schema_version = 1\nbackend = \"torus\"\ndim = 1\n[concavity]\nq_list = [2.0]\ndelta_list = [0.5]\n";
        assert!(matches!(RunConfig::from_toml(inconsistent), Err(Error::Config(_))));
        let consistent = "schema_version = 1\nbackend = \"torus\"\ndim = 1\n[concavity]\nq_list = [2.0, 1.0]\ndelta_list = [0.0, 1.0]\n";
        assert!(RunConfig::from_toml(consistent).is_ok());
    }

    #[test]
    fn delta_list_maps_to_q() {
        let c = ConcavitySpec {
            delta_list: Some(vec![0.0, 1.0, -0.5]),
            ..ConcavitySpec::default()
        };
        assert_eq!(c.q_values(1).unwrap(), vec![2.0, 1.0, 4.0]);
    }
}
