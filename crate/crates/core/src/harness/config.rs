//! TOML experiment configuration.
//!
//! ```toml
//! name = "ssda-homogeneous"
//! outdir = "out/ssda_homogeneous"
//! seeds = [0, 1, 2]
//! record_every = 100
//!
//! [topology]
//! kind = "grid2d"        # ring | grid2d | complete | erdos_renyi | star | path
//! n = 100
//! delays = "unit"        # unit | exponential
//!
//! [objective]
//! family = "regression"  # averaging | regression | classification
//! dim = 50
//! samples = 150          # or samples_range = [50, 300]
//!
//! [network]
//! mu = "ssda_matched"    # or a number
//!
//! [algorithms]
//! list = ["esdacd", "ssda"]
//! ssda_iterations = 400
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::TopologyKind;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_outdir")]
    pub outdir: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Record spacing in SSDA iterations; edge methods record every
    /// `record_every * n / 4` of theirs so rows line up.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    pub topology: TopologyConfig,
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    pub algorithms: AlgorithmConfig,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub kind: String,
    pub n: usize,
    /// Erdős–Rényi edge probability.
    #[serde(default)]
    pub prob: Option<f64>,
    /// Erdős–Rényi graph seed.
    #[serde(default)]
    pub graph_seed: u64,
    #[serde(default)]
    pub delays: DelayModel,
    #[serde(default = "one")]
    pub delay_rate: f64,
    /// Constant compute time for every node.
    #[serde(default)]
    pub compute_time: f64,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DelayModel {
    #[default]
    Unit,
    Exponential,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Averaging,
    Regression,
    Classification,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub family: Family,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Per-node sample count drawn uniformly from this inclusive range.
    #[serde(default)]
    pub samples_range: Option<[usize; 2]>,
    #[serde(default = "default_noise")]
    pub noise_var: f64,
    #[serde(default = "one")]
    pub reg: f64,
    #[serde(default = "default_fraction")]
    pub fraction_ones: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default)]
    pub mu: MuPolicy,
    #[serde(default)]
    pub include_compute: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            mu: MuPolicy::default(),
            include_compute: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MuPolicy {
    Constant(f64),
    Named(NamedMu),
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NamedMu {
    /// `mu_ij^2 = p_ij^2 / (1/sigma_i + 1/sigma_j)`.
    SsdaMatched,
}

impl Default for MuPolicy {
    fn default() -> Self {
        MuPolicy::Constant(1.0)
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Esdacd,
    Gossip,
    Heavyball,
    Ssda,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Esdacd => "esdacd",
            Algorithm::Gossip => "gossip",
            Algorithm::Heavyball => "heavyball",
            Algorithm::Ssda => "ssda",
        }
    }

    pub fn samples_edges(&self) -> bool {
        !matches!(self, Algorithm::Ssda)
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub list: Vec<Algorithm>,
    /// Iterations for edge-sampled methods. Derived as `n/4 * ssda_iterations`
    /// when absent.
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub ssda_iterations: Option<usize>,
    #[serde(default = "one")]
    pub heavyball_omega: f64,
    #[serde(default = "half")]
    pub heavyball_beta: f64,
    /// Run the edge-space form of ESDACD instead of the node-local one.
    #[serde(default)]
    pub formal: bool,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_outdir() -> PathBuf {
    PathBuf::from("out")
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_record_every() -> usize {
    10
}
fn default_dim() -> usize {
    50
}
fn default_samples() -> usize {
    150
}
fn default_noise() -> f64 {
    0.25
}
fn default_fraction() -> f64 {
    0.1
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn topology_kind(&self) -> Result<TopologyKind> {
        Ok(match self.topology.kind.as_str() {
            "ring" => TopologyKind::Ring,
            "grid2d" | "grid" => TopologyKind::Grid2d,
            "complete" => TopologyKind::Complete,
            "star" => TopologyKind::Star,
            "path" => TopologyKind::Path,
            "erdos_renyi" => TopologyKind::ErdosRenyi {
                prob: self
                    .topology
                    .prob
                    .ok_or_else(|| Error::Config("erdos_renyi needs `prob`".into()))?,
                seed: self.topology.graph_seed,
            },
            other => return Err(Error::Config(format!("unknown topology `{other}`"))),
        })
    }

    /// `n / 4`, the ratio of edge iterations to SSDA iterations.
    pub fn iteration_ratio(&self) -> f64 {
        self.topology.n as f64 / 4.0
    }

    /// Iteration budget for edge-sampled methods.
    pub fn edge_iterations(&self) -> usize {
        match (self.algorithms.iterations, self.algorithms.ssda_iterations) {
            (Some(k), _) => k,
            (None, Some(s)) => (s as f64 * self.iteration_ratio()).round() as usize,
            (None, None) => 0,
        }
    }

    pub fn ssda_iterations(&self) -> usize {
        match (self.algorithms.ssda_iterations, self.algorithms.iterations) {
            (Some(s), _) => s,
            (None, Some(k)) => (k as f64 / self.iteration_ratio()).round() as usize,
            (None, None) => 0,
        }
    }

    /// Record spacing for edge-sampled methods.
    pub fn edge_record_every(&self) -> usize {
        if self.algorithms.list.contains(&Algorithm::Ssda) {
            ((self.record_every as f64 * self.iteration_ratio()).round() as usize).max(1)
        } else {
            self.record_every.max(1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.topology_kind()?;
        let a = &self.algorithms;
        if a.list.is_empty() {
            return Err(Error::Config("algorithm list is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        if a.iterations.is_none() && a.ssda_iterations.is_none() {
            return Err(Error::Config(
                "set `iterations` or `ssda_iterations` under [algorithms]".into(),
            ));
        }
        let has_ssda = a.list.contains(&Algorithm::Ssda);
        let has_esdacd = a.list.contains(&Algorithm::Esdacd);
        if has_ssda && has_esdacd {
            if let (Some(k), Some(s)) = (a.iterations, a.ssda_iterations) {
                let expected = (s as f64 * self.iteration_ratio()).round() as usize;
                if k != expected {
                    return Err(Error::Config(format!(
                        "edge iterations must be n/4 times the SSDA iterations: expected {expected}, got {k}"
                    )));
                }
            }
        }
        let gossip = a.list.iter().any(|x| matches!(x, Algorithm::Gossip | Algorithm::Heavyball));
        if gossip && self.objective.family != Family::Averaging {
            return Err(Error::Config(
                "gossip baselines only apply to the averaging family".into(),
            ));
        }
        if !(0.0..1.0).contains(&a.heavyball_beta) {
            return Err(Error::Config(format!(
                "heavyball_beta must be in [0, 1), got {}",
                a.heavyball_beta
            )));
        }
        let o = &self.objective;
        if o.dim == 0 || o.samples == 0 {
            return Err(Error::Config("dim and samples must be positive".into()));
        }
        if let Some([lo, hi]) = o.samples_range {
            if lo == 0 || lo > hi {
                return Err(Error::Config(format!("bad samples_range [{lo}, {hi}]")));
            }
        }
        if !(o.noise_var >= 0.0) || !(o.reg > 0.0) || !(0.0..=1.0).contains(&o.fraction_ones) {
            return Err(Error::Config("noise_var, reg or fraction_ones out of range".into()));
        }
        if let MuPolicy::Constant(m) = self.network.mu {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config(format!("mu must be positive, got {m}")));
            }
        }
        if self.topology.delays == DelayModel::Exponential && !(self.topology.delay_rate > 0.0) {
            return Err(Error::InvalidRate(self.topology.delay_rate));
        }
        if !(self.topology.compute_time >= 0.0) {
            return Err(Error::Config("compute_time must be non-negative".into()));
        }
        Ok(())
    }
}
