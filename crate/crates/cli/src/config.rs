//! Run configuration: a TOML file plus command-line overrides.
//!
//! ```toml
//! strategy = ["go", "pgh"]
//! n = [20, 40]
//! m = 100
//! phases = { count = 20 }
//! channel = ["ideal", "depolarizing:0.1"]
//! seed = 7
//!
//! [pso]
//! swarm_size = 40
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use mzi_phase::harness::{PhaseSet, Strategy};
use mzi_phase::posterior::{Interval, DEFAULT_GRID_SIZE};
use mzi_phase::pso::{Policy, PsoConfig};
use mzi_phase::{GoFallback, NoiseChannel, Phase, SignConvention};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_RUNS: usize = 100;

/// A scalar or a list of scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

impl<T> From<Vec<T>> for OneOrMany<T> {
    fn from(mut v: Vec<T>) -> Self {
        if v.len() == 1 {
            OneOrMany::One(v.remove(0))
        } else {
            OneOrMany::Many(v)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseSpec {
    Single(f64),
    List(Vec<f64>),
    Even(EvenPhases),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvenPhases {
    pub count: usize,
    #[serde(default)]
    pub lo: f64,
    #[serde(default = "full_turn")]
    pub hi: f64,
}

fn full_turn() -> f64 {
    std::f64::consts::TAU
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write the posterior after every probe (estimate only).
    #[serde(default)]
    pub snapshots: bool,
    /// Write every run record (benchmark only).
    #[serde(default)]
    pub records: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<OneOrMany<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<OneOrMany<usize>>,
    #[serde(default = "default_runs")]
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<PhaseSpec>,
    #[serde(default = "default_channel")]
    pub channel: OneOrMany<String>,
    /// Give the Bayes update the true noise model instead of the ideal one.
    #[serde(default)]
    pub noise_aware: bool,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    /// Prior support `[lo, hi]` for the online strategies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_support: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PathBuf>,
    #[serde(default)]
    pub sign_convention: SignConvention,
    #[serde(default)]
    pub go_fallback: GoFallback,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub pso: PsoSection,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Swarm settings; the seed comes from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoSection {
    pub swarm_size: usize,
    pub iterations: usize,
    pub omega: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub neighborhood_radius: usize,
    pub fitness_samples: usize,
    pub velocity_clamp: f64,
}

impl Default for PsoSection {
    fn default() -> Self {
        let d = PsoConfig::default();
        PsoSection {
            swarm_size: d.swarm_size,
            iterations: d.iterations,
            omega: d.omega,
            beta1: d.beta1,
            alpha2: d.alpha2,
            neighborhood_radius: d.neighborhood_radius,
            fitness_samples: d.fitness_samples,
            velocity_clamp: d.velocity_clamp,
        }
    }
}

fn default_runs() -> usize {
    DEFAULT_RUNS
}

fn default_channel() -> OneOrMany<String> {
    OneOrMany::One("ideal".into())
}

fn default_grid() -> usize {
    DEFAULT_GRID_SIZE
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            strategy: None,
            n: None,
            m: DEFAULT_RUNS,
            phases: None,
            channel: default_channel(),
            noise_aware: false,
            grid_size: DEFAULT_GRID_SIZE,
            prior_support: None,
            policy: None,
            sign_convention: SignConvention::default(),
            go_fallback: GoFallback::default(),
            seed: None,
            threads: None,
            pso: PsoSection::default(),
            output: OutputConfig::default(),
        }
    }
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialise")
    }

    pub fn strategies(&self) -> Result<Vec<Strategy>, CliError> {
        let names = self
            .strategy
            .as_ref()
            .ok_or_else(|| config_err("strategy", "missing"))?
            .to_vec();
        if names.is_empty() {
            return Err(config_err("strategy", "empty list"));
        }
        names.iter().map(|name| self.parse_strategy(name)).collect()
    }

    fn parse_strategy(&self, name: &str) -> Result<Strategy, CliError> {
        Ok(match name {
            "go" => Strategy::Go {
                sign: self.sign_convention,
                fallback: self.go_fallback,
            },
            "pgh" => Strategy::Pgh,
            "inversion" => Strategy::Inversion,
            "bayes-fixed" => Strategy::BayesFixed,
            "policy" => {
                let path = self
                    .policy
                    .as_ref()
                    .ok_or_else(|| config_err("policy", "required by the policy strategy"))?;
                Strategy::Policy(Arc::new(load_policy(path)?))
            }
            other => {
                return Err(config_err(
                    "strategy",
                    format!("unknown strategy {other:?} (go, pgh, policy, inversion, bayes-fixed)"),
                ))
            }
        })
    }

    /// Probe counts, ascending and deduplicated.
    pub fn probe_counts(&self) -> Result<Vec<usize>, CliError> {
        let mut ns = self.n.as_ref().ok_or_else(|| config_err("n", "missing"))?.to_vec();
        if ns.is_empty() {
            return Err(config_err("n", "empty list"));
        }
        if ns.contains(&0) {
            return Err(config_err("n", "probe counts must be at least 1"));
        }
        ns.sort_unstable();
        ns.dedup();
        Ok(ns)
    }

    pub fn single_probe_count(&self) -> Result<usize, CliError> {
        let ns = self.probe_counts()?;
        match ns.as_slice() {
            [n] => Ok(*n),
            _ => Err(config_err("n", "this command takes a single probe count")),
        }
    }

    pub fn channels(&self) -> Result<Vec<NoiseChannel>, CliError> {
        let specs = self.channel.to_vec();
        if specs.is_empty() {
            return Err(config_err("channel", "empty list"));
        }
        specs
            .iter()
            .map(|s| NoiseChannel::from_str(s).map_err(|e| config_err("channel", e)))
            .collect()
    }

    pub fn single_channel(&self) -> Result<NoiseChannel, CliError> {
        match self.channels()?.as_slice() {
            [c] => Ok(*c),
            _ => Err(config_err("channel", "this command takes a single channel")),
        }
    }

    pub fn phase_set(&self) -> Result<PhaseSet, CliError> {
        let spec = self.phases.as_ref().ok_or_else(|| config_err("phases", "missing"))?;
        let set = match spec {
            PhaseSpec::Single(p) => PhaseSet::List(vec![to_phase(*p)?]),
            PhaseSpec::List(v) => PhaseSet::List(v.iter().map(|p| to_phase(*p)).collect::<Result<_, _>>()?),
            PhaseSpec::Even(e) => {
                if e.count == 0 {
                    return Err(config_err("phases.count", "must be at least 1"));
                }
                PhaseSet::Even {
                    count: e.count,
                    lo: e.lo,
                    hi: e.hi,
                }
            }
        };
        set.phases().map_err(|e| config_err("phases", e))?;
        Ok(set)
    }

    pub fn single_phase(&self) -> Result<Phase, CliError> {
        match self.phase_set()?.phases().map_err(|e| config_err("phases", e))?.as_slice() {
            [p] => Ok(*p),
            _ => Err(config_err("phases", "this command takes a single phase")),
        }
    }

    pub fn support(&self) -> Result<Option<Interval>, CliError> {
        self.prior_support
            .map(|[lo, hi]| Interval::new(lo, hi).map_err(|e| config_err("prior_support", e)))
            .transpose()
    }

    pub fn pso_config(&self) -> Result<PsoConfig, CliError> {
        let p = &self.pso;
        let config = PsoConfig {
            swarm_size: p.swarm_size,
            iterations: p.iterations,
            omega: p.omega,
            beta1: p.beta1,
            alpha2: p.alpha2,
            neighborhood_radius: p.neighborhood_radius,
            fitness_samples: p.fitness_samples,
            velocity_clamp: p.velocity_clamp,
            seed: self.seed.unwrap_or_default(),
        };
        config.validate().map_err(|e| config_err("pso", e))?;
        Ok(config)
    }

    /// Checks everything that does not depend on the command.
    pub fn validate_common(&self) -> Result<(), CliError> {
        if self.grid_size < 2 {
            return Err(config_err("grid_size", "must be at least 2"));
        }
        if self.m < 2 {
            return Err(config_err("m", "at least 2 runs are needed"));
        }
        if self.threads == Some(0) {
            return Err(config_err("threads", "must be at least 1"));
        }
        self.channels()?;
        self.support()?;
        if let Some(n) = &self.n {
            if n.to_vec().contains(&0) {
                return Err(config_err("n", "probe counts must be at least 1"));
            }
        }
        Ok(())
    }
}

fn to_phase(p: f64) -> Result<Phase, CliError> {
    Phase::try_new(p).map_err(|e| config_err("phases", e))
}

pub fn load_policy(path: &Path) -> Result<Policy, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("policy: cannot read {}: {e}", path.display())))?;
    let policy: Policy = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("policy: {}: {e}", path.display())))?;
    policy
        .validate()
        .map_err(|e| CliError::Config(format!("policy: {}: {e}", path.display())))?;
    Ok(policy)
}
