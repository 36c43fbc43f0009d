use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::comms::CommsArchitecture;
use crate::error::{Error, Result};
use crate::repair::{DamageChain, InitialDamage, RepairGraph, RepairModel};
use crate::rollout::RolloutConfig;

/// A built-in preset or a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Preset(String),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub graph: Source,
    pub chain: Source,
    pub agents: usize,
    #[serde(default)]
    pub initial_damage: InitialDamage,
    /// Replace the chain by its non-escalating variant.
    #[serde(default)]
    pub terminating: bool,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            graph: Source::Preset("desk".into()),
            chain: Source::Preset("desk".into()),
            agents: 2,
            initial_damage: InitialDamage::default(),
            terminating: false,
        }
    }
}

impl InstanceConfig {
    pub fn load_graph(&self, base_dir: &Path) -> Result<RepairGraph> {
        match &self.graph {
            Source::Preset(name) => match name.as_str() {
                "benchmark" => Ok(RepairGraph::benchmark()),
                "desk" => Ok(RepairGraph::desk()),
                other => Err(Error::Config(format!("unknown graph preset {other:?}"))),
            },
            Source::File(p) => RepairGraph::load(base_dir.join(p)),
        }
    }

    pub fn load_chain(&self, base_dir: &Path) -> Result<DamageChain> {
        let chain = match &self.chain {
            Source::Preset(name) => match name.as_str() {
                "benchmark" => DamageChain::benchmark(),
                "desk" => DamageChain::desk(),
                other => return Err(Error::Config(format!("unknown chain preset {other:?}"))),
            },
            Source::File(p) => DamageChain::load(base_dir.join(p))?,
        };
        Ok(if self.terminating { chain.terminating() } else { chain })
    }

    pub fn build(&self, discount: f64, base_dir: &Path) -> Result<RepairModel> {
        RepairModel::new(self.load_graph(base_dir)?, self.load_chain(base_dir)?, self.agents, discount)
    }
}

/// What to run in one grid column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Base,
    Standard,
    OneAtATime,
    OrderOptimized,
    /// Multistep lookahead with the configured `lookahead`.
    Multistep,
    /// A chain of classifier files, one per policy-iteration step; the last
    /// one acts, each earlier one is the base of the next.
    Classifier { files: Vec<PathBuf> },
    Comms {
        architecture: CommsArchitecture,
        /// Classifier chain for AMR-N (last file predicts) and AMR-PI (last
        /// file predicts, the one before it is the base).
        #[serde(default)]
        classifiers: Vec<PathBuf>,
    },
}

impl PolicySpec {
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Base => "base".into(),
            PolicySpec::Standard => "standard".into(),
            PolicySpec::OneAtATime => "one-at-a-time".into(),
            PolicySpec::OrderOptimized => "order-optimized".into(),
            PolicySpec::Multistep => "multistep".into(),
            PolicySpec::Classifier { files } => format!("classifier-{}", files.len()),
            PolicySpec::Comms { architecture, .. } => architecture.label(),
        }
    }

    /// Parses the short forms accepted on the command line, such as
    /// `one-at-a-time`, `amr-lc:2`, `amr-ilc:0.8:1` or `amr-ib1:0.5`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let num = |i: usize| -> Result<f64> {
            args.get(i)
                .ok_or_else(|| Error::Config(format!("{s}: missing argument {}", i + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{s}: {e}")))
        };
        let comms = |architecture| PolicySpec::Comms {
            architecture,
            classifiers: Vec::new(),
        };
        let spec = match head {
            "base" => PolicySpec::Base,
            "standard" => PolicySpec::Standard,
            "one-at-a-time" => PolicySpec::OneAtATime,
            "order-optimized" => PolicySpec::OrderOptimized,
            "multistep" => PolicySpec::Multistep,
            "classifier" => PolicySpec::Classifier {
                files: args.iter().map(PathBuf::from).collect(),
            },
            "amr-b" => comms(CommsArchitecture::AmrB),
            "amr-n" | "amr-pi" => PolicySpec::Comms {
                architecture: if head == "amr-n" { CommsArchitecture::AmrN } else { CommsArchitecture::AmrPi },
                classifiers: args.iter().map(PathBuf::from).collect(),
            },
            "amr-lc" => comms(CommsArchitecture::AmrLc { radius: num(0)? as usize }),
            "amr-ilc" => comms(CommsArchitecture::AmrIlc {
                rho: num(0)?,
                radius: if args.len() > 1 { num(1)? as usize } else { 1 },
            }),
            "amr-ib1" => comms(CommsArchitecture::AmrIb1 { rho: num(0)? }),
            "amr-ib0" => comms(CommsArchitecture::AmrIb0 { rho: num(0)? }),
            other => return Err(Error::Config(format!("unknown policy {other:?}"))),
        };
        spec.validate_shape()?;
        Ok(spec)
    }

    fn validate_shape(&self) -> Result<()> {
        match self {
            PolicySpec::Classifier { files } if files.is_empty() => {
                Err(Error::Config("classifier policy needs at least one file".into()))
            }
            PolicySpec::Comms {
                architecture,
                classifiers,
            } => {
                architecture.validate()?;
                match architecture {
                    CommsArchitecture::AmrN if classifiers.is_empty() => {
                        Err(Error::Config("AMR-N needs a classifier file".into()))
                    }
                    CommsArchitecture::AmrPi if classifiers.len() < 2 => {
                        Err(Error::Config("AMR-PI needs at least two classifier files".into()))
                    }
                    _ => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    fn files(&self) -> &[PathBuf] {
        match self {
            PolicySpec::Classifier { files } => files,
            PolicySpec::Comms { classifiers, .. } => classifiers,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    pub initial_states: usize,
    pub horizon: usize,
    pub discount: f64,
    pub root_seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            initial_states: 100,
            horizon: 200,
            discount: 0.95,
            root_seed: 2021,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct OutputConfig {
    pub results_csv: Option<PathBuf>,
    pub comparison_csv: Option<PathBuf>,
    pub timing_csv: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub instance: InstanceConfig,
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub rollout: RolloutConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative file paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(instance: InstanceConfig, policies: Vec<PolicySpec>) -> Self {
        Self {
            instance,
            policies,
            rollout: RolloutConfig::default(),
            evaluation: EvaluationConfig::default(),
            output: OutputConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::Config("no policies to evaluate".into()));
        }
        if self.instance.agents == 0 {
            return Err(Error::Config("need at least one agent".into()));
        }
        if !(0.0..=1.0).contains(&self.instance.initial_damage.p_dmg) {
            return Err(Error::Config("initial damage probability must lie in [0,1]".into()));
        }
        let alpha = self.evaluation.discount;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("discount {alpha} not in (0,1)")));
        }
        self.rollout.validate()?;
        for p in &self.policies {
            p.validate_shape()?;
            for f in p.files() {
                let full = self.base_dir.join(f);
                if !full.exists() {
                    return Err(Error::Config(format!("{} does not exist", full.display())));
                }
            }
        }
        for src in [&self.instance.graph, &self.instance.chain] {
            if let Source::File(f) = src {
                let full = self.base_dir.join(f);
                if !full.exists() {
                    return Err(Error::Config(format!("{} does not exist", full.display())));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_policy_forms() {
        assert_eq!(PolicySpec::parse("base").unwrap(), PolicySpec::Base);
        assert_eq!(
            PolicySpec::parse("amr-ilc:0.8:2").unwrap(),
            PolicySpec::Comms {
                architecture: CommsArchitecture::AmrIlc { rho: 0.8, radius: 2 },
                classifiers: vec![]
            }
        );
        assert!(PolicySpec::parse("amr-ib1:0").is_err());
        assert!(PolicySpec::parse("amr-pi:a.bin").is_err());
        assert!(PolicySpec::parse("nonsense").is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let cfg = ExperimentConfig::new(InstanceConfig::default(), vec![PolicySpec::Base, PolicySpec::OneAtATime]);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.policies, cfg.policies);
        back.validate().unwrap();
        let mut missing = cfg.clone();
        missing.policies.push(PolicySpec::Classifier {
            files: vec!["does/not/exist.bin".into()],
        });
        assert!(missing.validate().is_err());
    }
}
