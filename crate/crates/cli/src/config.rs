//! Experiment configuration files.
//!
//! A config is TOML with these sections:
//!
//! ```toml
//! seed = 0                 # run seed
//! [environment]
//! seed = 2024              # environment (shadowing) seed
//! [layout]                 # sites and radio model; needed by gen-env
//! [thresholds]
//! [random]
//! [bo]
//! [ddpg]
//! [output]
//! dir = "out"
//! ```
//!
//! Every section except `[environment]` has defaults.

use std::fs;
use std::path::{Path, PathBuf};

use cco_core::ddpg::{DdpgConfig, ExplorationSchedule};
use cco_core::mobo::{AcquisitionOptions, BoOptions};
use cco_core::objectives::Thresholds;
use cco_core::rfmap::LayoutConfig;
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Random,
    Bo,
    Ddpg,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Bo => "bo",
            Method::Ddpg => "ddpg",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub environment: EnvironmentSection,
    pub layout: Option<LayoutConfig>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub random: RandomSection,
    #[serde(default)]
    pub bo: BoSection,
    #[serde(default)]
    pub ddpg: DdpgSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub seed: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomSection {
    pub budget: usize,
}

impl Default for RandomSection {
    fn default() -> Self {
        Self { budget: 1012 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoSection {
    pub n_init: usize,
    pub n_iter: usize,
    pub initial_restarts: usize,
    pub refit_restarts: usize,
    pub raw_samples: usize,
    pub starts: usize,
    pub pattern_iterations: usize,
}

impl Default for BoSection {
    fn default() -> Self {
        let o = BoOptions::default();
        Self {
            n_init: o.n_init,
            n_iter: o.n_iter,
            initial_restarts: o.initial_restarts,
            refit_restarts: o.refit_restarts,
            raw_samples: o.acquisition.raw_samples,
            starts: o.acquisition.starts,
            pattern_iterations: o.acquisition.iterations,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgSection {
    pub iterations: usize,
    pub lambda_stride: f64,
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub tau: f64,
    pub buffer_capacity: usize,
    pub noise_initial_variance: f64,
    pub noise_decay: f64,
    pub noise_floor: f64,
}

impl Default for DdpgSection {
    fn default() -> Self {
        let c = DdpgConfig::default();
        Self {
            iterations: 30_000,
            lambda_stride: 0.1,
            hidden: c.hidden,
            actor_lr: c.actor_lr,
            critic_lr: c.critic_lr,
            batch_size: c.batch_size,
            tau: c.tau,
            buffer_capacity: c.buffer_capacity,
            noise_initial_variance: c.exploration.initial_variance,
            noise_decay: c.exploration.decay,
            noise_floor: c.exploration.floor,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Command-line overrides for `run`.
#[derive(Clone, Debug, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    /// Random: total evaluations. BO: iterations after the initial design.
    /// DDPG: iterations per weight.
    pub budget: Option<usize>,
    pub lambda_stride: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("invalid TOML: {e}")))?;
        if !table.contains_key("environment") {
            return Err(CliError::Config("missing [environment] section".into()));
        }
        let cfg: Self = table.try_into().map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
        cfg.thresholds.validate()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("random.budget", self.random.budget),
            ("bo.n_init", self.bo.n_init),
            ("bo.raw_samples", self.bo.raw_samples),
            ("bo.starts", self.bo.starts),
            ("ddpg.iterations", self.ddpg.iterations),
            ("ddpg.batch_size", self.ddpg.batch_size),
            ("ddpg.buffer_capacity", self.ddpg.buffer_capacity),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::Config(format!("{name} must be positive")));
        }
        Ok(())
    }

    /// The `[layout]` section, which only `gen-env` requires.
    pub fn layout(&self) -> Result<&LayoutConfig> {
        self.layout.as_ref().ok_or_else(|| CliError::Config("missing [layout] section".into()))
    }

    pub fn env_path(&self) -> PathBuf {
        self.output.dir.join("env.toml")
    }

    pub fn tensor_path(&self) -> PathBuf {
        self.output.dir.join("tensor.bin")
    }

    /// Applies overrides, rejecting a zero budget.
    pub fn with_overrides(mut self, o: &RunOverrides, method: Method) -> Result<Self> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(budget) = o.budget {
            if budget == 0 {
                return Err(CliError::Config("--budget must be positive".into()));
            }
            match method {
                Method::Random => self.random.budget = budget,
                Method::Bo => self.bo.n_iter = budget,
                Method::Ddpg => self.ddpg.iterations = budget,
            }
        }
        if let Some(stride) = o.lambda_stride {
            self.ddpg.lambda_stride = stride;
        }
        Ok(self)
    }

    pub fn bo_options(&self) -> BoOptions {
        BoOptions {
            n_init: self.bo.n_init,
            n_iter: self.bo.n_iter,
            seed: self.seed,
            initial_restarts: self.bo.initial_restarts,
            refit_restarts: self.bo.refit_restarts,
            acquisition: AcquisitionOptions {
                raw_samples: self.bo.raw_samples,
                starts: self.bo.starts,
                iterations: self.bo.pattern_iterations,
                ..AcquisitionOptions::default()
            },
            ..BoOptions::default()
        }
    }

    pub fn ddpg_config(&self, sectors: usize) -> DdpgConfig {
        DdpgConfig {
            hidden: self.ddpg.hidden.clone(),
            actor_lr: self.ddpg.actor_lr,
            critic_lr: self.ddpg.critic_lr,
            batch_size: self.ddpg.batch_size,
            tau: self.ddpg.tau,
            buffer_capacity: self.ddpg.buffer_capacity,
            exploration: ExplorationSchedule {
                initial_variance: self.ddpg.noise_initial_variance,
                decay: self.ddpg.noise_decay,
                floor: self.ddpg.noise_floor,
            },
            ..DdpgConfig::for_sectors(sectors)
        }
    }

    /// Number of black-box evaluations a run of `method` will record.
    pub fn planned_evaluations(&self, method: Method) -> Result<usize> {
        Ok(match method {
            Method::Random => self.random.budget,
            Method::Bo => self.bo.n_init + self.bo.n_iter,
            Method::Ddpg => cco_core::ddpg::lambda_values(self.ddpg.lambda_stride)?.len() * self.ddpg.iterations,
        })
    }
}
