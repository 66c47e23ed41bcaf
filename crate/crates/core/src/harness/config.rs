//! Run configuration shared by the CLI and the Monte Carlo driver.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::ccp::CcpHyper;
use crate::dgp::DgpConfig;
use crate::error::{Error, Result};
use crate::estimators::{FeLogitOptions, MsmOptions, SearchOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Simulate,
    Estimate,
    Set,
    Test,
    Bounds,
    Montecarlo,
    Rationalize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    TwoStep,
    Msm,
    FeLogit,
    SemiNb,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] =
        [EstimatorKind::TwoStep, EstimatorKind::Msm, EstimatorKind::FeLogit, EstimatorKind::SemiNb];

    pub fn tag(self) -> &'static str {
        match self {
            EstimatorKind::TwoStep => "two-step",
            EstimatorKind::Msm => "msm",
            EstimatorKind::FeLogit => "fe-logit",
            EstimatorKind::SemiNb => "semi-nb",
        }
    }

    /// Whether the estimator reports γ as well as β.
    pub fn estimates_gamma(self) -> bool {
        matches!(self, EstimatorKind::TwoStep | EstimatorKind::Msm)
    }

    pub fn needs_ccp(self) -> bool {
        matches!(self, EstimatorKind::TwoStep | EstimatorKind::SemiNb)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<EstimatorKind> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.tag() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator {s:?}")))
    }
}

/// Tuning shared by every replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSettings {
    #[serde(default)]
    pub ccp: CcpHyper,
    #[serde(default)]
    pub search: SearchOptions,
    #[serde(default)]
    pub msm: MsmOptions,
    #[serde(default)]
    pub fe_logit: FeLogitOptions,
    #[serde(default = "default_true")]
    pub renormalize: bool,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            ccp: CcpHyper::default(),
            search: SearchOptions::default(),
            msm: MsmOptions::default(),
            fe_logit: FeLogitOptions::default(),
            renormalize: true,
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_eval_draws() -> usize {
    super::metrics::DEFAULT_EVAL_DRAWS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    /// The seed in here is replaced by the per-replication seed in Monte Carlo runs.
    pub dgp: DgpConfig,
    pub estimators: Vec<EstimatorKind>,
    pub replications: usize,
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub settings: EstimatorSettings,
    #[serde(default = "default_eval_draws")]
    pub eval_draws: usize,
}

impl RunConfig {
    pub fn montecarlo(dgp: DgpConfig, estimators: Vec<EstimatorKind>, replications: usize, base_seed: u64) -> RunConfig {
        RunConfig {
            task: Task::Montecarlo,
            dgp,
            estimators,
            replications,
            base_seed,
            output: None,
            threads: None,
            settings: EstimatorSettings::default(),
            eval_draws: default_eval_draws(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be >= 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be >= 1".into()));
        }
        if self.eval_draws == 0 {
            return Err(Error::InvalidArgument("eval_draws must be positive".into()));
        }
        if self.task == Task::Montecarlo && self.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimators selected".into()));
        }
        self.dgp.validate()
    }
}
