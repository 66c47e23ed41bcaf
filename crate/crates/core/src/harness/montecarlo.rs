//! Seeded Monte Carlo replications over the simulation designs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ccp::CcpTable;
use crate::dgp::simulate;
use crate::error::{Error, Result};
use crate::estimators::fe_logit::estimate_fe_logit;
use crate::estimators::msm::estimate_msm_parametric;
use crate::estimators::semi_nb::{estimate_semi_nobundle_with, SemiNoBundleOptions};
use crate::estimators::two_step::estimate_two_step_with;
use crate::estimators::MsmOptions;
use crate::model::ObservationPanel;
use crate::rng;

use super::config::{EstimatorKind, EstimatorSettings, RunConfig};
use super::metrics::{block_metrics, eval_z, sign_error, Block, MetricsRow};

const CCP_TAG: u64 = 0x0063_6370;

/// β and, when the estimator has one, γ from a single replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationEstimate {
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub estimator: EstimatorKind,
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRuns {
    pub estimator: EstimatorKind,
    /// One entry per replication; None where the estimator failed.
    pub estimates: Vec<Option<ReplicationEstimate>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub replications: usize,
    pub base_seed: u64,
    pub rows: Vec<MetricsRow>,
    pub failures: Vec<Failure>,
    pub runs: Vec<EstimatorRuns>,
}

impl MonteCarloReport {
    pub fn row(&self, estimator: EstimatorKind, parameter: Block) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.estimator == estimator.tag() && r.parameter == parameter)
    }

    pub fn runs(&self, estimator: EstimatorKind) -> Option<&EstimatorRuns> {
        self.runs.iter().find(|r| r.estimator == estimator)
    }
}

pub fn replication_seed(base_seed: u64, b: usize) -> u64 {
    rng::mix(base_seed, b as u64)
}

fn run_one(
    kind: EstimatorKind,
    panel: &ObservationPanel,
    table: Option<&CcpTable>,
    settings: &EstimatorSettings,
    seed: u64,
) -> Result<ReplicationEstimate> {
    let table = || table.ok_or_else(|| Error::Estimation("first-step CCPs unavailable".into()));
    match kind {
        EstimatorKind::TwoStep => {
            let e = estimate_two_step_with(panel, table()?, &settings.search)?;
            Ok(ReplicationEstimate { beta: e.theta.beta, gamma: Some(e.theta.gamma) })
        }
        EstimatorKind::Msm => {
            let opts = MsmOptions { seed, ..settings.msm.clone() };
            let e = estimate_msm_parametric(panel, &opts)?;
            Ok(ReplicationEstimate { beta: e.theta.beta, gamma: Some(e.theta.gamma) })
        }
        EstimatorKind::FeLogit => {
            let e = estimate_fe_logit(panel, &settings.fe_logit)?;
            Ok(ReplicationEstimate { beta: e.beta, gamma: None })
        }
        EstimatorKind::SemiNb => {
            let opts = SemiNoBundleOptions {
                ccp: settings.ccp.clone(),
                search: settings.search.clone(),
                renormalize: settings.renormalize,
            };
            let e = estimate_semi_nobundle_with(panel, table()?, &opts)?;
            Ok(ReplicationEstimate { beta: e.beta, gamma: None })
        }
    }
}

/// Every estimator's outcome for replication b, in the order of `config.estimators`.
pub fn run_replication(config: &RunConfig, b: usize) -> Vec<Result<ReplicationEstimate>> {
    let seed = replication_seed(config.base_seed, b);
    let mut dgp = config.dgp.clone();
    dgp.seed = seed;
    let panel = match simulate(&dgp) {
        Ok(sim) => sim.panel,
        Err(e) => return config.estimators.iter().map(|_| Err(Error::Estimation(e.to_string()))).collect(),
    };
    let table = if config.estimators.iter().any(|k| k.needs_ccp()) {
        let hyper = config.settings.ccp.clone().with_seed(rng::mix(seed, CCP_TAG));
        Some(CcpTable::fit(&panel, &hyper))
    } else {
        None
    };
    config
        .estimators
        .iter()
        .map(|&kind| match &table {
            Some(Err(e)) if kind.needs_ccp() => Err(Error::Estimation(format!("first step: {e}"))),
            Some(t) => run_one(kind, &panel, t.as_ref().ok(), &config.settings, seed),
            None => run_one(kind, &panel, None, &config.settings, seed),
        })
        .collect()
}

fn rows_for(
    config: &RunConfig,
    kind: EstimatorKind,
    estimates: &[Option<ReplicationEstimate>],
    z: &[Vec<f64>],
) -> Result<Vec<MetricsRow>> {
    let ok: Vec<&ReplicationEstimate> = estimates.iter().flatten().collect();
    let failures = estimates.len() - ok.len();
    let truth = &config.dgp.theta_true.normalized()?;
    let row = |parameter, err, sd, rmse, mad| MetricsRow {
        estimator: kind.tag().to_string(),
        parameter,
        design: config.dgp.design.number(),
        n: config.dgp.n,
        t_len: config.dgp.t_len,
        err,
        sd,
        rmse,
        mad,
        successes: ok.len(),
        failures,
    };
    if ok.is_empty() {
        let mut rows = Vec::new();
        if kind.estimates_gamma() {
            rows.push(row(Block::Gamma, None, f64::NAN, f64::NAN, f64::NAN));
        }
        rows.push(row(Block::Beta, None, f64::NAN, f64::NAN, f64::NAN));
        return Ok(rows);
    }
    let mut rows = Vec::new();
    if kind.estimates_gamma() {
        let gammas: Vec<&[f64]> = ok.iter().filter_map(|e| e.gamma.as_deref()).collect();
        let m = block_metrics(&gammas, &truth.gamma)?;
        let err = sign_error(&gammas, &truth.gamma, z)?;
        rows.push(row(Block::Gamma, Some(err), m.sd, m.rmse, m.mad));
    }
    let betas: Vec<&[f64]> = ok.iter().map(|e| e.beta.as_slice()).collect();
    let m = block_metrics(&betas, &truth.beta)?;
    rows.push(row(Block::Beta, None, m.sd, m.rmse, m.mad));
    Ok(rows)
}

/// Replications run in parallel; results are gathered by replication index, so the report
/// depends only on the configuration.
pub fn run_monte_carlo(config: &RunConfig) -> Result<MonteCarloReport> {
    config.validate()?;
    let per_rep: Vec<Vec<Result<ReplicationEstimate>>> =
        (0..config.replications).into_par_iter().map(|b| run_replication(config, b)).collect();
    let z = eval_z(config.dgp.covariate_scheme, config.dgp.d_z, config.eval_draws, config.base_seed)?;
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (k, &kind) in config.estimators.iter().enumerate() {
        let mut estimates = Vec::with_capacity(config.replications);
        for (b, rep) in per_rep.iter().enumerate() {
            match &rep[k] {
                Ok(e) => estimates.push(Some(e.clone())),
                Err(e) => {
                    failures.push(Failure { estimator: kind, replication: b, message: e.to_string() });
                    estimates.push(None);
                }
            }
        }
        rows.extend(rows_for(config, kind, &estimates, &z)?);
        runs.push(EstimatorRuns { estimator: kind, estimates });
    }
    Ok(MonteCarloReport { replications: config.replications, base_seed: config.base_seed, rows, failures, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{DgpConfig, Design};

    fn small(b: usize) -> RunConfig {
        let mut cfg = RunConfig::montecarlo(
            DgpConfig::standard(Design::One, 300, 2, 0),
            vec![EstimatorKind::FeLogit],
            b,
            42,
        );
        cfg.eval_draws = 200;
        cfg
    }

    #[test]
    fn counts_add_up() {
        let report = run_monte_carlo(&small(3)).unwrap();
        let row = report.row(EstimatorKind::FeLogit, Block::Beta).unwrap();
        assert_eq!(row.successes + row.failures, 3);
        assert_eq!(report.runs(EstimatorKind::FeLogit).unwrap().estimates.len(), 3);
    }

    #[test]
    fn single_replication_is_a_single_estimate() {
        let cfg = small(1);
        let report = run_monte_carlo(&cfg).unwrap();
        let mut dgp = cfg.dgp.clone();
        dgp.seed = replication_seed(cfg.base_seed, 0);
        let panel = simulate(&dgp).unwrap().panel;
        let direct = estimate_fe_logit(&panel, &cfg.settings.fe_logit).unwrap();
        let est = report.runs(EstimatorKind::FeLogit).unwrap().estimates[0].clone().unwrap();
        assert_eq!(est.beta, direct.beta);
        let row = report.row(EstimatorKind::FeLogit, Block::Beta).unwrap();
        assert_eq!(row.sd, 0.0);
        assert!((row.mad - (direct.beta[1] - 1.0).abs()).abs() < 1e-12);
    }

    #[test]
    fn zero_replications_rejected() {
        assert!(run_monte_carlo(&small(0)).is_err());
    }

    #[test]
    fn failures_are_counted() {
        let mut cfg = small(2);
        cfg.estimators = vec![EstimatorKind::Msm];
        cfg.settings.msm.draws = 5;
        let report = run_monte_carlo(&cfg).unwrap();
        assert_eq!(report.failures.len(), 2);
        let row = report.row(EstimatorKind::Msm, Block::Gamma).unwrap();
        assert_eq!((row.successes, row.failures), (0, 2));
    }
}
