//! Monte Carlo summary statistics.

use serde::{Deserialize, Serialize};

use crate::dgp::{draw_z, CovariateScheme};
use crate::error::{Error, Result};
use crate::model::{dot, Theta};
use crate::rng;

pub const DEFAULT_EVAL_DRAWS: usize = 10_000;
const EVAL_TAG: u64 = 0x6576_616c;

/// SD, rMSE and MAD pooled over the free coordinates of one parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockMetrics {
    pub sd: f64,
    pub rmse: f64,
    pub mad: f64,
    /// Mean squared bias over the free coordinates.
    pub bias_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Beta,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub estimator: String,
    pub parameter: Block,
    pub design: u8,
    pub n: usize,
    pub t_len: usize,
    /// Sign error of z'γ; only reported for the γ block.
    pub err: Option<f64>,
    pub sd: f64,
    pub rmse: f64,
    pub mad: f64,
    pub successes: usize,
    pub failures: usize,
}

/// Coordinates 1.. of every estimate are compared with the same coordinates of the truth.
pub fn block_metrics(estimates: &[&[f64]], truth: &[f64]) -> Result<BlockMetrics> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("metrics need at least one estimate".into()));
    }
    if estimates.iter().any(|e| e.len() != truth.len()) {
        return Err(Error::Dimension("estimate and truth lengths differ".into()));
    }
    let free = truth.len().saturating_sub(1);
    if free == 0 {
        return Ok(BlockMetrics { sd: 0.0, rmse: 0.0, mad: 0.0, bias_sq: 0.0 });
    }
    let b = estimates.len() as f64;
    let (mut var, mut bias_sq, mut sq, mut abs) = (0.0, 0.0, 0.0, 0.0);
    for k in 1..truth.len() {
        let mean = estimates.iter().map(|e| e[k]).sum::<f64>() / b;
        var += estimates.iter().map(|e| (e[k] - mean).powi(2)).sum::<f64>() / b;
        bias_sq += (mean - truth[k]).powi(2);
        sq += estimates.iter().map(|e| (e[k] - truth[k]).powi(2)).sum::<f64>() / b;
        abs += estimates.iter().map(|e| (e[k] - truth[k]).abs()).sum::<f64>() / b;
    }
    let f = free as f64;
    Ok(BlockMetrics { sd: (var / f).sqrt(), rmse: (sq / f).sqrt(), mad: abs / f, bias_sq: bias_sq / f })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Fixed evaluation sample of Z from the design's law.
pub fn eval_z(scheme: CovariateScheme, d_z: usize, draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if draws == 0 {
        return Err(Error::InvalidArgument("eval_draws must be positive".into()));
    }
    let mut r = rng::seeded(rng::mix(seed, EVAL_TAG));
    Ok((0..draws).map(|_| draw_z(scheme, d_z, &mut r)).collect())
}

/// Average over estimates of the mean of |sign(z'γ₀) − sign(z'γ̂)| over the Z sample.
pub fn sign_error(gammas: &[&[f64]], truth: &[f64], z: &[Vec<f64>]) -> Result<f64> {
    if gammas.is_empty() {
        return Err(Error::InvalidArgument("metrics need at least one estimate".into()));
    }
    if z.is_empty() {
        return Err(Error::InvalidArgument("eval_draws must be positive".into()));
    }
    let truth_signs = z.iter().map(|zi| dot(zi, truth).map(sign)).collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for g in gammas {
        let mut e = 0.0;
        for (zi, s0) in z.iter().zip(&truth_signs) {
            e += (s0 - sign(dot(zi, g)?)).abs();
        }
        total += e / z.len() as f64;
    }
    Ok(total / gammas.len() as f64)
}

/// (γ metrics with Err, β metrics) for a list of full estimates.
pub fn metrics(
    estimates: &[Theta],
    truth: &Theta,
    scheme: CovariateScheme,
    eval_draws: usize,
    seed: u64,
) -> Result<(BlockMetrics, f64, BlockMetrics)> {
    let z = eval_z(scheme, truth.d_z(), eval_draws, seed)?;
    let gammas: Vec<&[f64]> = estimates.iter().map(|e| e.gamma.as_slice()).collect();
    let betas: Vec<&[f64]> = estimates.iter().map(|e| e.beta.as_slice()).collect();
    let g = block_metrics(&gammas, &truth.gamma)?;
    let err = sign_error(&gammas, &truth.gamma, &z)?;
    let b = block_metrics(&betas, &truth.beta)?;
    Ok((g, err, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_estimates_have_zero_metrics() {
        let truth = Theta { beta: vec![1.0, 1.0], gamma: vec![1.0, 1.0] };
        let (g, err, b) = metrics(&[truth.clone(), truth.clone()], &truth, CovariateScheme::Gaussian, 1000, 0).unwrap();
        assert_eq!((g.sd, g.rmse, g.mad, err), (0.0, 0.0, 0.0, 0.0));
        assert_eq!((b.sd, b.rmse, b.mad), (0.0, 0.0, 0.0));
    }

    #[test]
    fn one_coordinate_off_by_one() {
        let m = block_metrics(&[&[1.0, 2.0]], &[1.0, 1.0]).unwrap();
        assert_eq!((m.rmse, m.mad, m.sd), (1.0, 1.0, 0.0));
    }

    #[test]
    fn zero_draws_is_error() {
        assert!(eval_z(CovariateScheme::Gaussian, 2, 0, 0).is_err());
        assert!(sign_error(&[&[1.0, 1.0]], &[1.0, 1.0], &[]).is_err());
    }

    #[test]
    fn negated_gamma_flips_every_nonzero_sign() {
        let z = eval_z(CovariateScheme::Gaussian, 2, 10_000, 3).unwrap();
        let err = sign_error(&[&[-1.0, -1.0]], &[1.0, 1.0], &z).unwrap();
        assert_abs_diff_eq!(err, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sign_error_matches_flip_probability() {
        // Z1 ~ N(2, 2), Z2 ~ N(0, 1); with γ̂ = (1, -1) the signs of Z1 + Z2 and Z1 − Z2 differ
        // with probability P(|Z2| > |Z1|), estimated here by an independent simulation.
        let z = eval_z(CovariateScheme::Gaussian, 2, 10_000, 11).unwrap();
        let err = sign_error(&[&[1.0, -1.0]], &[1.0, 1.0], &z).unwrap();
        let mut r = rng::seeded(99);
        let m = 200_000;
        let flips = (0..m)
            .filter(|_| {
                let zz = draw_z(CovariateScheme::Gaussian, 2, &mut r);
                zz[1].abs() > zz[0].abs()
            })
            .count();
        assert_abs_diff_eq!(err, 2.0 * flips as f64 / m as f64, epsilon = 0.03);
    }

    proptest! {
        #[test]
        fn rmse_decomposes(values in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 1..20)) {
            let est: Vec<Vec<f64>> = values.iter().map(|&(a, b, c)| vec![1.0, a, b + c]).collect();
            let refs: Vec<&[f64]> = est.iter().map(|e| e.as_slice()).collect();
            let m = block_metrics(&refs, &[1.0, 0.5, -0.5]).unwrap();
            prop_assert!((m.rmse.powi(2) - m.sd.powi(2) - m.bias_sq).abs() < 1e-9);
            prop_assert!(m.sd >= 0.0 && m.mad >= 0.0);
        }
    }
}
