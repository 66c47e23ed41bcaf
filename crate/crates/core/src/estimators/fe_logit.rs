//! Conditional fixed-effect multinomial logit over {O, A, B}, ignoring bundles.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Choice, Good, ObservationPanel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    /// Normalized so that |β₁| = 1.
    pub beta: Vec<f64>,
    pub criterion: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeLogitOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FeLogitOptions {
    fn default() -> Self {
        FeLogitOptions { max_iter: 100, tol: 1e-10 }
    }
}

/// One informative individual: the covariate sum of every distinct ordering and which one was observed.
struct Group {
    sums: Vec<Vec<f64>>,
    observed: usize,
}

fn next_permutation(v: &mut [u8]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn covariate_sum(panel: &ObservationPanel, i: usize, seq: &[u8]) -> Vec<f64> {
    let mut s = vec![0.0; panel.d_x()];
    for (t, &c) in seq.iter().enumerate() {
        let good = match c {
            1 => Good::A,
            2 => Good::B,
            _ => continue,
        };
        for (acc, x) in s.iter_mut().zip(panel.x(i, t, good)) {
            *acc += x;
        }
    }
    s
}

fn groups(panel: &ObservationPanel) -> Vec<Group> {
    let mut out = Vec::new();
    for i in 0..panel.n() {
        let seq: Vec<Choice> = (0..panel.t_len()).map(|t| panel.y(i, t)).collect();
        if seq.contains(&Choice::AB) || seq.iter().all(|&c| c == seq[0]) {
            continue;
        }
        let observed_seq: Vec<u8> = seq.iter().map(|c| c.index() as u8).collect();
        let mut perm = observed_seq.clone();
        perm.sort_unstable();
        let mut sums = Vec::new();
        let mut observed = 0;
        loop {
            if perm == observed_seq {
                observed = sums.len();
            }
            sums.push(covariate_sum(panel, i, &perm));
            if !next_permutation(&mut perm) {
                break;
            }
        }
        out.push(Group { sums, observed });
    }
    out
}

/// Conditional log-likelihood with gradient and Hessian.
fn loglik(groups: &[Group], beta: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
    let d = beta.len();
    let mut ll = 0.0;
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    for g in groups {
        let scores: Vec<f64> = g.sums.iter().map(|s| s.iter().zip(beta.iter()).map(|(a, b)| a * b).sum()).collect();
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let total: f64 = w.iter().sum();
        ll += scores[g.observed] - m - total.ln();
        let mut mean = DVector::zeros(d);
        for (s, wk) in g.sums.iter().zip(&w) {
            mean += DVector::from_column_slice(s) * (wk / total);
        }
        grad += DVector::from_column_slice(&g.sums[g.observed]) - &mean;
        for (s, wk) in g.sums.iter().zip(&w) {
            let c = DVector::from_column_slice(s) - &mean;
            hess -= &c * c.transpose() * (wk / total);
        }
    }
    (ll, grad, hess)
}

pub fn estimate_fe_logit(panel: &ObservationPanel, opts: &FeLogitOptions) -> Result<BetaEstimate> {
    let groups = groups(panel);
    if groups.is_empty() {
        return Err(Error::Estimation("no individual switches among O, A, B".into()));
    }
    let d = panel.d_x();
    let mut beta = DVector::zeros(d);
    let (mut ll, mut grad, mut hess) = loglik(&groups, &beta);
    let mut evaluations = 1;
    for _ in 0..opts.max_iter {
        let neg = -&hess + DMatrix::identity(d, d) * 1e-10;
        let step = match neg.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand = &beta + &step * t;
            let (l2, g2, h2) = loglik(&groups, &cand);
            evaluations += 1;
            if l2.is_finite() && l2 >= ll {
                let gain = l2 - ll;
                beta = cand;
                ll = l2;
                grad = g2;
                hess = h2;
                accepted = gain > opts.tol || grad.amax() > opts.tol;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let scale = beta[0].abs();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Estimation("first coefficient estimated as zero".into()));
    }
    Ok(BetaEstimate { beta: beta.iter().map(|b| b / scale).collect(), criterion: -ll, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate, DgpConfig, Design};

    #[test]
    fn permutations_of_multiset() {
        let mut v = vec![0u8, 1, 1];
        let mut seen = vec![v.clone()];
        while next_permutation(&mut v) {
            seen.push(v.clone());
        }
        assert_eq!(seen, vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let sim = simulate(&DgpConfig::standard(Design::One, 300, 3, 2)).unwrap();
        let g = groups(&sim.panel);
        let beta = DVector::from_vec(vec![0.7, 1.2]);
        let (l0, grad, hess) = loglik(&g, &beta);
        for k in 0..2 {
            let mut b = beta.clone();
            b[k] += 1e-6;
            let (l1, g1, _) = loglik(&g, &b);
            assert!(((l1 - l0) / 1e-6 - grad[k]).abs() < 1e-3 * (1.0 + grad[k].abs()));
            for j in 0..2 {
                assert!(((g1[j] - grad[j]) / 1e-6 - hess[(j, k)]).abs() < 1e-3 * (1.0 + hess[(j, k)].abs()));
            }
        }
    }

    #[test]
    fn no_switchers_is_error() {
        let sim = simulate(&DgpConfig::standard(Design::One, 20, 2, 3)).unwrap();
        let y = vec![Choice::A; 40];
        let panel = sim.panel.with_choices(y).unwrap();
        assert!(matches!(estimate_fe_logit(&panel, &FeLogitOptions::default()), Err(Error::Estimation(_))));
    }
}
