//! Semiparametric estimator of β that assumes no bundles: only the choice-level
//! restrictions for O, A and B are used.

use serde::{Deserialize, Serialize};

use super::fe_logit::BetaEstimate;
use super::optim::{for_each_grid_point, linspace, nelder_mead, NelderMeadOptions};
use super::two_step::SearchOptions;
use crate::ccp::{CcpHyper, CcpTable};
use crate::criterion::CriterionData;
use crate::error::{Error, Result};
use crate::model::{Choice, ObservationPanel};
use crate::moments::IndexDelta;

const SINGLES: [Choice; 3] = [Choice::O, Choice::A, Choice::B];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiNoBundleOptions {
    pub ccp: CcpHyper,
    pub search: SearchOptions,
    /// Divide P(O), P(A), P(B) by 1 − P(AB) before forming differences.
    pub renormalize: bool,
}

impl Default for SemiNoBundleOptions {
    fn default() -> Self {
        SemiNoBundleOptions { ccp: CcpHyper::default(), search: SearchOptions::default(), renormalize: true }
    }
}

fn single_delta(d: &IndexDelta, c: Choice) -> f64 {
    match c {
        Choice::O => 0.0,
        Choice::A => d.d_a,
        Choice::B => d.d_b,
        Choice::AB => unreachable!(),
    }
}

/// True when some other single choice has a strictly smaller index change.
pub fn lambda_no_bundle(d: &IndexDelta, j: Choice) -> bool {
    let dj = single_delta(d, j);
    SINGLES.iter().any(|&k| k != j && dj > single_delta(d, k))
}

#[derive(Debug, Clone, Copy)]
struct Term {
    obs: usize,
    reversed: bool,
    choice: Choice,
    value: f64,
}

pub struct NoBundleCriterion<'a> {
    data: &'a CriterionData,
    terms: Vec<Term>,
}

fn restricted(p: &[f64; 4], renormalize: bool) -> [f64; 3] {
    let scale = if renormalize { 1.0 / (1.0 - p[3]).max(1e-12) } else { 1.0 };
    [p[0] * scale, p[1] * scale, p[2] * scale]
}

impl<'a> NoBundleCriterion<'a> {
    pub fn new(data: &'a CriterionData, renormalize: bool) -> NoBundleCriterion<'a> {
        let mut terms = Vec::new();
        for obs in 0..data.observations() {
            let (ps, pt) = data.probabilities(obs);
            let (qs, qt) = (restricted(ps, renormalize), restricted(pt, renormalize));
            for (k, &choice) in SINGLES.iter().enumerate() {
                let v = qs[k] - qt[k];
                if v > 0.0 {
                    terms.push(Term { obs, reversed: false, choice, value: v });
                } else if v < 0.0 {
                    terms.push(Term { obs, reversed: true, choice, value: -v });
                }
            }
        }
        NoBundleCriterion { data, terms }
    }

    pub fn evaluate(&self, beta: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut last = usize::MAX;
        let mut d = IndexDelta { d_a: 0.0, d_b: 0.0 };
        for term in &self.terms {
            if term.obs != last {
                last = term.obs;
                d = self.data.delta(term.obs, beta);
            }
            let dd = if term.reversed { d.reversed() } else { d };
            if !lambda_no_bundle(&dd, term.choice) {
                total += term.value;
            }
        }
        total / self.data.n().max(1) as f64
    }
}

fn beta_from_free(sign: f64, free: &[f64]) -> Vec<f64> {
    let mut b = vec![sign];
    b.extend_from_slice(free);
    b
}

pub fn minimize_no_bundle(crit: &NoBundleCriterion, search: &SearchOptions) -> Result<BetaEstimate> {
    let fb = crit.data.d_x() - 1;
    let mut k = search.grid_points.max(1);
    while fb > 0 && k > 2 && (k as f64).powi(fb as i32) > search.max_grid as f64 {
        k -= 1;
    }
    let axes = vec![linspace(search.lo, search.hi, k); fb];
    let mut candidates: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    let mut evaluations = 0;
    for sign in [1.0, -1.0] {
        for_each_grid_point(&axes, |_, free| {
            evaluations += 1;
            candidates.push((crit.evaluate(&beta_from_free(sign, free)), sign, free.to_vec()));
        });
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nm = NelderMeadOptions { step: search.nm_step, max_evals: search.nm_max_evals, ..NelderMeadOptions::default() };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (value, sign, free) in candidates.into_iter().take(search.restarts.max(1)) {
        let (f, x) = if free.is_empty() {
            (value, free)
        } else {
            let m = nelder_mead(|x| crit.evaluate(&beta_from_free(sign, x)), &free, &nm);
            evaluations += m.evals;
            if m.f < value {
                (m.f, m.x)
            } else {
                (value, free)
            }
        };
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, beta_from_free(sign, &x)));
        }
    }
    let (criterion, beta) = best.ok_or_else(|| Error::Estimation("empty search grid".into()))?;
    Ok(BetaEstimate { beta, criterion, evaluations })
}

pub fn estimate_semi_nobundle(panel: &ObservationPanel, opts: &SemiNoBundleOptions) -> Result<BetaEstimate> {
    let table = CcpTable::fit(panel, &opts.ccp)?;
    estimate_semi_nobundle_with(panel, &table, opts)
}

pub fn estimate_semi_nobundle_with(panel: &ObservationPanel, table: &CcpTable, opts: &SemiNoBundleOptions) -> Result<BetaEstimate> {
    let data = CriterionData::new(panel, table)?;
    minimize_no_bundle(&NoBundleCriterion::new(&data, opts.renormalize), &opts.search)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_compares_with_outside() {
        let d = IndexDelta { d_a: 0.5, d_b: 1.0 };
        assert!(lambda_no_bundle(&d, Choice::A));
        assert!(lambda_no_bundle(&d, Choice::B));
        assert!(!lambda_no_bundle(&d, Choice::O));
        let d = IndexDelta { d_a: -0.5, d_b: -1.0 };
        assert!(lambda_no_bundle(&d, Choice::O));
        assert!(!lambda_no_bundle(&d, Choice::B));
    }

    #[test]
    fn restriction_renormalizes() {
        let q = restricted(&[0.2, 0.2, 0.1, 0.5], true);
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(restricted(&[0.2, 0.2, 0.1, 0.5], false), [0.2, 0.2, 0.1]);
    }
}
