//! Two-step estimator: first-step CCPs, then minimization of Ω̂_N over normalized θ.

use serde::{Deserialize, Serialize};

use super::optim::{for_each_grid_point, linspace, nelder_mead, NelderMeadOptions};
use crate::ccp::{CcpHyper, CcpTable};
use crate::criterion::CriterionData;
use crate::error::{Error, Result};
use crate::model::{ObservationPanel, Theta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub theta: Theta,
    pub criterion: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub lo: f64,
    pub hi: f64,
    pub grid_points: usize,
    /// Upper bound on grid evaluations per sign combination; axes are thinned to respect it.
    pub max_grid: usize,
    pub restarts: usize,
    pub nm_step: f64,
    pub nm_max_evals: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            lo: -5.0,
            hi: 5.0,
            grid_points: 41,
            max_grid: 200_000,
            restarts: 5,
            nm_step: 0.25,
            nm_max_evals: 400,
        }
    }
}

impl SearchOptions {
    fn axis_points(&self, dims: usize) -> usize {
        let mut k = self.grid_points.max(1);
        while dims > 0 && k > 2 && (k as f64).powi(dims as i32) > self.max_grid as f64 {
            k -= 1;
        }
        k
    }

    fn nm(&self) -> NelderMeadOptions {
        NelderMeadOptions { step: self.nm_step, max_evals: self.nm_max_evals, ..NelderMeadOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TwoStepOptions {
    pub ccp: CcpHyper,
    pub search: SearchOptions,
}

pub const SIGN_COMBOS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

#[derive(Debug, Clone)]
struct Candidate {
    value: f64,
    signs: (f64, f64),
    free: Vec<f64>,
}

/// Minimizes Ω̂_N over the free coordinates for each sign combination of (β₁, γ₁).
pub fn minimize_criterion(data: &CriterionData, search: &SearchOptions) -> Result<PointEstimate> {
    let (fb, fg) = (data.d_x() - 1, data.d_z() - 1);
    let k = search.axis_points(fb + fg);
    let axis = linspace(search.lo, search.hi, k);
    let beta_axes = vec![axis.clone(); fb];
    let gamma_axes = vec![axis; fg];
    let mut evaluations = 0;
    let mut candidates = Vec::new();
    for sb in [1.0, -1.0] {
        for_each_grid_point(&beta_axes, |_, bfree| {
            let theta_b = Theta::from_free(sb, bfree, 1.0, &[]);
            let cache = data.beta_cache(&theta_b.beta);
            for sg in [1.0, -1.0] {
                for_each_grid_point(&gamma_axes, |_, gfree| {
                    let gamma = Theta::from_free(1.0, &[], sg, gfree).gamma;
                    let value = data.evaluate_cached(&cache, &gamma);
                    evaluations += 1;
                    let mut free = bfree.to_vec();
                    free.extend_from_slice(gfree);
                    candidates.push(Candidate { value, signs: (sb, sg), free });
                });
            }
        });
    }
    // stable: equal values keep grid order
    candidates.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut starts: Vec<Candidate> = Vec::new();
    for c in candidates {
        if starts.len() >= search.restarts.max(1) {
            break;
        }
        if !starts.iter().any(|s| s.signs == c.signs && s.free == c.free) {
            starts.push(c);
        }
    }

    let mut best: Option<(f64, Theta)> = None;
    for start in &starts {
        let (sb, sg) = start.signs;
        let objective = |x: &[f64]| {
            let theta = Theta::from_free(sb, &x[..fb], sg, &x[fb..]);
            data.evaluate(&theta).unwrap_or(f64::INFINITY)
        };
        let (x, f) = if start.free.is_empty() {
            (vec![], start.value)
        } else {
            let m = nelder_mead(objective, &start.free, &search.nm());
            evaluations += m.evals;
            if m.f < start.value {
                (m.x, m.f)
            } else {
                (start.free.clone(), start.value)
            }
        };
        let theta = Theta::from_free(sb, &x[..fb], sg, &x[fb..]);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, theta));
        }
    }
    let (criterion, theta) = best.ok_or_else(|| Error::Estimation("empty search grid".into()))?;
    Ok(PointEstimate { theta, criterion, evaluations })
}

pub fn estimate_two_step(panel: &ObservationPanel, opts: &TwoStepOptions) -> Result<PointEstimate> {
    let table = CcpTable::fit(panel, &opts.ccp)?;
    estimate_two_step_with(panel, &table, &opts.search)
}

/// Second step only, with CCPs already fitted.
pub fn estimate_two_step_with(panel: &ObservationPanel, table: &CcpTable, search: &SearchOptions) -> Result<PointEstimate> {
    let data = CriterionData::new(panel, table)?;
    minimize_criterion(&data, search)
}
