//! Grid-based set estimator: the level set {θ : Ω̂_N(θ) ≤ min Ω̂_N + ĉ_N / a_N}.

use serde::{Deserialize, Serialize};

use super::optim::{for_each_grid_point, linspace};
use super::two_step::SIGN_COMBOS;
use crate::ccp::{CcpHyper, CcpTable};
use crate::criterion::CriterionData;
use crate::error::{Error, Result};
use crate::model::{ObservationPanel, Theta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    /// Number of subintervals; the axis has `intervals + 1` points.
    pub intervals: usize,
}

impl AxisSpec {
    pub fn points(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.intervals + 1)
    }
}

impl Default for AxisSpec {
    fn default() -> Self {
        AxisSpec { lo: -5.0, hi: 5.0, intervals: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Free β coordinates followed by free γ coordinates.
    pub axes: Vec<AxisSpec>,
    /// Overrides ĉ_N when set.
    pub c_hat: Option<f64>,
}

impl GridSpec {
    pub fn standard(d_x: usize, d_z: usize) -> GridSpec {
        GridSpec { axes: vec![AxisSpec::default(); d_x + d_z - 2], c_hat: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEstimate {
    pub grid: GridSpec,
    pub free_beta: usize,
    /// Grid points in sign-major order, each sign combination covering the full product grid.
    pub accepted: Vec<bool>,
    pub c_hat: f64,
    pub a_n: f64,
    pub min_value: f64,
    pub threshold: f64,
    /// Per sign combination: coordinate-wise (min, max) of accepted free coordinates, if any.
    pub bounds: Vec<Option<Vec<(f64, f64)>>>,
}

pub fn c_hat(n: usize) -> f64 {
    1e-4 * (n as f64).ln()
}

pub fn a_n(n: usize) -> f64 {
    (n as f64).powf(0.25)
}

impl SetEstimate {
    pub fn accepted_count(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }

    /// Accepted points as normalized parameters.
    pub fn accepted_thetas(&self) -> Vec<Theta> {
        let axes: Vec<Vec<f64>> = self.grid.axes.iter().map(|a| a.points()).collect();
        let per_sign = self.accepted.len() / SIGN_COMBOS.len();
        let mut out = Vec::new();
        for (s, &(sb, sg)) in SIGN_COMBOS.iter().enumerate() {
            for_each_grid_point(&axes, |k, p| {
                if self.accepted[s * per_sign + k] {
                    out.push(Theta::from_free(sb, &p[..self.free_beta], sg, &p[self.free_beta..]));
                }
            });
        }
        out
    }

    /// θ lies in the coordinate-wise hull of accepted points sharing its leading signs.
    pub fn contains(&self, theta: &Theta) -> bool {
        let Ok(t) = theta.normalized() else { return false };
        let signs = (t.beta[0], t.gamma[0]);
        let Some(s) = SIGN_COMBOS.iter().position(|&c| c == signs) else { return false };
        let Some(bounds) = &self.bounds[s] else { return false };
        let free: Vec<f64> = t.beta[1..].iter().chain(&t.gamma[1..]).copied().collect();
        free.len() == bounds.len() && free.iter().zip(bounds).all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }
}

pub fn estimate_set_with(data: &CriterionData, grid: &GridSpec) -> Result<SetEstimate> {
    let fb = data.d_x() - 1;
    let fg = data.d_z() - 1;
    if grid.axes.len() != fb + fg {
        return Err(Error::Dimension(format!("grid has {} axes, expected {}", grid.axes.len(), fb + fg)));
    }
    for a in &grid.axes {
        if !(a.lo <= a.hi) || !a.lo.is_finite() || !a.hi.is_finite() {
            return Err(Error::InvalidArgument("grid axis bounds must be finite with lo <= hi".into()));
        }
    }
    let axes: Vec<Vec<f64>> = grid.axes.iter().map(|a| a.points()).collect();
    let (beta_axes, gamma_axes) = axes.split_at(fb);
    let gamma_count: usize = gamma_axes.iter().map(|a| a.len()).product();
    let per_sign: usize = axes.iter().map(|a| a.len()).product();
    if per_sign == 0 {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let mut values = vec![f64::INFINITY; per_sign * SIGN_COMBOS.len()];
    for sb in [1.0, -1.0] {
        for_each_grid_point(beta_axes, |bk, bfree| {
            let beta = Theta::from_free(sb, bfree, 1.0, &[]).beta;
            let cache = data.beta_cache(&beta);
            for sg in [1.0, -1.0] {
                let s = SIGN_COMBOS.iter().position(|&c| c == (sb, sg)).unwrap();
                for_each_grid_point(gamma_axes, |gk, gfree| {
                    let gamma = Theta::from_free(1.0, &[], sg, gfree).gamma;
                    values[s * per_sign + bk * gamma_count + gk] = data.evaluate_cached(&cache, &gamma);
                });
            }
        });
    }
    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let n = data.n();
    let c = grid.c_hat.unwrap_or_else(|| c_hat(n));
    let a = a_n(n);
    let threshold = min_value + c / a;
    let accepted: Vec<bool> = values.iter().map(|&v| v <= threshold).collect();
    let mut bounds: Vec<Option<Vec<(f64, f64)>>> = vec![None; SIGN_COMBOS.len()];
    for (s, b) in bounds.iter_mut().enumerate() {
        for_each_grid_point(&axes, |k, p| {
            if accepted[s * per_sign + k] {
                let entry = b.get_or_insert_with(|| p.iter().map(|&v| (v, v)).collect());
                for (e, &v) in entry.iter_mut().zip(p) {
                    e.0 = e.0.min(v);
                    e.1 = e.1.max(v);
                }
            }
        });
    }
    Ok(SetEstimate { grid: grid.clone(), free_beta: fb, accepted, c_hat: c, a_n: a, min_value, threshold, bounds })
}

pub fn estimate_set(panel: &ObservationPanel, grid: &GridSpec, ccp: &CcpHyper) -> Result<SetEstimate> {
    let table = CcpTable::fit(panel, ccp)?;
    estimate_set_from_table(panel, &table, grid)
}

pub fn estimate_set_from_table(panel: &ObservationPanel, table: &CcpTable, grid: &GridSpec) -> Result<SetEstimate> {
    estimate_set_with(&CriterionData::new(panel, table)?, grid)
}
