//! Sign tests for complementarity and substitutability, the demand-based substitution sign
//! s_AB, and bounds on the share of individuals for whom the goods are complements.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::ccp::{conditioning_vector, fit_all_pairs, period_pairs, CcpHyper, CcpModel, CcpTable};
use crate::error::{Error, Result};
use crate::model::{Choice, ChoiceSet, Good, ObservationPanel};
use crate::rng;

const BOOTSTRAP_TAG: u64 = 0x626f_6f74;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum XiKind {
    /// A, B and AB all weakly more likely in s than in t.
    Both,
    /// A, AB and O all weakly more likely in s than in t.
    AUpBDown,
}

pub fn xi_indicator(p_s: &[f64; 4], p_t: &[f64; 4], kind: XiKind) -> bool {
    let set = match kind {
        XiKind::Both => [Choice::A, Choice::B, Choice::AB],
        XiKind::AUpBDown => [Choice::A, Choice::AB, Choice::O],
    };
    set.iter().all(|c| p_s[c.index()] - p_t[c.index()] >= 0.0)
}

/// Restricts the sample to individuals whose z lies in every listed interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ZCell {
    pub bounds: Vec<ZBound>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZBound {
    pub coordinate: usize,
    pub lo: f64,
    pub hi: f64,
}

impl ZCell {
    pub fn all() -> ZCell {
        ZCell::default()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.bounds.iter().all(|b| z.get(b.coordinate).is_some_and(|&v| b.lo <= v && v <= b.hi))
    }

    pub fn select(&self, panel: &ObservationPanel) -> Result<ObservationPanel> {
        if let Some(b) = self.bounds.iter().find(|b| b.coordinate >= panel.d_z()) {
            return Err(Error::Dimension(format!("z cell uses coordinate {} but d_z = {}", b.coordinate, panel.d_z())));
        }
        let ids: Vec<usize> = (0..panel.n()).filter(|&i| self.contains(panel.z(i))).collect();
        if ids.is_empty() {
            return Err(Error::InsufficientData("z cell selects no individuals".into()));
        }
        panel.subset(&ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    Complements,
    Substitutes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub alpha: f64,
    pub bootstrap_draws: usize,
    pub seed: u64,
    /// Moments gated on fewer observations are dropped.
    pub min_gated: usize,
    pub ccp: CcpHyper,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions { alpha: 0.05, bootstrap_draws: 200, seed: 0, min_gated: 10, ccp: CcpHyper::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub hypothesis: Hypothesis,
    pub statistic: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub reject: bool,
    /// Individual-pair observations where the gating indicator fired.
    pub cells_used: usize,
    pub moments_used: usize,
    pub seed: u64,
}

/// Gated moment values g_im ≥ 0 under the null, one column per moment.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedMoments {
    pub n: usize,
    /// moment-major: values[m][i]
    pub values: Vec<Vec<f64>>,
    pub gated: Vec<usize>,
}

fn demand_change(panel: &ObservationPanel, i: usize, s: usize, t: usize, good: Good) -> f64 {
    let set = ChoiceSet::demand(good);
    let a = set.contains(panel.y(i, s)) as u8 as f64;
    let b = set.contains(panel.y(i, t)) as u8 as f64;
    a - b
}

/// Builds the gated moments for a hypothesis from CCPs and outcomes of the same individuals.
pub fn gated_moments(panel: &ObservationPanel, table: &CcpTable, hypothesis: Hypothesis) -> Result<GatedMoments> {
    if table.n != panel.n() {
        return Err(Error::Dimension("CCP table and panel cover different individuals".into()));
    }
    let (kind, signs) = match hypothesis {
        Hypothesis::Complements => (XiKind::Both, [1.0, 1.0]),
        Hypothesis::Substitutes => (XiKind::AUpBDown, [1.0, -1.0]),
    };
    let mut values = Vec::new();
    let mut gated = Vec::new();
    for (s0, t0) in period_pairs(panel.t_len()) {
        let pair = table.pair(s0, t0).ok_or_else(|| Error::InvalidArgument(format!("no CCPs for ({s0}, {t0})")))?;
        for reversed in [false, true] {
            let (s, t) = if reversed { (t0, s0) } else { (s0, t0) };
            let xi: Vec<bool> = (0..panel.n())
                .map(|i| {
                    let (ps, pt) = if reversed { (&pair.p_t[i], &pair.p_s[i]) } else { (&pair.p_s[i], &pair.p_t[i]) };
                    xi_indicator(ps, pt, kind)
                })
                .collect();
            let count = xi.iter().filter(|&&x| x).count();
            for good in Good::BOTH {
                let sign = signs[good.index()];
                let col = (0..panel.n())
                    .map(|i| if xi[i] { sign * demand_change(panel, i, s, t, good) } else { 0.0 })
                    .collect();
                values.push(col);
                gated.push(count);
            }
        }
    }
    Ok(GatedMoments { n: panel.n(), values, gated })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Max studentized violation with a Rademacher multiplier bootstrap at the least favorable null.
pub fn moment_test(moments: &GatedMoments, alpha: f64, draws: usize, min_gated: usize, seed: u64) -> (f64, f64, usize, usize) {
    let n = moments.n;
    let mut used = Vec::new();
    let mut cells = 0;
    for (m, col) in moments.values.iter().enumerate() {
        if moments.gated[m] < min_gated.max(1) {
            continue;
        }
        let (mean, sd) = mean_sd(col);
        if sd > 0.0 {
            used.push((m, mean, sd));
            cells += moments.gated[m];
        }
    }
    if used.is_empty() || n == 0 {
        return (0.0, 0.0, 0, 0);
    }
    let root_n = (n as f64).sqrt();
    let statistic = used.iter().map(|&(_, mean, sd)| root_n * (-mean).max(0.0) / sd).fold(0.0, f64::max);
    let mut r = rng::seeded(rng::mix(seed, BOOTSTRAP_TAG));
    let mut boot = Vec::with_capacity(draws);
    let mut e = vec![0.0; n];
    for _ in 0..draws {
        e.iter_mut().for_each(|v| *v = if r.random::<bool>() { 1.0 } else { -1.0 });
        let mut t: f64 = 0.0;
        for &(m, mean, sd) in &used {
            let col = &moments.values[m];
            let s: f64 = col.iter().zip(&e).map(|(g, w)| w * (g - mean)).sum();
            t = t.max((-s / root_n).max(0.0) / sd);
        }
        boot.push(t);
    }
    boot.sort_by(f64::total_cmp);
    let critical = if boot.is_empty() {
        f64::INFINITY
    } else {
        let k = (((1.0 - alpha) * boot.len() as f64).ceil() as usize).clamp(1, boot.len());
        boot[k - 1]
    };
    (statistic, critical, cells, used.len())
}

/// Splits individuals into alternating halves: CCPs are fitted on the first, moments use the second.
fn split(panel: &ObservationPanel) -> Result<(ObservationPanel, ObservationPanel)> {
    let fit: Vec<usize> = (0..panel.n()).step_by(2).collect();
    let eval: Vec<usize> = (1..panel.n()).step_by(2).collect();
    Ok((panel.subset(&fit)?, panel.subset(&eval)?))
}

fn run_test(panel: &ObservationPanel, cell: &ZCell, opts: &TestOptions, hypothesis: Hypothesis) -> Result<TestResult> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", opts.alpha)));
    }
    let sub = cell.select(panel)?;
    let (fit_half, eval_half) = split(&sub)?;
    let models = fit_all_pairs(&fit_half, &opts.ccp.clone().with_seed(opts.seed))?;
    let table = CcpTable::predict(&models, &eval_half)?;
    let moments = gated_moments(&eval_half, &table, hypothesis)?;
    let (statistic, critical_value, cells_used, moments_used) =
        moment_test(&moments, opts.alpha, opts.bootstrap_draws, opts.min_gated, opts.seed);
    Ok(TestResult {
        hypothesis,
        statistic,
        critical_value,
        alpha: opts.alpha,
        reject: moments_used > 0 && statistic > critical_value,
        cells_used,
        moments_used,
        seed: opts.seed,
    })
}

/// H₀: Γ(z) ≥ 0 on the cell.
pub fn test_complementarity(panel: &ObservationPanel, cell: &ZCell, opts: &TestOptions) -> Result<TestResult> {
    run_test(panel, cell, opts, Hypothesis::Complements)
}

/// H₀: Γ(z) ≤ 0 on the cell.
pub fn test_substitutability(panel: &ObservationPanel, cell: &ZCell, opts: &TestOptions) -> Result<TestResult> {
    run_test(panel, cell, opts, Hypothesis::Substitutes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionSign {
    pub sign: i8,
    /// Mean derivative of the fitted demand for A in the chosen coordinate of x_B.
    pub slope: f64,
    pub std_error: f64,
    pub no_variation: bool,
}

/// Sign of ∂P(Y ∈ D_A)/∂x_B[k], from the fitted CCPs at the observed covariates.
pub fn estimate_s_ab(panel: &ObservationPanel, cell: &ZCell, coordinate: usize, hyper: &CcpHyper) -> Result<SubstitutionSign> {
    if coordinate >= panel.d_x() {
        return Err(Error::Dimension(format!("coordinate {coordinate} out of range for d_x = {}", panel.d_x())));
    }
    let sub = cell.select(panel)?;
    let values: Vec<f64> = (0..sub.n())
        .flat_map(|i| (0..sub.t_len()).map(move |t| (i, t)))
        .map(|(i, t)| sub.x(i, t, Good::B)[coordinate])
        .collect();
    let (_, sd) = mean_sd(&values);
    let varies = (0..sub.n()).any(|i| {
        let v0 = sub.x(i, 0, Good::B)[coordinate];
        (1..sub.t_len()).any(|t| sub.x(i, t, Good::B)[coordinate] != v0)
    });
    if !varies || sd == 0.0 {
        return Ok(SubstitutionSign { sign: 0, slope: 0.0, std_error: 0.0, no_variation: true });
    }
    let models = fit_all_pairs(&sub, hyper)?;
    let h = 0.1 * sd;
    let d_x = sub.d_x();
    let mut per_person = Vec::with_capacity(sub.n());
    let mut w = Vec::new();
    for i in 0..sub.n() {
        let mut acc = 0.0;
        let mut k = 0;
        for m in &models {
            conditioning_vector(&sub, i, m.s, m.t, &mut w);
            for (period, offset) in [(0, d_x), (1, 3 * d_x)] {
                acc += demand_slope(m, &w, period, offset + coordinate, h)?;
                k += 1;
            }
        }
        per_person.push(acc / k as f64);
    }
    let (slope, sd_p) = mean_sd(&per_person);
    let std_error = sd_p / (per_person.len() as f64).sqrt();
    let sign = if slope.abs() > 2.0 * std_error && slope.abs() > 1e-12 { if slope > 0.0 { 1 } else { -1 } } else { 0 };
    Ok(SubstitutionSign { sign, slope, std_error, no_variation: false })
}

fn demand_slope(model: &CcpModel, w: &[f64], period: usize, index: usize, h: f64) -> Result<f64> {
    let mut up = w.to_vec();
    let mut down = w.to_vec();
    up[index] += h;
    down[index] -= h;
    let d = ChoiceSet::D_A;
    Ok((d.mass(&model.predict(&up)?[period]) - d.mass(&model.predict(&down)?[period])) / (2.0 * h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaBounds {
    pub lower: f64,
    pub upper: f64,
    /// No qualifying cell for that side; the bound is at its vacuous value.
    pub lower_trivial: bool,
    pub upper_trivial: bool,
    /// Lower bound exceeds the upper bound: evidence against the model.
    pub inverted: bool,
    pub lower_cells: usize,
    pub upper_cells: usize,
}

/// Plug-in bounds from CCPs at the observed covariate pairs.
pub fn eta_bounds_from_table(table: &CcpTable) -> EtaBounds {
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let (mut lower_cells, mut upper_cells) = (0, 0);
    let (da, db) = (ChoiceSet::D_A, ChoiceSet::D_B);
    for pair in &table.pairs {
        for i in 0..table.n {
            for (ps, pt) in [(&pair.p_s[i], &pair.p_t[i]), (&pair.p_t[i], &pair.p_s[i])] {
                let change = [da.mass(ps) - da.mass(pt), db.mass(ps) - db.mass(pt)];
                if xi_indicator(ps, pt, XiKind::AUpBDown) {
                    lower_cells += 1;
                    lower = lower.max(-change[0]).max(change[1]);
                }
                if xi_indicator(ps, pt, XiKind::Both) {
                    upper_cells += 1;
                    upper = upper.min(change[0] + 1.0).min(change[1] + 1.0);
                }
            }
        }
    }
    let lower_trivial = lower_cells == 0;
    let upper_trivial = upper_cells == 0;
    let lower = if lower_trivial { 0.0 } else { lower.clamp(0.0, 1.0) };
    let upper = if upper_trivial { 1.0 } else { upper.clamp(0.0, 1.0) };
    EtaBounds { lower, upper, lower_trivial, upper_trivial, inverted: lower > upper, lower_cells, upper_cells }
}

pub fn eta_bounds(panel: &ObservationPanel, hyper: &CcpHyper) -> Result<EtaBounds> {
    Ok(eta_bounds_from_table(&CcpTable::fit(panel, hyper)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccp::PairPredictions;
    use proptest::prelude::*;

    #[test]
    fn xi_examples() {
        let p = [0.25; 4];
        assert!(xi_indicator(&p, &p, XiKind::Both));
        assert!(xi_indicator(&p, &p, XiKind::AUpBDown));
        let ps = [0.1, 0.3, 0.3, 0.3];
        let pt = [0.4, 0.2, 0.2, 0.2];
        assert!(xi_indicator(&ps, &pt, XiKind::Both));
        let ps = [0.3, 0.3, 0.1, 0.3];
        let pt = [0.2, 0.2, 0.4, 0.2];
        assert!(!xi_indicator(&ps, &pt, XiKind::Both));
        assert!(xi_indicator(&ps, &pt, XiKind::AUpBDown));
    }

    fn table(rows: Vec<([f64; 4], [f64; 4])>) -> CcpTable {
        let n = rows.len();
        let (p_s, p_t) = rows.into_iter().unzip();
        CcpTable::from_pairs(n, vec![PairPredictions { s: 0, t: 1, p_s, p_t }]).unwrap()
    }

    #[test]
    fn vacuous_bounds_without_cells() {
        // B up and A down in one direction, the reverse in the other: neither ξ fires both ways
        let b = eta_bounds_from_table(&table(vec![([0.3, 0.1, 0.4, 0.2], [0.2, 0.3, 0.3, 0.2])]));
        assert_eq!((b.lower, b.upper), (0.0, 1.0));
        assert!(b.lower_trivial && b.upper_trivial && !b.inverted);
    }

    #[test]
    fn bounds_from_demand_changes() {
        let ps = [0.3, 0.3, 0.1, 0.3];
        let pt = [0.2, 0.2, 0.4, 0.2];
        let b = eta_bounds_from_table(&table(vec![(ps, pt)]));
        assert!(!b.lower_trivial && b.upper_trivial);
        assert_eq!(b.lower, 0.0);
    }

    fn simplex() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(0.01f64..1.0).prop_map(|w| {
            let s: f64 = w.iter().sum();
            w.map(|v| v / s)
        })
    }

    proptest! {
        // by adding up, gated demand changes always have the sign the null predicts
        #[test]
        fn gated_demand_changes_are_signed(ps in simplex(), pt in simplex()) {
            let (da, db) = (ChoiceSet::D_A, ChoiceSet::D_B);
            if xi_indicator(&ps, &pt, XiKind::Both) {
                prop_assert!(da.mass(&ps) - da.mass(&pt) >= -1e-12);
                prop_assert!(db.mass(&ps) - db.mass(&pt) >= -1e-12);
            }
            if xi_indicator(&ps, &pt, XiKind::AUpBDown) {
                prop_assert!(da.mass(&ps) - da.mass(&pt) >= -1e-12);
                prop_assert!(db.mass(&ps) - db.mass(&pt) <= 1e-12);
            }
        }
    }

    #[test]
    fn adding_cells_tightens() {
        let rows = vec![([0.25, 0.25, 0.2, 0.3], [0.2, 0.2, 0.35, 0.25])];
        let one = eta_bounds_from_table(&table(rows.clone()));
        let mut more = rows;
        more.push(([0.3, 0.2, 0.1, 0.4], [0.25, 0.1, 0.5, 0.15]));
        let two = eta_bounds_from_table(&table(more));
        assert!(two.lower >= one.lower && two.upper <= one.upper);
    }

    #[test]
    fn no_gating_means_zero_statistic() {
        let m = GatedMoments { n: 50, values: vec![vec![0.0; 50]; 4], gated: vec![0; 4] };
        let (stat, _, cells, used) = moment_test(&m, 0.05, 200, 10, 1);
        assert_eq!((stat, cells, used), (0.0, 0, 0));
    }

    #[test]
    fn clear_violation_is_detected() {
        let n = 400;
        let col: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { 0.0 } else { -1.0 }).collect();
        let m = GatedMoments { n, values: vec![col], gated: vec![n] };
        let (stat, crit, _, used) = moment_test(&m, 0.05, 200, 10, 2);
        assert_eq!(used, 1);
        assert!(stat > crit);
    }
}
