//! Sample criterion Ω̂_N(θ): mean over individuals of the L1 positive part of the
//! gated moments, summed over all ordered period pairs.

use crate::ccp::{period_pairs, CcpTable};
use crate::error::{Error, Result};
use crate::model::{dot_unchecked, Choice, ChoiceSet, Good, ObservationPanel, Theta};
use crate::moments::{lambda_id1, lambda_id2, lambda_id3, moment_at, IndexDelta};

/// Positive part of the four choice-level moments; depends on β only.
#[inline]
pub fn choice_part(p_s: &[f64; 4], p_t: &[f64; 4], d: &IndexDelta) -> f64 {
    let mut acc = 0.0;
    for j in Choice::ALL {
        let v = p_s[j.index()] - p_t[j.index()];
        if v > 0.0 && !lambda_id1(d, j) {
            acc += v;
        }
    }
    acc
}

/// Positive part of the demand and sum moments.
#[inline]
pub fn complementarity_part(p_s: &[f64; 4], p_t: &[f64; 4], d: &IndexDelta, g: f64) -> f64 {
    let mut acc = 0.0;
    for good in Good::BOTH {
        let set = ChoiceSet::demand(good);
        let v = set.mass(p_s) - set.mass(p_t);
        if v > 0.0 && !lambda_id2(d, g, good) {
            acc += v;
        }
    }
    let vl = p_s[3] + p_t[0] - 1.0;
    let vu = p_s[1] + p_t[2] - 1.0;
    if vl > 0.0 || vu > 0.0 {
        let (l, u) = lambda_id3(d, g);
        if vl > 0.0 && !l {
            acc += vl;
        }
        if vu > 0.0 && !u {
            acc += vu;
        }
    }
    acc
}

/// Precomputed covariate differences and CCPs for repeated criterion evaluation.
#[derive(Debug, Clone)]
pub struct CriterionData {
    n: usize,
    d_x: usize,
    d_z: usize,
    // per observation (i, unordered pair): x_s - x_t for A then B
    dx: Vec<f64>,
    z: Vec<f64>,
    p_s: Vec<[f64; 4]>,
    p_t: Vec<[f64; 4]>,
    // positive ungated moment values; only these can contribute
    choice_terms: Vec<ChoiceTerm>,
    gamma_terms: Vec<GammaTerm>,
}

#[derive(Debug, Clone, Copy)]
struct ChoiceTerm {
    obs: u32,
    reversed: bool,
    choice: Choice,
    value: f64,
}

#[derive(Debug, Clone, Copy)]
enum GammaKind {
    Demand(Good),
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy)]
struct GammaTerm {
    obs: u32,
    reversed: bool,
    kind: GammaKind,
    value: f64,
}

fn collect_terms(k: usize, reversed: bool, ps: &[f64; 4], pt: &[f64; 4], ct: &mut Vec<ChoiceTerm>, gt: &mut Vec<GammaTerm>) {
    let obs = k as u32;
    for j in Choice::ALL {
        let v = ps[j.index()] - pt[j.index()];
        if v > 0.0 {
            ct.push(ChoiceTerm { obs, reversed, choice: j, value: v });
        }
    }
    for good in Good::BOTH {
        let set = ChoiceSet::demand(good);
        let v = set.mass(ps) - set.mass(pt);
        if v > 0.0 {
            gt.push(GammaTerm { obs, reversed, kind: GammaKind::Demand(good), value: v });
        }
    }
    let vl = ps[3] + pt[0] - 1.0;
    if vl > 0.0 {
        gt.push(GammaTerm { obs, reversed, kind: GammaKind::Lower, value: vl });
    }
    let vu = ps[1] + pt[2] - 1.0;
    if vu > 0.0 {
        gt.push(GammaTerm { obs, reversed, kind: GammaKind::Upper, value: vu });
    }
}

/// Per-β quantities reused across many γ values.
#[derive(Debug, Clone)]
pub struct BetaCache {
    pub deltas: Vec<IndexDelta>,
    pub choice_total: f64,
}

impl CriterionData {
    pub fn new(panel: &ObservationPanel, table: &CcpTable) -> Result<CriterionData> {
        if table.n != panel.n() {
            return Err(Error::Dimension(format!("CCP table covers {} individuals, panel has {}", table.n, panel.n())));
        }
        let pairs = period_pairs(panel.t_len());
        let mut found = Vec::with_capacity(pairs.len());
        for (s, t) in &pairs {
            let p = table
                .pair(*s, *t)
                .ok_or_else(|| Error::InvalidArgument(format!("no fitted CCPs for periods ({s}, {t})")))?;
            found.push(p);
        }
        let (d_x, d_z) = (panel.d_x(), panel.d_z());
        let m = panel.n() * pairs.len();
        let mut dx = Vec::with_capacity(m * 2 * d_x);
        let mut z = Vec::with_capacity(m * d_z);
        let mut p_s = Vec::with_capacity(m);
        let mut p_t = Vec::with_capacity(m);
        for i in 0..panel.n() {
            for (k, (s, t)) in pairs.iter().enumerate() {
                for good in Good::BOTH {
                    let (a, b) = (panel.x(i, *s, good), panel.x(i, *t, good));
                    dx.extend(a.iter().zip(b).map(|(u, v)| u - v));
                }
                z.extend_from_slice(panel.z(i));
                p_s.push(found[k].p_s[i]);
                p_t.push(found[k].p_t[i]);
            }
        }
        let mut choice_terms = Vec::new();
        let mut gamma_terms = Vec::new();
        for k in 0..p_s.len() {
            collect_terms(k, false, &p_s[k], &p_t[k], &mut choice_terms, &mut gamma_terms);
            collect_terms(k, true, &p_t[k], &p_s[k], &mut choice_terms, &mut gamma_terms);
        }
        Ok(CriterionData { n: panel.n(), d_x, d_z, dx, z, p_s, p_t, choice_terms, gamma_terms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn observations(&self) -> usize {
        self.p_s.len()
    }

    pub fn d_x(&self) -> usize {
        self.d_x
    }

    pub fn d_z(&self) -> usize {
        self.d_z
    }

    pub fn probabilities(&self, k: usize) -> (&[f64; 4], &[f64; 4]) {
        (&self.p_s[k], &self.p_t[k])
    }

    pub fn z(&self, k: usize) -> &[f64] {
        &self.z[k * self.d_z..(k + 1) * self.d_z]
    }

    pub fn delta(&self, k: usize, beta: &[f64]) -> IndexDelta {
        let base = k * 2 * self.d_x;
        IndexDelta {
            d_a: dot_unchecked(&self.dx[base..base + self.d_x], beta),
            d_b: dot_unchecked(&self.dx[base + self.d_x..base + 2 * self.d_x], beta),
        }
    }

    fn check(&self, theta: &Theta) -> Result<()> {
        if theta.d_x() != self.d_x || theta.d_z() != self.d_z {
            return Err(Error::Dimension("theta does not match panel dimensions".into()));
        }
        Ok(())
    }

    pub fn beta_cache(&self, beta: &[f64]) -> BetaCache {
        let deltas: Vec<IndexDelta> = (0..self.observations()).map(|k| self.delta(k, beta)).collect();
        let mut choice_total = 0.0;
        for term in &self.choice_terms {
            let d = deltas[term.obs as usize];
            let d = if term.reversed { d.reversed() } else { d };
            if !lambda_id1(&d, term.choice) {
                choice_total += term.value;
            }
        }
        BetaCache { deltas, choice_total }
    }

    pub fn evaluate_cached(&self, cache: &BetaCache, gamma: &[f64]) -> f64 {
        let mut total = cache.choice_total;
        let mut last = u32::MAX;
        let mut g = 0.0;
        for term in &self.gamma_terms {
            if term.obs != last {
                last = term.obs;
                g = dot_unchecked(self.z(term.obs as usize), gamma);
            }
            let d = cache.deltas[term.obs as usize];
            let d = if term.reversed { d.reversed() } else { d };
            let active = match term.kind {
                GammaKind::Demand(good) => lambda_id2(&d, g, good),
                GammaKind::Lower => lambda_id3(&d, g).0,
                GammaKind::Upper => lambda_id3(&d, g).1,
            };
            if !active {
                total += term.value;
            }
        }
        total / self.n.max(1) as f64
    }

    pub fn evaluate(&self, theta: &Theta) -> Result<f64> {
        self.check(theta)?;
        Ok(self.evaluate_cached(&self.beta_cache(&theta.beta), &theta.gamma))
    }

    /// Direct evaluation through the positive-part helpers.
    pub fn evaluate_direct(&self, theta: &Theta) -> Result<f64> {
        self.check(theta)?;
        let mut total = 0.0;
        for k in 0..self.observations() {
            let d = self.delta(k, &theta.beta);
            let g = dot_unchecked(self.z(k), &theta.gamma);
            let (ps, pt) = (&self.p_s[k], &self.p_t[k]);
            total += choice_part(ps, pt, &d) + complementarity_part(ps, pt, &d, g);
            let r = d.reversed();
            total += choice_part(pt, ps, &r) + complementarity_part(pt, ps, &r, g);
        }
        Ok(total / self.n.max(1) as f64)
    }

    /// Same value computed through the full moment vectors (slower; used for cross-checks).
    pub fn evaluate_reference(&self, theta: &Theta) -> Result<f64> {
        self.check(theta)?;
        let mut total = 0.0;
        for k in 0..self.observations() {
            let d = self.delta(k, &theta.beta);
            let g = dot_unchecked(self.z(k), &theta.gamma);
            total += moment_at(&self.p_s[k], &self.p_t[k], &d, g).positive_l1();
            total += moment_at(&self.p_t[k], &self.p_s[k], &d.reversed(), g).positive_l1();
        }
        Ok(total / self.n.max(1) as f64)
    }
}

/// Ω̂_N(θ) for a panel and its fitted CCP table.
pub fn criterion(panel: &ObservationPanel, table: &CcpTable, theta: &Theta) -> Result<f64> {
    CriterionData::new(panel, table)?.evaluate(theta)
}
