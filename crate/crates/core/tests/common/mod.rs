//! Discrete data-generating processes whose CCPs are computed exactly by enumeration.
#![allow(dead_code)]

use bundlechoice::ccp::{CcpTable, PairPredictions};
use bundlechoice::model::{choose, dot, Choice, ObservationPanel, Theta};
use bundlechoice::rng;
use bundlechoice::sharpness::RationalizePair;
use rand::Rng as _;

pub type Block = [Vec<f64>; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaSign {
    Any,
    NonNegative,
    NonPositive,
}

#[derive(Debug, Clone)]
pub struct DiscreteDgp {
    pub theta: Theta,
    /// Support of one period's covariates (x_A, x_B).
    pub x_support: Vec<Block>,
    pub z_support: Vec<Vec<f64>>,
    /// Error support in (ε_A, ε_B) with probabilities; the same law in every period.
    pub errors: Vec<([f64; 2], f64)>,
    /// Fixed-effect law per cell (x_s index, x_t index, z index).
    pub alpha: Vec<Vec<([f64; 2], f64)>>,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub xs: usize,
    pub xt: usize,
    pub z: usize,
}

fn weights(r: &mut rng::Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| r.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn normalized(mut v: Vec<f64>, r: &mut rng::Rng) -> Vec<f64> {
    v[0] = if r.random::<bool>() { 1.0 } else { -1.0 };
    v
}

impl DiscreteDgp {
    /// Random instance: 9 jittered grid errors, up to 4 covariate support points, 2 z points,
    /// and a 2-point fixed-effect law that depends on the covariate cell.
    pub fn random(seed: u64, sign: GammaSign) -> DiscreteDgp {
        let mut r = rng::seeded(seed);
        let d_x = 2;
        let d_z = 2;
        let beta = normalized((0..d_x).map(|_| r.random_range(-2.0..2.0)).collect(), &mut r);
        let mut gamma = normalized((0..d_z).map(|_| r.random_range(-2.0..2.0)).collect(), &mut r);
        let support = r.random_range(2..=4);
        let x_support: Vec<Block> = (0..support)
            .map(|_| {
                [
                    (0..d_x).map(|_| r.random_range(-1.5..1.5)).collect(),
                    (0..d_x).map(|_| r.random_range(-1.5..1.5)).collect(),
                ]
            })
            .collect();
        let mut z_support: Vec<Vec<f64>> = (0..2).map(|_| (0..d_z).map(|_| r.random_range(-1.5..1.5)).collect()).collect();
        match sign {
            GammaSign::Any => {}
            GammaSign::NonNegative | GammaSign::NonPositive => {
                for z in z_support.iter_mut() {
                    z.iter_mut().for_each(|v| *v = v.abs() + 0.1);
                }
                gamma = vec![1.0, r.random_range(0.0..2.0)];
                if sign == GammaSign::NonPositive {
                    gamma = gamma.iter().map(|g| -g).collect();
                }
            }
        }
        let grid = [-2.0, 0.0, 2.0];
        let w = weights(&mut r, 9);
        let mut errors = Vec::with_capacity(9);
        for (i, &a) in grid.iter().enumerate() {
            for (j, &b) in grid.iter().enumerate() {
                let jitter = [r.random_range(-0.7..0.7), r.random_range(-0.7..0.7)];
                errors.push(([a + jitter[0], b + jitter[1]], w[3 * i + j]));
            }
        }
        let cells = support * support * z_support.len();
        let alpha = (0..cells)
            .map(|_| {
                let w = weights(&mut r, 2);
                (0..2).map(|k| ([r.random_range(-1.5..1.5), r.random_range(-1.5..1.5)], w[k])).collect()
            })
            .collect();
        DiscreteDgp { theta: Theta { beta, gamma }, x_support, z_support, errors, alpha }
    }

    /// Instance where x_A is fixed and x_B varies only in its last coordinate, which carries a
    /// negative coefficient (a price).
    pub fn price_instance(seed: u64, sign: GammaSign) -> DiscreteDgp {
        let mut d = DiscreteDgp::random(seed, sign);
        let mut r = rng::seeded(rng::mix(seed, 7));
        d.theta.beta = vec![1.0, -r.random_range(0.3..2.0)];
        let xa = d.x_support[0][0].clone();
        let other = d.x_support[0][1][0];
        let prices = [0.0, 0.5, 1.1, 1.8];
        d.x_support = prices.iter().map(|&p| [xa.clone(), vec![other, p]]).collect();
        let cells = d.x_support.len() * d.x_support.len() * d.z_support.len();
        d.alpha = (0..cells)
            .map(|_| {
                let w = weights(&mut r, 2);
                (0..2).map(|k| ([r.random_range(-1.5..1.5), r.random_range(-1.5..1.5)], w[k])).collect()
            })
            .collect();
        d
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for xs in 0..self.x_support.len() {
            for xt in 0..self.x_support.len() {
                for z in 0..self.z_support.len() {
                    out.push(Cell { xs, xt, z });
                }
            }
        }
        out
    }

    fn cell_index(&self, c: &Cell) -> usize {
        (c.xs * self.x_support.len() + c.xt) * self.z_support.len() + c.z
    }

    /// Exact probabilities of each choice at covariates x for the fixed-effect law of the cell.
    pub fn ccp(&self, cell: &Cell, x: &Block) -> [f64; 4] {
        let da = dot(&x[0], &self.theta.beta).unwrap();
        let db = dot(&x[1], &self.theta.beta).unwrap();
        let g = dot(&self.z_support[cell.z], &self.theta.gamma).unwrap();
        let mut p = [0.0; 4];
        for (alpha, wa) in &self.alpha[self.cell_index(cell)] {
            for (e, we) in &self.errors {
                let ua = da + alpha[0] + e[0];
                let ub = db + alpha[1] + e[1];
                let c = choose(&[0.0, ua, ub, ua + ub + g]).unwrap();
                p[c.index()] += wa * we;
            }
        }
        p
    }

    pub fn ccp_pair(&self, cell: &Cell) -> ([f64; 4], [f64; 4]) {
        (self.ccp(cell, &self.x_support[cell.xs]), self.ccp(cell, &self.x_support[cell.xt]))
    }

    pub fn gamma_at(&self, cell: &Cell) -> f64 {
        dot(&self.z_support[cell.z], &self.theta.gamma).unwrap()
    }

    pub fn rationalize_pairs(&self) -> Vec<RationalizePair> {
        self.cells()
            .iter()
            .map(|c| {
                let (p_s, p_t) = self.ccp_pair(c);
                RationalizePair {
                    p_s,
                    p_t,
                    x_s: self.x_support[c.xs].clone(),
                    x_t: self.x_support[c.xt].clone(),
                    z: self.z_support[c.z].clone(),
                }
            })
            .collect()
    }

    /// One individual per cell with the exact CCPs as the first step.
    pub fn panel_and_table(&self) -> (ObservationPanel, CcpTable) {
        let cells = self.cells();
        let n = cells.len();
        let (d_x, d_z) = (self.theta.d_x(), self.theta.d_z());
        let mut x = Vec::with_capacity(n * 2 * 2 * d_x);
        let mut z = Vec::with_capacity(n * d_z);
        let mut p_s = Vec::with_capacity(n);
        let mut p_t = Vec::with_capacity(n);
        for c in &cells {
            for block in [&self.x_support[c.xs], &self.x_support[c.xt]] {
                x.extend_from_slice(&block[0]);
                x.extend_from_slice(&block[1]);
            }
            z.extend_from_slice(&self.z_support[c.z]);
            let (a, b) = self.ccp_pair(c);
            p_s.push(a);
            p_t.push(b);
        }
        let panel = ObservationPanel::new(n, 2, d_x, d_z, x, z, vec![Choice::O; 2 * n]).unwrap();
        let table = CcpTable::from_pairs(n, vec![PairPredictions { s: 0, t: 1, p_s, p_t }]).unwrap();
        (panel, table)
    }
}

/// Outcome of comparing the closed-form constructors with max-flow on one instance.
#[derive(Debug, Default, Clone, Copy)]
pub struct AgreementCount {
    /// Pairs where a closed-form case applied and its preconditions held.
    pub compared: usize,
    pub disagreements: usize,
    /// Pairs where a closed-form case applied but a precondition failed.
    pub precondition_failures: usize,
    pub precondition_but_flow_feasible: usize,
}

/// Checks every pair of a discrete instance at the given parameter.
pub fn closed_form_agreement(pairs: &[RationalizePair], theta: &Theta, count: &mut AgreementCount) {
    use bundlechoice::error::Error;
    use bundlechoice::moments::IndexDelta;
    use bundlechoice::sharpness::{closed_form_plan, feasible_transport, forbidden_mask, TransportProblem};
    for pair in pairs {
        let d = |x: &Block| (dot(&x[0], &theta.beta).unwrap(), dot(&x[1], &theta.beta).unwrap());
        let (sa, sb) = d(&pair.x_s);
        let (ta, tb) = d(&pair.x_t);
        let delta = IndexDelta::new(sa - ta, sb - tb);
        let g = dot(&pair.z, &theta.gamma).unwrap();
        let problem = TransportProblem::new(pair.p_s, pair.p_t, forbidden_mask(&delta, g)).unwrap();
        let flow = feasible_transport(&problem);
        match closed_form_plan(&pair.p_s, &pair.p_t, &delta, g) {
            Ok(plan) => {
                count.compared += 1;
                if flow.is_none() || !plan.satisfies(&problem, 1e-9) {
                    count.disagreements += 1;
                }
            }
            Err(Error::Precondition(_)) => {
                count.precondition_failures += 1;
                if flow.is_some() {
                    count.precondition_but_flow_feasible += 1;
                }
            }
            Err(_) => {}
        }
    }
}

/// Random parameter in normalized form, used to probe instances away from the truth.
pub fn random_theta(r: &mut rng::Rng) -> Theta {
    let s = |r: &mut rng::Rng| if r.random::<bool>() { 1.0 } else { -1.0 };
    Theta {
        beta: vec![s(r), r.random_range(-3.0..3.0)],
        gamma: vec![s(r), r.random_range(-3.0..3.0)],
    }
}

/// Largest moment component over all pairs, in both orders.
pub fn max_moment(d: &DiscreteDgp, theta: &Theta) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for pair in d.rationalize_pairs() {
        let xs = [pair.x_s[0].as_slice(), pair.x_s[1].as_slice()];
        let xt = [pair.x_t[0].as_slice(), pair.x_t[1].as_slice()];
        let g = bundlechoice::moments::moment_vector(&pair.p_s, &pair.p_t, theta, xs, xt, &pair.z).unwrap();
        let r = bundlechoice::moments::moment_vector(&pair.p_t, &pair.p_s, theta, xt, xs, &pair.z).unwrap();
        worst = worst.max(g.max_component()).max(r.max_component());
    }
    worst
}

/// Number of (cell, price pair) comparisons where demand for A moves the wrong way.
pub fn lemma_violations(sign: GammaSign, seeds: std::ops::Range<u64>) -> (usize, usize) {
    let (mut checked, mut bad) = (0, 0);
    for seed in seeds {
        let d = DiscreteDgp::price_instance(seed, sign);
        for cell in d.cells() {
            for lo in &d.x_support {
                for hi in &d.x_support {
                    let (p_lo, p_hi) = (lo[1][1], hi[1][1]);
                    if p_hi <= p_lo {
                        continue;
                    }
                    let a_lo = bundlechoice::model::ChoiceSet::D_A.mass(&d.ccp(&cell, lo));
                    let a_hi = bundlechoice::model::ChoiceSet::D_A.mass(&d.ccp(&cell, hi));
                    checked += 1;
                    let wrong = match sign {
                        GammaSign::NonNegative => a_hi > a_lo + 1e-12,
                        GammaSign::NonPositive => a_hi < a_lo - 1e-12,
                        GammaSign::Any => false,
                    };
                    bad += wrong as usize;
                }
            }
        }
    }
    (checked, bad)
}
