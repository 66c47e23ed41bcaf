//! Parametric simulated method of moments with iid Gumbel good-level shocks and linear
//! correlated random effects α_ℓ = η₀ + x̄_ℓ'η₁ + v_ℓ, v_ℓ ~ N(0, 1).
//!
//! Each simulation draw fixes (v_A, v_B, ε_B); the A shock is integrated out in closed form.

use rand_distr::{Distribution, Gumbel, StandardNormal};
use serde::{Deserialize, Serialize};

use super::optim::{nelder_mead, NelderMeadOptions};
use crate::error::{Error, Result};
use crate::model::{dot_unchecked, Good, ObservationPanel, Theta};
use crate::rng;

pub const MIN_DRAWS: usize = 100;
const DRAW_TAG: u64 = 0x6d73_6d00;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsmOptions {
    pub draws: usize,
    pub seed: u64,
    pub nm_step: f64,
    pub nm_max_evals: usize,
    /// Nelder-Mead is restarted from its own solution this many extra times.
    pub restarts: usize,
}

impl Default for MsmOptions {
    fn default() -> Self {
        MsmOptions { draws: MIN_DRAWS, seed: 0, nm_step: 0.5, nm_max_evals: 2000, restarts: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsmEstimate {
    pub theta: Theta,
    pub eta0: f64,
    pub eta1: Vec<f64>,
    pub criterion: f64,
    pub evaluations: usize,
}

/// Parameters of the parametric model; β₁ = γ₁ = 1 are held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct MsmParams {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub eta0: f64,
    pub eta1: Vec<f64>,
}

impl MsmParams {
    fn from_free(x: &[f64], d_x: usize, d_z: usize) -> MsmParams {
        let mut beta = vec![1.0];
        beta.extend_from_slice(&x[..d_x - 1]);
        let mut gamma = vec![1.0];
        gamma.extend_from_slice(&x[d_x - 1..d_x + d_z - 2]);
        let eta0 = x[d_x + d_z - 2];
        let eta1 = x[d_x + d_z - 1..].to_vec();
        MsmParams { beta, gamma, eta0, eta1 }
    }

    fn free(&self) -> Vec<f64> {
        let mut x = self.beta[1..].to_vec();
        x.extend_from_slice(&self.gamma[1..]);
        x.push(self.eta0);
        x.extend_from_slice(&self.eta1);
        x
    }
}

/// Data and common random numbers for the simulated moment criterion.
pub struct MsmProblem<'a> {
    panel: &'a ObservationPanel,
    draws: usize,
    // per individual and draw: exp(v_A), exp(v_B + ε_B)
    ev: Vec<[f64; 2]>,
    empirical: Vec<f64>,
    instruments: usize,
}

fn clamp_exp(a: f64) -> f64 {
    a.clamp(-60.0, 60.0).exp()
}

fn mean_x(panel: &ObservationPanel, i: usize, good: Good, k: usize) -> f64 {
    (0..panel.t_len()).map(|t| panel.x(i, t, good)[k]).sum::<f64>() / panel.t_len() as f64
}

/// Adds the choice probabilities given exp(a + v_A), exp(b'), exp(Γ), integrating over ε_A.
#[inline]
fn draw_probabilities(a: f64, b: f64, eg: f64, p: &mut [f64; 4]) {
    let bg = b * eg;
    let q = a * bg.max(1.0) / b.max(1.0);
    let without_a = (-q).exp();
    let with_a = 1.0 - without_a;
    if bg > 1.0 {
        p[3] += with_a;
    } else {
        p[1] += with_a;
    }
    if b > 1.0 {
        p[2] += without_a;
    } else {
        p[0] += without_a;
    }
}

impl<'a> MsmProblem<'a> {
    pub fn new(panel: &'a ObservationPanel, draws: usize, seed: u64) -> Result<MsmProblem<'a>> {
        if draws < MIN_DRAWS {
            return Err(Error::InvalidArgument(format!("simulation draws {draws} < {MIN_DRAWS}")));
        }
        if panel.n() == 0 {
            return Err(Error::InsufficientData("empty panel".into()));
        }
        if panel.d_x() < 1 || panel.d_z() < 1 {
            return Err(Error::Dimension("need d_x, d_z >= 1".into()));
        }
        let gumbel = Gumbel::new(0.0, 1.0).expect("valid Gumbel");
        let mut ev = Vec::with_capacity(panel.n() * draws);
        for i in 0..panel.n() {
            let mut r = rng::stream(rng::mix(seed, DRAW_TAG), i as u64, rng::INDIVIDUAL);
            for _ in 0..draws {
                let va: f64 = StandardNormal.sample(&mut r);
                let vb: f64 = StandardNormal.sample(&mut r);
                let eb: f64 = gumbel.sample(&mut r);
                ev.push([va.exp(), (vb + eb).exp()]);
            }
        }
        let instruments = 1 + 2 * panel.d_x() + panel.d_z();
        let mut problem = MsmProblem { panel, draws, ev, empirical: Vec::new(), instruments };
        let mut empirical = vec![0.0; problem.moment_count()];
        for i in 0..panel.n() {
            for t in 0..panel.t_len() {
                let mut p = [0.0; 4];
                p[panel.y(i, t).index()] = 1.0;
                problem.accumulate(i, t, &p, &mut empirical);
            }
        }
        let n = panel.n() as f64;
        empirical.iter_mut().for_each(|m| *m /= n);
        problem.empirical = empirical;
        Ok(problem)
    }

    pub fn moment_count(&self) -> usize {
        4 * self.panel.t_len() * self.instruments
    }

    pub fn free_dims(&self) -> usize {
        2 * self.panel.d_x() + self.panel.d_z() - 1
    }

    fn accumulate(&self, i: usize, t: usize, p: &[f64; 4], out: &mut [f64]) {
        let panel = self.panel;
        let base = t * 4 * self.instruments;
        for (j, &pj) in p.iter().enumerate() {
            let row = &mut out[base + j * self.instruments..base + (j + 1) * self.instruments];
            row[0] += pj;
            let mut k = 1;
            for good in Good::BOTH {
                for &x in panel.x(i, t, good) {
                    row[k] += pj * x;
                    k += 1;
                }
            }
            for &z in panel.z(i) {
                row[k] += pj * z;
                k += 1;
            }
        }
    }

    /// Simulated moments. Given b' = b + v_B + ε_B the A side is taken iff
    /// a + v_A + ε_A > max(0, b') − max(0, b' + Γ), a Gumbel tail probability; the A side is the
    /// bundle when b' + Γ > 0, and the other side is B when b' > 0.
    pub fn simulated_moments(&self, params: &MsmParams) -> Vec<f64> {
        let panel = self.panel;
        let mut out = vec![0.0; self.moment_count()];
        let inv_s = 1.0 / self.draws as f64;
        for i in 0..panel.n() {
            let mut xbar = [0.0; 2];
            for good in Good::BOTH {
                xbar[good.index()] = (0..panel.d_x()).map(|k| mean_x(panel, i, good, k) * params.eta1[k]).sum::<f64>();
            }
            let mean = [params.eta0 + xbar[0], params.eta0 + xbar[1]];
            let eg = clamp_exp(dot_unchecked(panel.z(i), &params.gamma));
            let draws = &self.ev[i * self.draws..(i + 1) * self.draws];
            for t in 0..panel.t_len() {
                let ea = clamp_exp(dot_unchecked(panel.x(i, t, Good::A), &params.beta) + mean[0]);
                let eb = clamp_exp(dot_unchecked(panel.x(i, t, Good::B), &params.beta) + mean[1]);
                let mut p = [0.0; 4];
                for v in draws {
                    draw_probabilities(ea * v[0], eb * v[1], eg, &mut p);
                }
                p.iter_mut().for_each(|q| *q *= inv_s);
                self.accumulate(i, t, &p, &mut out);
            }
        }
        let n = panel.n() as f64;
        out.iter_mut().for_each(|m| *m /= n);
        out
    }

    /// Identity-weighted distance between empirical and simulated moments.
    pub fn objective(&self, params: &MsmParams) -> f64 {
        self.simulated_moments(params).iter().zip(&self.empirical).map(|(s, e)| (s - e).powi(2)).sum()
    }
}

pub fn estimate_msm_parametric(panel: &ObservationPanel, opts: &MsmOptions) -> Result<MsmEstimate> {
    let problem = MsmProblem::new(panel, opts.draws, opts.seed)?;
    let (d_x, d_z) = (panel.d_x(), panel.d_z());
    let nm = NelderMeadOptions { step: opts.nm_step, max_evals: opts.nm_max_evals, f_tol: 1e-14, x_tol: 1e-6 };
    let f = |x: &[f64]| problem.objective(&MsmParams::from_free(x, d_x, d_z));
    let mut x = vec![0.0; problem.free_dims()];
    let mut value = f(&x);
    let mut evaluations = 1;
    for round in 0..=opts.restarts {
        let step = NelderMeadOptions { step: nm.step / (1 << round) as f64, ..nm };
        let m = nelder_mead(f, &x, &step);
        evaluations += m.evals;
        if m.f <= value {
            x = m.x;
            value = m.f;
        }
    }
    let params = MsmParams::from_free(&x, d_x, d_z);
    debug_assert_eq!(params.free(), x);
    Ok(MsmEstimate {
        theta: Theta { beta: params.beta, gamma: params.gamma },
        eta0: params.eta0,
        eta1: params.eta1,
        criterion: value,
        evaluations,
    })
}
