//! First-step estimation of conditional choice probabilities P_t({j} | x_s, x_t, z).

pub mod kernel;
pub mod neural;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ChoiceSet, Good, ObservationPanel};
use crate::rng;

pub use kernel::KernelSmoother;
pub use neural::NeuralNet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CcpMethod {
    #[default]
    Neural,
    Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcpHyper {
    pub method: CcpMethod,
    pub seed: u64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub max_width: usize,
    pub floor: f64,
}

impl Default for CcpHyper {
    fn default() -> Self {
        CcpHyper {
            method: CcpMethod::Neural,
            seed: 0,
            iterations: 2000,
            learning_rate: 0.25,
            max_width: 32,
            floor: 1e-6,
        }
    }
}

impl CcpHyper {
    pub fn with_seed(self, seed: u64) -> CcpHyper {
        CcpHyper { seed, ..self }
    }

    pub fn kernel() -> CcpHyper {
        CcpHyper { method: CcpMethod::Kernel, ..CcpHyper::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[f64], dim: usize) -> Standardizer {
        let n = (rows.len() / dim).max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows.chunks(dim) {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut sd = vec![0.0; dim];
        for r in rows.chunks(dim) {
            for k in 0..dim {
                sd[k] += (r[k] - mean[k]).powi(2) / n;
            }
        }
        for s in sd.iter_mut() {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        Standardizer { mean, sd }
    }

    fn apply(&self, w: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(w.iter().zip(self.mean.iter().zip(&self.sd)).map(|(v, (m, s))| (v - m) / s));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CcpFit {
    /// One network per period of the pair.
    Neural { nets: [NeuralNet; 2] },
    Kernel { smoother: KernelSmoother },
}

/// Fitted CCPs for one period pair, conditioning on w_st = (x_s, x_t, z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcpModel {
    pub method: CcpMethod,
    pub hyper: CcpHyper,
    pub s: usize,
    pub t: usize,
    pub dim: usize,
    pub standardizer: Standardizer,
    pub fit: CcpFit,
}

/// Conditioning vector (x_As, x_Bs, x_At, x_Bt, z) for individual i and periods (s, t).
pub fn conditioning_vector(panel: &ObservationPanel, i: usize, s: usize, t: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(panel.x(i, s, Good::A));
    out.extend_from_slice(panel.x(i, s, Good::B));
    out.extend_from_slice(panel.x(i, t, Good::A));
    out.extend_from_slice(panel.x(i, t, Good::B));
    out.extend_from_slice(panel.z(i));
}

fn apply_floor(p: [f64; 4], floor: f64) -> [f64; 4] {
    let mut q = p.map(|v| v.clamp(floor, 1.0));
    let s: f64 = q.iter().sum();
    for v in q.iter_mut() {
        *v /= s;
    }
    q
}

pub fn hidden_width(n: usize, max_width: usize) -> usize {
    ((n as f64).powf(0.25).ceil() as usize).clamp(1, max_width.max(1))
}

/// Fits CCPs for periods s and t on all individuals of the panel.
pub fn fit_ccp(panel: &ObservationPanel, s: usize, t: usize, hyper: &CcpHyper) -> Result<CcpModel> {
    if s == t || s >= panel.t_len() || t >= panel.t_len() {
        return Err(Error::InvalidArgument(format!("invalid period pair ({s}, {t})")));
    }
    let n = panel.n();
    if n < 10 {
        return Err(Error::InsufficientData(format!("need at least 10 individuals, got {n}")));
    }
    let dim = 4 * panel.d_x() + panel.d_z();
    let mut raw = Vec::with_capacity(n * dim);
    let mut w = Vec::with_capacity(dim);
    for i in 0..n {
        conditioning_vector(panel, i, s, t, &mut w);
        raw.extend_from_slice(&w);
    }
    let standardizer = Standardizer::fit(&raw, dim);
    let mut std_rows = Vec::with_capacity(n * dim);
    let mut buf = Vec::with_capacity(dim);
    for r in raw.chunks(dim) {
        standardizer.apply(r, &mut buf);
        std_rows.extend_from_slice(&buf);
    }

    let fit = match hyper.method {
        CcpMethod::Kernel => {
            let labels = (0..n).map(|i| [panel.y(i, s).index() as u8, panel.y(i, t).index() as u8]).collect();
            CcpFit::Kernel {
                smoother: KernelSmoother {
                    dim,
                    bandwidth: KernelSmoother::rule_of_thumb(n, dim),
                    inputs: std_rows,
                    labels,
                },
            }
        }
        CcpMethod::Neural => {
            // collapse identical conditioning vectors into weighted rows
            let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
            let mut inputs = Vec::new();
            let mut counts: [Vec<[f64; 4]>; 2] = [Vec::new(), Vec::new()];
            for i in 0..n {
                let row = &std_rows[i * dim..(i + 1) * dim];
                let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
                let r = *index.entry(key).or_insert_with(|| {
                    inputs.extend_from_slice(row);
                    counts[0].push([0.0; 4]);
                    counts[1].push([0.0; 4]);
                    counts[0].len() - 1
                });
                counts[0][r][panel.y(i, s).index()] += 1.0;
                counts[1][r][panel.y(i, t).index()] += 1.0;
            }
            let width = hidden_width(n, hyper.max_width);
            let train = |k: usize| {
                let mut freq = [0.0; 4];
                for c in &counts[k] {
                    for j in 0..4 {
                        freq[j] += c[j] / n as f64;
                    }
                }
                let mut r = rng::stream(hyper.seed, (s * 1000 + t) as u64, k as u64);
                let mut net = NeuralNet::init(dim, width, freq, &mut r);
                let data = neural::TrainingSet { inputs: &inputs, counts: &counts[k] };
                net.train(&data, hyper.iterations, hyper.learning_rate);
                net
            };
            CcpFit::Neural { nets: [train(0), train(1)] }
        }
    };
    Ok(CcpModel { method: hyper.method, hyper: hyper.clone(), s, t, dim, standardizer, fit })
}

impl CcpModel {
    /// Probabilities (O, A, B, AB) for period s and period t at the raw conditioning vector w.
    pub fn predict(&self, w: &[f64]) -> Result<[[f64; 4]; 2]> {
        if w.len() != self.dim {
            return Err(Error::Dimension(format!("conditioning vector has {} values, expected {}", w.len(), self.dim)));
        }
        let mut x = Vec::with_capacity(self.dim);
        self.standardizer.apply(w, &mut x);
        let raw = match &self.fit {
            CcpFit::Neural { nets } => [nets[0].predict(&x), nets[1].predict(&x)],
            CcpFit::Kernel { smoother } => smoother.predict(&x),
        };
        Ok([apply_floor(raw[0], self.hyper.floor), apply_floor(raw[1], self.hyper.floor)])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<CcpModel> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CcpModel> {
        CcpModel::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Probability of the set K in period `period` (which must be one of the model's pair).
pub fn eval_ccp(model: &CcpModel, w: &[f64], period: usize, set: ChoiceSet) -> Result<f64> {
    let k = if period == model.s {
        0
    } else if period == model.t {
        1
    } else {
        return Err(Error::InvalidArgument(format!("period {period} not in model pair ({}, {})", model.s, model.t)));
    };
    if set == ChoiceSet::FULL {
        return Ok(1.0);
    }
    let p = model.predict(w)?;
    Ok(set.mass(&p[k]).clamp(0.0, 1.0))
}

/// In-sample predictions for one unordered period pair s < t.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPredictions {
    pub s: usize,
    pub t: usize,
    pub p_s: Vec<[f64; 4]>,
    pub p_t: Vec<[f64; 4]>,
}

/// Predicted CCPs for every individual and every unordered period pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CcpTable {
    pub n: usize,
    pub pairs: Vec<PairPredictions>,
}

pub fn period_pairs(t_len: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for s in 0..t_len {
        for t in s + 1..t_len {
            v.push((s, t));
        }
    }
    v
}

impl CcpTable {
    /// Fits one model per unordered pair on `panel` and predicts at the same individuals.
    pub fn fit(panel: &ObservationPanel, hyper: &CcpHyper) -> Result<CcpTable> {
        let models = fit_all_pairs(panel, hyper)?;
        CcpTable::predict(&models, panel)
    }

    /// Predicts with fitted models at the individuals of another panel.
    pub fn predict(models: &[CcpModel], panel: &ObservationPanel) -> Result<CcpTable> {
        let mut pairs = Vec::with_capacity(models.len());
        let mut w = Vec::new();
        for m in models {
            let mut p_s = Vec::with_capacity(panel.n());
            let mut p_t = Vec::with_capacity(panel.n());
            for i in 0..panel.n() {
                conditioning_vector(panel, i, m.s, m.t, &mut w);
                let p = m.predict(&w)?;
                p_s.push(p[0]);
                p_t.push(p[1]);
            }
            pairs.push(PairPredictions { s: m.s, t: m.t, p_s, p_t });
        }
        Ok(CcpTable { n: panel.n(), pairs })
    }

    /// Builds a table directly from known probabilities (used with exact CCPs).
    pub fn from_pairs(n: usize, pairs: Vec<PairPredictions>) -> Result<CcpTable> {
        for p in &pairs {
            if p.p_s.len() != n || p.p_t.len() != n {
                return Err(Error::Dimension("pair predictions do not cover all individuals".into()));
            }
        }
        Ok(CcpTable { n, pairs })
    }

    pub fn pair(&self, s: usize, t: usize) -> Option<&PairPredictions> {
        self.pairs.iter().find(|p| p.s == s && p.t == t)
    }
}

/// Fits all unordered pairs; pairs are fitted in parallel.
pub fn fit_all_pairs(panel: &ObservationPanel, hyper: &CcpHyper) -> Result<Vec<CcpModel>> {
    period_pairs(panel.t_len())
        .into_par_iter()
        .map(|(s, t)| fit_ccp(panel, s, t, hyper))
        .collect()
}
