//! One-hidden-layer softmax classifier trained by full-batch gradient descent.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNet {
    pub input: usize,
    pub hidden: usize,
    /// hidden x input, row major
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// 4 x hidden, row major
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax(o: &[f64; 4]) -> [f64; 4] {
    let m = o.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = [(o[0] - m).exp(), (o[1] - m).exp(), (o[2] - m).exp(), (o[3] - m).exp()];
    let s = e[0] + e[1] + e[2] + e[3];
    [e[0] / s, e[1] / s, e[2] / s, e[3] / s]
}

/// Training rows with identical inputs collapsed; `counts[r][c]` is how often class c occurs.
pub struct TrainingSet<'a> {
    pub inputs: &'a [f64],
    pub counts: &'a [[f64; 4]],
}

impl NeuralNet {
    pub fn init(input: usize, hidden: usize, class_freq: [f64; 4], rng: &mut Rng) -> NeuralNet {
        let a = 1.0 / (input as f64).sqrt();
        let b = 1.0 / (hidden as f64).sqrt();
        let w1 = (0..hidden * input).map(|_| rng.random_range(-a..a)).collect();
        let w2 = (0..4 * hidden).map(|_| rng.random_range(-b..b)).collect();
        let b2 = class_freq.iter().map(|f| f.max(1e-3).ln()).collect();
        NeuralNet { input, hidden, w1, b1: vec![0.0; hidden], w2, b2 }
    }

    fn hidden_layer(&self, x: &[f64], h: &mut [f64]) {
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w1[j * self.input..(j + 1) * self.input];
            let a: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j];
            *hj = logistic(a);
        }
    }

    fn output(&self, h: &[f64]) -> [f64; 4] {
        let mut o = [0.0; 4];
        for (c, oc) in o.iter_mut().enumerate() {
            let row = &self.w2[c * self.hidden..(c + 1) * self.hidden];
            *oc = row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.b2[c];
        }
        softmax(&o)
    }

    pub fn predict(&self, x: &[f64]) -> [f64; 4] {
        let mut h = vec![0.0; self.hidden];
        self.hidden_layer(x, &mut h);
        self.output(&h)
    }

    /// Mean cross-entropy over the (weighted) training rows.
    pub fn loss(&self, data: &TrainingSet) -> f64 {
        let total: f64 = data.counts.iter().map(|c| c.iter().sum::<f64>()).sum();
        let mut h = vec![0.0; self.hidden];
        let mut l = 0.0;
        for (r, counts) in data.counts.iter().enumerate() {
            self.hidden_layer(&data.inputs[r * self.input..(r + 1) * self.input], &mut h);
            let p = self.output(&h);
            for c in 0..4 {
                if counts[c] > 0.0 {
                    l -= counts[c] * p[c].max(1e-300).ln();
                }
            }
        }
        l / total
    }

    pub fn train(&mut self, data: &TrainingSet, iterations: usize, learning_rate: f64) {
        let (d, hdim) = (self.input, self.hidden);
        let total: f64 = data.counts.iter().map(|c| c.iter().sum::<f64>()).sum();
        let scale = 1.0 / total;
        let mut h = vec![0.0; hdim];
        let mut dh = vec![0.0; hdim];
        let mut g_w1 = vec![0.0; hdim * d];
        let mut g_b1 = vec![0.0; hdim];
        let mut g_w2 = vec![0.0; 4 * hdim];
        let mut g_b2;
        for _ in 0..iterations {
            g_w1.iter_mut().for_each(|v| *v = 0.0);
            g_b1.iter_mut().for_each(|v| *v = 0.0);
            g_w2.iter_mut().for_each(|v| *v = 0.0);
            g_b2 = [0.0; 4];
            for (r, counts) in data.counts.iter().enumerate() {
                let x = &data.inputs[r * d..(r + 1) * d];
                self.hidden_layer(x, &mut h);
                let p = self.output(&h);
                let m = counts[0] + counts[1] + counts[2] + counts[3];
                let mut d_o = [0.0; 4];
                for c in 0..4 {
                    d_o[c] = (m * p[c] - counts[c]) * scale;
                    g_b2[c] += d_o[c];
                }
                for j in 0..hdim {
                    let mut back = 0.0;
                    for c in 0..4 {
                        g_w2[c * hdim + j] += d_o[c] * h[j];
                        back += self.w2[c * hdim + j] * d_o[c];
                    }
                    dh[j] = back * h[j] * (1.0 - h[j]);
                }
                for j in 0..hdim {
                    let dj = dh[j];
                    g_b1[j] += dj;
                    let row = &mut g_w1[j * d..(j + 1) * d];
                    for (g, v) in row.iter_mut().zip(x) {
                        *g += dj * v;
                    }
                }
            }
            for (w, g) in self.w1.iter_mut().zip(&g_w1) {
                *w -= learning_rate * g;
            }
            for (w, g) in self.b1.iter_mut().zip(&g_b1) {
                *w -= learning_rate * g;
            }
            for (w, g) in self.w2.iter_mut().zip(&g_w2) {
                *w -= learning_rate * g;
            }
            for (w, g) in self.b2.iter_mut().zip(&g_b2) {
                *w -= learning_rate * g;
            }
        }
    }
}
