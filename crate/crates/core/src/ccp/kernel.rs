//! Nadaraya-Watson smoother with a product Gaussian kernel.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSmoother {
    pub dim: usize,
    pub bandwidth: f64,
    /// standardized training inputs, n x dim
    pub inputs: Vec<f64>,
    /// class labels per row for periods s and t
    pub labels: Vec<[u8; 2]>,
}

impl KernelSmoother {
    /// Rule-of-thumb bandwidth on standardized inputs.
    pub fn rule_of_thumb(n: usize, dim: usize) -> f64 {
        1.06 * (n as f64).powf(-1.0 / (4.0 + dim as f64))
    }

    pub fn predict(&self, x: &[f64]) -> [[f64; 4]; 2] {
        let inv = 1.0 / (self.bandwidth * self.bandwidth);
        let n = self.labels.len();
        let mut exps = Vec::with_capacity(n);
        let mut max = f64::NEG_INFINITY;
        for r in 0..n {
            let row = &self.inputs[r * self.dim..(r + 1) * self.dim];
            let d2: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            let e = -0.5 * d2 * inv;
            max = max.max(e);
            exps.push(e);
        }
        let mut p = [[0.0; 4]; 2];
        let mut total = 0.0;
        for (e, lab) in exps.iter().zip(&self.labels) {
            let w = (e - max).exp();
            total += w;
            p[0][lab[0] as usize] += w;
            p[1][lab[1] as usize] += w;
        }
        for row in p.iter_mut() {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        p
    }
}
