//! Derivative-free minimization: Nelder-Mead and an exhaustive grid helper.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub step: f64,
    pub max_evals: usize,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { step: 0.25, max_evals: 400, f_tol: 1e-12, x_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    if n == 0 {
        let v = f(x0);
        return Minimum { x: vec![], f: v, evals: 1 };
    }
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();

    loop {
        // order best to worst; ties keep earlier vertices first
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let size = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if evals >= opts.max_evals || (spread.abs() <= opts.f_tol && size <= opts.x_tol.max(opts.step * 1e-3))
            || size <= opts.x_tol
        {
            break;
        }
        if spread.abs() <= opts.f_tol && evals > 4 * (n + 1) {
            break;
        }

        let mut centroid = vec![0.0; n];
        for x in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect()
        };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for k in 1..=n {
                    let x: Vec<f64> = simplex[k].iter().zip(&best).map(|(v, b)| b + 0.5 * (v - b)).collect();
                    values[k] = eval(&x, &mut evals);
                    simplex[k] = x;
                }
            }
        }
    }
    let mut best = 0;
    for k in 1..=n {
        if values[k] < values[best] {
            best = k;
        }
    }
    Minimum { x: simplex[best].clone(), f: values[best], evals }
}

/// Evenly spaced points on [lo, hi]; a single point when `points` is 1 or lo == hi.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 || lo == hi {
        return vec![lo];
    }
    (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect()
}

/// Visits every point of the Cartesian product of the axes, last axis fastest.
pub fn for_each_grid_point<F: FnMut(usize, &[f64])>(axes: &[Vec<f64>], mut f: F) {
    let dims = axes.len();
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    let mut counter = vec![0usize; dims];
    let mut point: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut k = 0;
    loop {
        f(k, &point);
        k += 1;
        let mut d = dims;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            counter[d] += 1;
            if counter[d] < axes[d].len() {
                point[d] = axes[d][counter[d]];
                break;
            }
            counter[d] = 0;
            point[d] = axes[d][0];
        }
    }
}
