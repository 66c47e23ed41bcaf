//! Panel simulator for the four fixed-effect / error designs and both covariate schemes.

use rand::Rng as _;
use rand_distr::{Distribution, Gumbel, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{choose_finite, dot_unchecked, Choice, LatentDraw, ObservationPanel, Theta};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Design {
    /// Gumbel errors, additive fixed effects.
    One,
    /// Correlated normal errors, additive fixed effects.
    Two,
    /// Gumbel errors, non-additive fixed effects.
    Three,
    /// Correlated normal errors, non-additive fixed effects.
    Four,
}

impl Design {
    pub const ALL: [Design; 4] = [Design::One, Design::Two, Design::Three, Design::Four];

    pub fn number(self) -> u8 {
        self.into()
    }

    pub fn gumbel_errors(self) -> bool {
        matches!(self, Design::One | Design::Three)
    }

    pub fn additive_effects(self) -> bool {
        matches!(self, Design::One | Design::Two)
    }
}

impl TryFrom<u8> for Design {
    type Error = Error;

    fn try_from(v: u8) -> Result<Design> {
        match v {
            1 => Ok(Design::One),
            2 => Ok(Design::Two),
            3 => Ok(Design::Three),
            4 => Ok(Design::Four),
            other => Err(Error::InvalidArgument(format!("design must be 1..4, got {other}"))),
        }
    }
}

impl From<Design> for u8 {
    fn from(d: Design) -> u8 {
        match d {
            Design::One => 1,
            Design::Two => 2,
            Design::Three => 3,
            Design::Four => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CovariateScheme {
    /// Large-support normal covariates.
    #[default]
    Gaussian,
    /// Bounded-support covariates for the partially identified setting.
    Bounded,
}

/// How the Gaussian scheme scales each covariate coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GaussianScale {
    /// Each coordinate has variance d_x.
    #[default]
    VarianceDx,
    /// Each coordinate is standard normal.
    Unit,
}

/// Individual complementarity that replaces z'γ when set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LatentGamma {
    /// Γ = +g_plus with probability eta, -g_minus otherwise, independent of covariates.
    TwoPoint { eta: f64, g_plus: f64, g_minus: f64 },
    /// Γ equal to a constant for everyone.
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub design: Design,
    pub n: usize,
    pub t_len: usize,
    pub d_x: usize,
    pub d_z: usize,
    #[serde(default)]
    pub covariate_scheme: CovariateScheme,
    #[serde(default)]
    pub gaussian_scale: GaussianScale,
    pub theta_true: Theta,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_gamma: Option<LatentGamma>,
}

impl DgpConfig {
    /// Two covariates per block, β = γ = (1, 1).
    pub fn standard(design: Design, n: usize, t_len: usize, seed: u64) -> DgpConfig {
        DgpConfig {
            design,
            n,
            t_len,
            d_x: 2,
            d_z: 2,
            covariate_scheme: CovariateScheme::Gaussian,
            gaussian_scale: GaussianScale::VarianceDx,
            theta_true: Theta { beta: vec![1.0, 1.0], gamma: vec![1.0, 1.0] },
            seed,
            latent_gamma: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_len < 2 {
            return Err(Error::InvalidArgument(format!("t_len must be >= 2, got {}", self.t_len)));
        }
        if self.d_x == 0 || self.d_z == 0 {
            return Err(Error::InvalidArgument("d_x and d_z must be >= 1".into()));
        }
        if self.theta_true.d_x() != self.d_x || self.theta_true.d_z() != self.d_z {
            return Err(Error::Dimension("theta_true does not match d_x/d_z".into()));
        }
        if self.covariate_scheme == CovariateScheme::Bounded && self.d_z < 2 {
            return Err(Error::InvalidArgument("bounded scheme needs d_z >= 2".into()));
        }
        if let Some(LatentGamma::TwoPoint { eta, .. }) = self.latent_gamma {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidArgument(format!("eta must be in [0,1], got {eta}")));
            }
        }
        Ok(())
    }
}

/// A simulated panel together with the unobservables that generated it.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: ObservationPanel,
    pub latent: Vec<LatentDraw>,
}

fn draw_x_period(config: &DgpConfig, rng: &mut Rng, out: &mut Vec<f64>) {
    match config.covariate_scheme {
        CovariateScheme::Gaussian => {
            let sd = match config.gaussian_scale {
                GaussianScale::VarianceDx => (config.d_x as f64).sqrt(),
                GaussianScale::Unit => 1.0,
            };
            for _ in 0..2 * config.d_x {
                let e: f64 = rng.sample(StandardNormal);
                out.push(sd * e);
            }
        }
        CovariateScheme::Bounded => {
            let ua = Uniform::new_inclusive(-3.0, 3.0).expect("valid bounds");
            for _ in 0..config.d_x {
                out.push(ua.sample(rng));
            }
            let sd = 2f64.sqrt();
            for _ in 0..config.d_x {
                let e: f64 = rng.sample(StandardNormal);
                out.push(sd * e);
            }
        }
    }
}

/// Draws one individual's time-invariant covariates from the scheme's Z law.
pub fn draw_z(scheme: CovariateScheme, d_z: usize, rng: &mut Rng) -> Vec<f64> {
    let mut z = Vec::with_capacity(d_z);
    match scheme {
        CovariateScheme::Gaussian => {
            let first = Normal::new(2.0, 2f64.sqrt()).expect("valid sd");
            z.push(first.sample(rng));
            for _ in 1..d_z {
                z.push(rng.sample(StandardNormal));
            }
        }
        CovariateScheme::Bounded => {
            z.push(Uniform::new_inclusive(0.0, 4.0).expect("valid bounds").sample(rng));
            let rest = Uniform::new_inclusive(-2.0, 2.0).expect("valid bounds");
            for _ in 1..d_z {
                z.push(rest.sample(rng));
            }
        }
    }
    z
}

/// One individual's covariates: x laid out as [t][good][k], plus z.
pub fn draw_covariates(config: &DgpConfig, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let z = draw_z(config.covariate_scheme, config.d_z, rng);
    let mut x = Vec::with_capacity(config.t_len * 2 * config.d_x);
    for _ in 0..config.t_len {
        draw_x_period(config, rng, &mut x);
    }
    (x, z)
}

const NORMAL_MEAN: [f64; 2] = [2.0, -2.0];
const NORMAL_RHO: f64 = -0.7;

fn draw_error_pair(design: Design, rng: &mut Rng) -> [f64; 2] {
    if design.gumbel_errors() {
        let g = Gumbel::new(0.0, 1.0).expect("valid scale");
        [g.sample(rng), g.sample(rng)]
    } else {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        [
            NORMAL_MEAN[0] + z1,
            NORMAL_MEAN[1] + NORMAL_RHO * z1 + (1.0 - NORMAL_RHO * NORMAL_RHO).sqrt() * z2,
        ]
    }
}

/// Idiosyncratic shocks for n individuals and t_len periods, laid out [i][t].
pub fn draw_errors(design: Design, n: usize, t_len: usize, rng: &mut Rng) -> Vec<[f64; 2]> {
    (0..n * t_len).map(|_| draw_error_pair(design, rng)).collect()
}

/// Fixed effects (α_A, α_B) from time-averaged covariates and standard normal noise v.
pub fn fixed_effects(design: Design, xbar_a: &[f64], xbar_b: &[f64], beta: &[f64], v: [f64; 2]) -> [f64; 2] {
    let ia = dot_unchecked(xbar_a, beta);
    let ib = dot_unchecked(xbar_b, beta);
    if design.additive_effects() {
        [ia / 2.0 + v[0], ib / 2.0 + v[1]]
    } else {
        [(ia / 2.0 - ib) * (1.0 + v[0]), (ib / 2.0 - ia) * (1.0 + v[1])]
    }
}

/// Simulates a panel. Each individual draws z, v and any latent Γ from its own stream;
/// each period draws covariates and shocks from a stream keyed by (seed, i, t).
pub fn simulate(config: &DgpConfig) -> Result<SimulatedPanel> {
    config.validate()?;
    let (n, t_len, d_x, d_z) = (config.n, config.t_len, config.d_x, config.d_z);
    let beta = &config.theta_true.beta;
    let mut x_all = Vec::with_capacity(n * t_len * 2 * d_x);
    let mut z_all = Vec::with_capacity(n * d_z);
    let mut y_all = Vec::with_capacity(n * t_len);
    let mut latent = Vec::with_capacity(n);

    for i in 0..n {
        let mut rng_i = rng::stream(config.seed, i as u64, rng::INDIVIDUAL);
        let z = draw_z(config.covariate_scheme, d_z, &mut rng_i);
        let v = [rng_i.sample::<f64, _>(StandardNormal), rng_i.sample::<f64, _>(StandardNormal)];
        let gamma = match config.latent_gamma {
            None => dot_unchecked(&z, &config.theta_true.gamma),
            Some(LatentGamma::Constant { value }) => value,
            Some(LatentGamma::TwoPoint { eta, g_plus, g_minus }) => {
                let u: f64 = rng_i.random();
                if u < eta {
                    g_plus
                } else {
                    -g_minus
                }
            }
        };

        let start = x_all.len();
        let mut eps = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let mut rng_t = rng::stream(config.seed, i as u64, t as u64);
            draw_x_period(config, &mut rng_t, &mut x_all);
            eps.push(draw_error_pair(config.design, &mut rng_t));
        }
        let xi = &x_all[start..];
        let mut xbar = vec![0.0; 2 * d_x];
        for t in 0..t_len {
            for (k, acc) in xbar.iter_mut().enumerate() {
                *acc += xi[t * 2 * d_x + k] / t_len as f64;
            }
        }
        let alpha = fixed_effects(config.design, &xbar[..d_x], &xbar[d_x..], beta, v);
        for t in 0..t_len {
            let xa = &xi[t * 2 * d_x..t * 2 * d_x + d_x];
            let xb = &xi[t * 2 * d_x + d_x..(t + 1) * 2 * d_x];
            let ua = dot_unchecked(xa, beta) + alpha[0] + eps[t][0];
            let ub = dot_unchecked(xb, beta) + alpha[1] + eps[t][1];
            let u = [0.0, ua, ub, ua + ub + gamma];
            if u.iter().any(|v| v.is_nan()) {
                return Err(Error::NonFinite(format!("utilities of individual {i}")));
            }
            y_all.push(choose_finite(&u));
        }
        z_all.extend_from_slice(&z);
        latent.push(LatentDraw { alpha, eps, gamma });
    }

    let panel = ObservationPanel::new(n, t_len, d_x, d_z, x_all, z_all, y_all)?;
    Ok(SimulatedPanel { panel, latent })
}

/// Empirical choice shares per period, indexed [t][choice].
pub fn choice_shares(panel: &ObservationPanel) -> Vec<[f64; 4]> {
    let n = panel.n().max(1) as f64;
    (0..panel.t_len())
        .map(|t| {
            let mut s = [0.0; 4];
            for i in 0..panel.n() {
                s[panel.y(i, t).index()] += 1.0 / n;
            }
            s
        })
        .collect()
}

pub fn count_choice(panel: &ObservationPanel, c: Choice) -> usize {
    panel.choices().iter().filter(|&&y| y == c).count()
}
