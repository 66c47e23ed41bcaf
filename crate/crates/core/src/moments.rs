//! Identifying-restriction indicators and the gated moment functions built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, gamma_value, Choice, ChoiceSet, Good, Theta};

/// Changes in covariate indices between two periods (or two covariate values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexDelta {
    pub d_a: f64,
    pub d_b: f64,
}

impl IndexDelta {
    pub fn new(d_a: f64, d_b: f64) -> IndexDelta {
        IndexDelta { d_a, d_b }
    }

    pub fn d_ab(&self) -> f64 {
        self.d_a + self.d_b
    }

    pub fn of_good(&self, good: Good) -> f64 {
        match good {
            Good::A => self.d_a,
            Good::B => self.d_b,
        }
    }

    pub fn of(&self, c: Choice) -> f64 {
        match c {
            Choice::O => 0.0,
            Choice::A => self.d_a,
            Choice::B => self.d_b,
            Choice::AB => self.d_ab(),
        }
    }

    /// The reversed comparison.
    pub fn reversed(&self) -> IndexDelta {
        IndexDelta { d_a: -self.d_a, d_b: -self.d_b }
    }
}

/// d_ℓ = (x_ℓs - x_ℓt)'β with covariates given per good as [x_A, x_B].
pub fn index_delta(x_s: [&[f64]; 2], x_t: [&[f64]; 2], beta: &[f64]) -> Result<IndexDelta> {
    let d = |g: usize| -> Result<f64> { Ok(dot(x_s[g], beta)? - dot(x_t[g], beta)?) };
    Ok(IndexDelta { d_a: d(0)?, d_b: d(1)? })
}

#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Choice-level restriction: some other alternative's index moved strictly less.
#[inline]
pub fn lambda_id1(delta: &IndexDelta, j: Choice) -> bool {
    let dj = delta.of(j);
    Choice::ALL.iter().any(|&k| k != j && dj > delta.of(k))
}

/// Demand-level restriction for good ℓ.
#[inline]
pub fn lambda_id2(delta: &IndexDelta, gamma_z: f64, good: Good) -> bool {
    let dl = delta.of_good(good);
    let dother = delta.of_good(good.other());
    dl > 0.0 || (dl + sign(gamma_z) * dother > 0.0 && gamma_z.abs() > -dl)
}

/// Restrictions on sums of probabilities, returned as (λ_L, λ_U).
#[inline]
pub fn lambda_id3(delta: &IndexDelta, gamma_z: f64) -> (bool, bool) {
    let l = gamma_z > -delta.d_a.min(delta.d_b) && delta.d_a + delta.d_b > 0.0;
    let u = gamma_z < delta.d_a.min(-delta.d_b) && delta.d_a - delta.d_b > 0.0;
    (l, u)
}

/// The eight gated moments for one ordered comparison.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentVector {
    pub g_o: f64,
    pub g_a: f64,
    pub g_b: f64,
    pub g_ab: f64,
    pub g_da: f64,
    pub g_db: f64,
    pub g_l: f64,
    pub g_u: f64,
}

impl MomentVector {
    pub fn as_array(&self) -> [f64; 8] {
        [self.g_o, self.g_a, self.g_b, self.g_ab, self.g_da, self.g_db, self.g_l, self.g_u]
    }

    /// L1 norm of the positive part.
    pub fn positive_l1(&self) -> f64 {
        self.as_array().iter().map(|v| v.max(0.0)).sum()
    }

    pub fn max_component(&self) -> f64 {
        self.as_array().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[inline]
fn gate(active: bool, v: f64) -> f64 {
    if active {
        0.0
    } else {
        v
    }
}

/// Moments at one comparison from CCP vectors (indexed O, A, B, AB), index changes and Γ.
pub fn moment_at(p_s: &[f64; 4], p_t: &[f64; 4], delta: &IndexDelta, gamma_z: f64) -> MomentVector {
    let diff = |c: Choice| p_s[c.index()] - p_t[c.index()];
    let (lam_l, lam_u) = lambda_id3(delta, gamma_z);
    MomentVector {
        g_o: gate(lambda_id1(delta, Choice::O), diff(Choice::O)),
        g_a: gate(lambda_id1(delta, Choice::A), diff(Choice::A)),
        g_b: gate(lambda_id1(delta, Choice::B), diff(Choice::B)),
        g_ab: gate(lambda_id1(delta, Choice::AB), diff(Choice::AB)),
        g_da: gate(
            lambda_id2(delta, gamma_z, Good::A),
            ChoiceSet::D_A.mass(p_s) - ChoiceSet::D_A.mass(p_t),
        ),
        g_db: gate(
            lambda_id2(delta, gamma_z, Good::B),
            ChoiceSet::D_B.mass(p_s) - ChoiceSet::D_B.mass(p_t),
        ),
        g_l: gate(lam_l, p_s[Choice::AB.index()] + p_t[Choice::O.index()] - 1.0),
        g_u: gate(lam_u, p_s[Choice::A.index()] + p_t[Choice::B.index()] - 1.0),
    }
}

/// Moments with the linear complementarity z'γ.
pub fn moment_vector(
    p_s: &[f64; 4],
    p_t: &[f64; 4],
    theta: &Theta,
    x_s: [&[f64]; 2],
    x_t: [&[f64]; 2],
    z: &[f64],
) -> Result<MomentVector> {
    check_probabilities(p_s)?;
    check_probabilities(p_t)?;
    let delta = index_delta(x_s, x_t, &theta.beta)?;
    let g = gamma_value(z, &theta.gamma)?;
    Ok(moment_at(p_s, p_t, &delta, g))
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < -1e-12 || *v > 1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("not a probability vector: {p:?}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("probabilities sum to {s}")));
    }
    Ok(())
}

/// Model variants with their own identifying restrictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelVariant {
    Base,
    /// Utility only weakly increasing in the covariate index.
    Nonseparable,
    /// `goods` goods, at most two per purchase; bundles other than AB have Γ ≤ 0.
    MultiGood { goods: usize },
    /// Cross-sectional data: comparisons are between covariate values instead of periods.
    CrossSectional,
}

/// Alternatives of the multi-good model; goods are numbered with A = 0, B = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MultiChoice {
    Outside,
    Single(usize),
    Pair(usize, usize),
}

impl MultiChoice {
    pub fn contains(&self, good: usize) -> bool {
        match *self {
            MultiChoice::Outside => false,
            MultiChoice::Single(j) => j == good,
            MultiChoice::Pair(a, b) => a == good || b == good,
        }
    }

    fn to_base(self) -> Result<Choice> {
        match self {
            MultiChoice::Outside => Ok(Choice::O),
            MultiChoice::Single(0) => Ok(Choice::A),
            MultiChoice::Single(1) => Ok(Choice::B),
            MultiChoice::Pair(0, 1) | MultiChoice::Pair(1, 0) => Ok(Choice::AB),
            other => Err(Error::InvalidArgument(format!("{other:?} is not a two-good alternative"))),
        }
    }
}

/// Alternatives in the canonical order: O, singles, then pairs (j1 < j2) lexicographically.
pub fn multigood_choices(goods: usize) -> Vec<MultiChoice> {
    let mut v = vec![MultiChoice::Outside];
    v.extend((0..goods).map(MultiChoice::Single));
    for a in 0..goods {
        for b in a + 1..goods {
            v.push(MultiChoice::Pair(a, b));
        }
    }
    v
}

/// Which restriction family to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RestrictionTarget {
    Choice(MultiChoice),
    /// Demand for good A (0) or B (1).
    Demand(usize),
    SumLower,
    SumUpper,
}

fn two_good_delta(deltas: &[f64]) -> Result<IndexDelta> {
    if deltas.len() != 2 {
        return Err(Error::Dimension(format!("expected 2 index changes, got {}", deltas.len())));
    }
    Ok(IndexDelta::new(deltas[0], deltas[1]))
}

fn demand_good(l: usize) -> Result<Good> {
    match l {
        0 => Ok(Good::A),
        1 => Ok(Good::B),
        _ => Err(Error::InvalidArgument(format!("demand restrictions exist only for goods A and B, got {l}"))),
    }
}

/// Indicator of the variant's restriction. `gamma_ab` is Γ for AB (only its sign matters
/// for the nonseparable and multi-good variants).
pub fn variant_lambda(
    variant: ModelVariant,
    deltas: &[f64],
    gamma_ab: f64,
    target: RestrictionTarget,
) -> Result<bool> {
    match variant {
        ModelVariant::Base | ModelVariant::CrossSectional => {
            let d = two_good_delta(deltas)?;
            Ok(match target {
                RestrictionTarget::Choice(c) => lambda_id1(&d, c.to_base()?),
                RestrictionTarget::Demand(l) => lambda_id2(&d, gamma_ab, demand_good(l)?),
                RestrictionTarget::SumLower => lambda_id3(&d, gamma_ab).0,
                RestrictionTarget::SumUpper => lambda_id3(&d, gamma_ab).1,
            })
        }
        ModelVariant::Nonseparable => {
            let d = two_good_delta(deltas)?;
            match target {
                RestrictionTarget::Choice(c) => {
                    let c = c.to_base()?;
                    let fa = if c.contains(Good::A) { -1.0 } else { 1.0 };
                    let fb = if c.contains(Good::B) { -1.0 } else { 1.0 };
                    Ok(fa * d.d_a < 0.0 || fb * d.d_b < 0.0)
                }
                RestrictionTarget::Demand(l) => {
                    let g = demand_good(l)?;
                    Ok(d.of_good(g) > 0.0 || sign(gamma_ab) * d.of_good(g.other()) > 0.0)
                }
                _ => Err(Error::InvalidArgument(
                    "sum restrictions are not available for the nonseparable model".into(),
                )),
            }
        }
        ModelVariant::MultiGood { goods } => {
            if goods < 2 {
                return Err(Error::InvalidArgument("multi-good model needs at least two goods".into()));
            }
            if deltas.len() != goods {
                return Err(Error::Dimension(format!("expected {goods} index changes, got {}", deltas.len())));
            }
            match target {
                RestrictionTarget::Choice(MultiChoice::Single(j)) if j < goods => {
                    Ok(deltas[j] > 0.0 || (0..goods).any(|k| k != j && deltas[k] < 0.0))
                }
                RestrictionTarget::Choice(MultiChoice::Pair(a, b)) if a < goods && b < goods && a != b => {
                    Ok(deltas[a] > 0.0
                        || deltas[b] > 0.0
                        || (0..goods).any(|k| k != a && k != b && deltas[k] < 0.0))
                }
                RestrictionTarget::Demand(l) if l < 2 => {
                    let o = 1 - l;
                    let others = 2..goods;
                    Ok(deltas[l] > 0.0
                        || deltas[l] + sign(gamma_ab) * deltas[o] > 0.0
                        || others.clone().any(|k| deltas[o] - deltas[k] > 0.0)
                        || others.into_iter().any(|k| deltas[k] < 0.0))
                }
                other => Err(Error::InvalidArgument(format!(
                    "no multi-good restriction for target {other:?}"
                ))),
            }
        }
    }
}

/// Gated moments for a variant. Probability vectors follow `multigood_choices` order for the
/// multi-good model and (O, A, B, AB) otherwise. Components are ordered: one per alternative
/// with a restriction, then the two demand moments, then (two-good separable only) L and U.
pub fn variant_moments(
    variant: ModelVariant,
    p_s: &[f64],
    p_t: &[f64],
    deltas: &[f64],
    gamma_ab: f64,
) -> Result<Vec<f64>> {
    let choices = match variant {
        ModelVariant::MultiGood { goods } => multigood_choices(goods),
        _ => multigood_choices(2),
    };
    if p_s.len() != choices.len() || p_t.len() != choices.len() {
        return Err(Error::Dimension(format!("expected {} probabilities", choices.len())));
    }
    check_probabilities(p_s)?;
    check_probabilities(p_t)?;
    let mut out = Vec::new();
    let mass = |p: &[f64], good: usize| -> f64 {
        // D_ℓ = {ℓ, AB}
        choices
            .iter()
            .zip(p)
            .filter(|(c, _)| matches!(c, MultiChoice::Single(j) if *j == good) || matches!(c, MultiChoice::Pair(0, 1)))
            .map(|(_, v)| *v)
            .sum()
    };
    for (k, c) in choices.iter().enumerate() {
        if matches!(variant, ModelVariant::MultiGood { .. }) && *c == MultiChoice::Outside {
            continue;
        }
        let lam = variant_lambda(variant, deltas, gamma_ab, RestrictionTarget::Choice(*c))?;
        out.push(gate(lam, p_s[k] - p_t[k]));
    }
    for l in 0..2 {
        let lam = variant_lambda(variant, deltas, gamma_ab, RestrictionTarget::Demand(l))?;
        out.push(gate(lam, mass(p_s, l) - mass(p_t, l)));
    }
    if matches!(variant, ModelVariant::Base | ModelVariant::CrossSectional) {
        let lam_l = variant_lambda(variant, deltas, gamma_ab, RestrictionTarget::SumLower)?;
        let lam_u = variant_lambda(variant, deltas, gamma_ab, RestrictionTarget::SumUpper)?;
        out.push(gate(lam_l, p_s[3] + p_t[0] - 1.0));
        out.push(gate(lam_u, p_s[1] + p_t[2] - 1.0));
    }
    Ok(out)
}
