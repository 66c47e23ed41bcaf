//! Core types for the two-good bundle choice model.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One of the two goods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Good {
    A,
    B,
}

impl Good {
    pub const BOTH: [Good; 2] = [Good::A, Good::B];

    pub fn index(self) -> usize {
        match self {
            Good::A => 0,
            Good::B => 1,
        }
    }

    pub fn other(self) -> Good {
        match self {
            Good::A => Good::B,
            Good::B => Good::A,
        }
    }
}

/// A choice alternative. The declaration order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Choice {
    O,
    A,
    B,
    AB,
}

impl Choice {
    pub const ALL: [Choice; 4] = [Choice::O, Choice::A, Choice::B, Choice::AB];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Choice> {
        Choice::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("choice index {i} out of range")))
    }

    pub fn label(self) -> &'static str {
        match self {
            Choice::O => "O",
            Choice::A => "A",
            Choice::B => "B",
            Choice::AB => "AB",
        }
    }

    /// Whether the alternative includes the given good (membership in D_A or D_B).
    pub fn contains(self, good: Good) -> bool {
        matches!(
            (self, good),
            (Choice::A, Good::A) | (Choice::B, Good::B) | (Choice::AB, _)
        )
    }

    pub fn from_bits(has_a: bool, has_b: bool) -> Choice {
        match (has_a, has_b) {
            (false, false) => Choice::O,
            (true, false) => Choice::A,
            (false, true) => Choice::B,
            (true, true) => Choice::AB,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        (self.contains(Good::A), self.contains(Good::B))
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Choice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Choice> {
        match s.trim() {
            "O" | "0" => Ok(Choice::O),
            "A" => Ok(Choice::A),
            "B" => Ok(Choice::B),
            "AB" => Ok(Choice::AB),
            other => Err(Error::InvalidArgument(format!("unknown choice label {other:?}"))),
        }
    }
}

/// A subset of the four alternatives, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChoiceSet(u8);

impl ChoiceSet {
    pub const EMPTY: ChoiceSet = ChoiceSet(0);
    pub const FULL: ChoiceSet = ChoiceSet(0b1111);
    pub const D_A: ChoiceSet = ChoiceSet((1 << 1) | (1 << 3));
    pub const D_B: ChoiceSet = ChoiceSet((1 << 2) | (1 << 3));

    pub fn single(c: Choice) -> ChoiceSet {
        ChoiceSet(1 << c.index())
    }

    pub fn of(choices: &[Choice]) -> ChoiceSet {
        ChoiceSet(choices.iter().fold(0, |m, c| m | (1 << c.index())))
    }

    pub fn demand(good: Good) -> ChoiceSet {
        match good {
            Good::A => ChoiceSet::D_A,
            Good::B => ChoiceSet::D_B,
        }
    }

    pub fn contains(self, c: Choice) -> bool {
        self.0 & (1 << c.index()) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Choice> {
        Choice::ALL.into_iter().filter(move |c| self.contains(*c))
    }

    /// Total probability of the set under a probability vector indexed by `Choice::index`.
    pub fn mass(self, p: &[f64; 4]) -> f64 {
        self.iter().map(|c| p[c.index()]).sum()
    }
}

/// Structural parameters: index coefficients and complementarity coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Theta {
    pub fn new(beta: Vec<f64>, gamma: Vec<f64>) -> Result<Theta> {
        if beta.is_empty() || gamma.is_empty() {
            return Err(Error::Dimension("beta and gamma need at least one coordinate".into()));
        }
        if beta.iter().chain(gamma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("theta".into()));
        }
        Ok(Theta { beta, gamma })
    }

    /// Builds a normalized parameter from the signs of the first coordinates and the free rest.
    pub fn from_free(beta_sign: f64, beta_free: &[f64], gamma_sign: f64, gamma_free: &[f64]) -> Theta {
        let mut beta = Vec::with_capacity(beta_free.len() + 1);
        beta.push(beta_sign.signum());
        beta.extend_from_slice(beta_free);
        let mut gamma = Vec::with_capacity(gamma_free.len() + 1);
        gamma.push(gamma_sign.signum());
        gamma.extend_from_slice(gamma_free);
        Theta { beta, gamma }
    }

    /// Rescales each block so that its first coordinate has unit magnitude.
    pub fn normalized(&self) -> Result<Theta> {
        let b0 = self.beta[0].abs();
        let g0 = self.gamma[0].abs();
        if b0 == 0.0 || g0 == 0.0 {
            return Err(Error::InvalidArgument("cannot normalize a zero leading coordinate".into()));
        }
        Ok(Theta {
            beta: self.beta.iter().map(|v| v / b0).collect(),
            gamma: self.gamma.iter().map(|v| v / g0).collect(),
        })
    }

    pub fn is_normalized(&self) -> bool {
        self.beta[0].abs() == 1.0 && self.gamma[0].abs() == 1.0
    }

    pub fn d_x(&self) -> usize {
        self.beta.len()
    }

    pub fn d_z(&self) -> usize {
        self.gamma.len()
    }
}

/// Individual-level unobservables for one simulated individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDraw {
    pub alpha: [f64; 2],
    /// Idiosyncratic shocks per period, indexed by good.
    pub eps: Vec<[f64; 2]>,
    /// Complementarity realized for this individual.
    pub gamma: f64,
}

/// A balanced panel of observed choices and covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPanel {
    n: usize,
    t_len: usize,
    d_x: usize,
    d_z: usize,
    // layout [i][t][good][k]
    x: Vec<f64>,
    // layout [i][k]
    z: Vec<f64>,
    // layout [i][t]
    y: Vec<Choice>,
}

impl ObservationPanel {
    pub fn new(
        n: usize,
        t_len: usize,
        d_x: usize,
        d_z: usize,
        x: Vec<f64>,
        z: Vec<f64>,
        y: Vec<Choice>,
    ) -> Result<ObservationPanel> {
        if d_x == 0 || d_z == 0 {
            return Err(Error::Dimension("panel needs d_x, d_z >= 1".into()));
        }
        if t_len < 2 {
            return Err(Error::Dimension(format!("panel needs at least two periods, got {t_len}")));
        }
        if x.len() != n * t_len * 2 * d_x {
            return Err(Error::Dimension(format!(
                "x has {} values, expected {}",
                x.len(),
                n * t_len * 2 * d_x
            )));
        }
        if z.len() != n * d_z {
            return Err(Error::Dimension(format!("z has {} values, expected {}", z.len(), n * d_z)));
        }
        if y.len() != n * t_len {
            return Err(Error::Dimension(format!("y has {} values, expected {}", y.len(), n * t_len)));
        }
        if x.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("panel covariates".into()));
        }
        Ok(ObservationPanel { n, t_len, d_x, d_z, x, z, y })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn d_x(&self) -> usize {
        self.d_x
    }

    pub fn d_z(&self) -> usize {
        self.d_z
    }

    pub fn x(&self, i: usize, t: usize, good: Good) -> &[f64] {
        let start = ((i * self.t_len + t) * 2 + good.index()) * self.d_x;
        &self.x[start..start + self.d_x]
    }

    pub fn z(&self, i: usize) -> &[f64] {
        &self.z[i * self.d_z..(i + 1) * self.d_z]
    }

    pub fn y(&self, i: usize, t: usize) -> Choice {
        self.y[i * self.t_len + t]
    }

    pub fn choices(&self) -> &[Choice] {
        &self.y
    }

    /// Keeps the listed individuals, in the given order.
    pub fn subset(&self, ids: &[usize]) -> Result<ObservationPanel> {
        let per_x = self.t_len * 2 * self.d_x;
        let mut x = Vec::with_capacity(ids.len() * per_x);
        let mut z = Vec::with_capacity(ids.len() * self.d_z);
        let mut y = Vec::with_capacity(ids.len() * self.t_len);
        for &i in ids {
            if i >= self.n {
                return Err(Error::InvalidArgument(format!("individual {i} out of range")));
            }
            x.extend_from_slice(&self.x[i * per_x..(i + 1) * per_x]);
            z.extend_from_slice(self.z(i));
            y.extend_from_slice(&self.y[i * self.t_len..(i + 1) * self.t_len]);
        }
        ObservationPanel::new(ids.len(), self.t_len, self.d_x, self.d_z, x, z, y)
    }

    pub fn with_choices(&self, y: Vec<Choice>) -> Result<ObservationPanel> {
        ObservationPanel::new(self.n, self.t_len, self.d_x, self.d_z, self.x.clone(), self.z.clone(), y)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("dot product of lengths {} and {}", a.len(), b.len())));
    }
    Ok(dot_unchecked(a, b))
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Complementarity effect Γ(z) = z'γ.
pub fn gamma_value(z: &[f64], gamma: &[f64]) -> Result<f64> {
    let g = dot(z, gamma)?;
    if !g.is_finite() {
        return Err(Error::NonFinite("complementarity".into()));
    }
    Ok(g)
}

/// Utilities of (O, A, B, AB) for one individual-period.
pub fn utilities(
    x_a: &[f64],
    x_b: &[f64],
    z: &[f64],
    alpha: [f64; 2],
    eps: [f64; 2],
    theta: &Theta,
) -> Result<[f64; 4]> {
    let gamma = gamma_value(z, &theta.gamma)?;
    let u_a = dot(x_a, &theta.beta)? + alpha[0] + eps[0];
    let u_b = dot(x_b, &theta.beta)? + alpha[1] + eps[1];
    Ok([0.0, u_a, u_b, u_a + u_b + gamma])
}

/// Utility-maximizing alternative; ties go to the earliest of O, A, B, AB.
pub fn choose(u: &[f64; 4]) -> Result<Choice> {
    if u.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("utilities".into()));
    }
    Ok(choose_finite(u))
}

#[inline]
pub(crate) fn choose_finite(u: &[f64; 4]) -> Choice {
    let mut best = 0;
    for j in 1..4 {
        if u[j] > u[best] {
            best = j;
        }
    }
    Choice::ALL[best]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_value_examples() {
        assert_eq!(gamma_value(&[1.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(gamma_value(&[2.0, -3.0], &[1.0, 1.0]).unwrap(), -1.0);
        assert!(matches!(gamma_value(&[1.0], &[1.0, 1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn choose_examples() {
        assert_eq!(choose(&[0.0, 1.0, 0.5, 1.2]).unwrap(), Choice::AB);
        assert_eq!(choose(&[0.0, -1.0, -2.0, -4.0]).unwrap(), Choice::O);
        assert_eq!(choose(&[0.0, 2.0, 2.0, 1.0]).unwrap(), Choice::A);
        assert_eq!(choose(&[0.0, 0.0, 0.0, 0.0]).unwrap(), Choice::O);
        assert!(choose(&[0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn bundle_utility_is_additive_plus_gamma() {
        let theta = Theta::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let u = utilities(&[1.0, 2.0], &[0.5, -1.0], &[1.0, 2.0], [0.3, -0.2], [0.1, 0.4], &theta).unwrap();
        assert_eq!(u[0], 0.0);
        assert!((u[3] - (u[1] + u[2] + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn choice_set_mass() {
        let p = [0.1, 0.2, 0.3, 0.4];
        assert!((ChoiceSet::D_A.mass(&p) - 0.6).abs() < 1e-12);
        assert!((ChoiceSet::D_B.mass(&p) - 0.7).abs() < 1e-12);
        assert!((ChoiceSet::FULL.mass(&p) - 1.0).abs() < 1e-12);
        assert_eq!(ChoiceSet::EMPTY.mass(&p), 0.0);
    }

    #[test]
    fn choice_labels_roundtrip() {
        for c in Choice::ALL {
            assert_eq!(c.label().parse::<Choice>().unwrap(), c);
            let (a, b) = c.bits();
            assert_eq!(Choice::from_bits(a, b), c);
        }
    }

    #[test]
    fn panel_rejects_bad_dimensions() {
        let err = ObservationPanel::new(1, 2, 1, 1, vec![0.0; 3], vec![0.0], vec![Choice::O; 2]);
        assert!(matches!(err, Err(Error::Dimension(_))));
        let err = ObservationPanel::new(1, 1, 1, 1, vec![0.0; 2], vec![0.0], vec![Choice::O]);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }
}
