//! Choice-region geometry in the error plane, transportation feasibility with forbidden cells,
//! closed-form transport plans, and a membership oracle for the sharp identified set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, Choice, Theta};
use crate::moments::IndexDelta;

/// Half-plane n·ε ≤ c in (ε_A, ε_B).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub normal: [f64; 2],
    pub offset: f64,
}

impl HalfPlane {
    pub fn slack(&self, e: [f64; 2]) -> f64 {
        self.offset - self.normal[0] * e[0] - self.normal[1] * e[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub constraints: Vec<HalfPlane>,
}

impl Region {
    pub fn contains(&self, e: [f64; 2], margin: f64) -> bool {
        self.constraints.iter().all(|h| h.slack(e) >= margin)
    }
}

fn hp(na: f64, nb: f64, c: f64) -> HalfPlane {
    HalfPlane { normal: [na, nb], offset: c }
}

/// Regions E_j in the error plane for index levels δ = (δ_A, δ_B) with fixed effects folded in.
/// With a = δ_A + ε_A and b = δ_B + ε_B, choice j is optimal on E_j.
pub fn choice_regions(delta: [f64; 2], gamma: f64) -> [Region; 4] {
    let [da, db] = delta;
    let g = gamma;
    // a ≤ 0, b ≤ 0, a + b + Γ ≤ 0
    let o = vec![hp(1.0, 0.0, -da), hp(0.0, 1.0, -db), hp(1.0, 1.0, -da - db - g)];
    // a ≥ 0, a ≥ b, b + Γ ≤ 0
    let a = vec![hp(-1.0, 0.0, da), hp(-1.0, 1.0, da - db), hp(0.0, 1.0, -db - g)];
    // b ≥ 0, b ≥ a, a + Γ ≤ 0
    let b = vec![hp(0.0, -1.0, db), hp(1.0, -1.0, db - da), hp(1.0, 0.0, -da - g)];
    // a + b + Γ ≥ 0, b + Γ ≥ 0, a + Γ ≥ 0
    let ab = vec![hp(-1.0, -1.0, da + db + g), hp(0.0, -1.0, db + g), hp(-1.0, 0.0, da + g)];
    [Region { constraints: o }, Region { constraints: a }, Region { constraints: b }, Region { constraints: ab }]
}

/// Regions at covariates x for parameter θ: δ_ℓ = x_ℓ'β, Γ = z'γ.
pub fn regions_at(x: [&[f64]; 2], z: &[f64], theta: &Theta) -> Result<[Region; 4]> {
    Ok(choice_regions([dot(x[0], &theta.beta)?, dot(x[1], &theta.beta)?], dot(z, &theta.gamma)?))
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let d = det3(m);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = rhs[r];
        }
        *o = det3(mc) / d;
    }
    Some(out)
}

/// Radius of the largest disc inside the polygon (capped at 1); negative or None when empty.
pub fn chebyshev_radius(constraints: &[HalfPlane]) -> Option<f64> {
    let scale = 1.0 + constraints.iter().map(|h| h.offset.abs()).fold(0.0, f64::max);
    let big = 1e3 * scale;
    // rows: n·ε + |n| t ≤ c, plus a bounding box and t ≤ 1
    let mut rows: Vec<([f64; 3], f64)> = constraints
        .iter()
        .map(|h| ([h.normal[0], h.normal[1], h.normal[0].hypot(h.normal[1])], h.offset))
        .collect();
    for (na, nb) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
        rows.push(([na, nb, 1.0], big));
    }
    rows.push(([0.0, 0.0, 1.0], 1.0));
    let tol = 1e-9 * scale;
    let mut best: Option<f64> = None;
    let m = rows.len();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let Some(p) = solve3([rows[i].0, rows[j].0, rows[k].0], [rows[i].1, rows[j].1, rows[k].1]) else {
                    continue;
                };
                let feasible = rows.iter().all(|(a, c)| a[0] * p[0] + a[1] * p[1] + a[2] * p[2] <= c + tol);
                if feasible && best.is_none_or(|b| p[2] > b) {
                    best = Some(p[2]);
                }
            }
        }
    }
    best
}

/// True when the polygon has empty interior.
pub fn polygon_empty(constraints: &[HalfPlane]) -> bool {
    let scale = 1.0 + constraints.iter().map(|h| h.offset.abs()).fold(0.0, f64::max);
    chebyshev_radius(constraints).is_none_or(|r| r <= 1e-9 * scale)
}

/// J_{j,k} = E_j(x_s) ∩ E_k(x_t) has empty interior. Lower-dimensional intersections carry no
/// probability under a continuous error law and count as empty.
pub fn intersection_empty_at(j: Choice, k: Choice, delta_s: [f64; 2], delta_t: [f64; 2], gamma: f64) -> bool {
    let rs = choice_regions(delta_s, gamma);
    let rt = choice_regions(delta_t, gamma);
    let mut c = rs[j.index()].constraints.clone();
    c.extend_from_slice(&rt[k.index()].constraints);
    polygon_empty(&c)
}

pub fn intersection_empty(j: Choice, k: Choice, x_s: [&[f64]; 2], x_t: [&[f64]; 2], z: &[f64], theta: &Theta) -> Result<bool> {
    let ds = [dot(x_s[0], &theta.beta)?, dot(x_s[1], &theta.beta)?];
    let dt = [dot(x_t[0], &theta.beta)?, dot(x_t[1], &theta.beta)?];
    Ok(intersection_empty_at(j, k, ds, dt, dot(z, &theta.gamma)?))
}

/// Forbidden cells (j, k) for index changes Δδ and complementarity Γ; only differences matter.
pub fn forbidden_mask(delta: &IndexDelta, gamma: f64) -> [[bool; 4]; 4] {
    let mut mask = [[false; 4]; 4];
    for j in Choice::ALL {
        for k in Choice::ALL {
            mask[j.index()][k.index()] = intersection_empty_at(j, k, [delta.d_a, delta.d_b], [0.0, 0.0], gamma);
        }
    }
    mask
}

pub const MARGINAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportProblem {
    pub row_marginals: [f64; 4],
    pub col_marginals: [f64; 4],
    pub forbidden: [[bool; 4]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub r: [[f64; 4]; 4],
}

impl TransportPlan {
    pub fn row_sums(&self) -> [f64; 4] {
        self.r.map(|row| row.iter().sum())
    }

    pub fn col_sums(&self) -> [f64; 4] {
        let mut c = [0.0; 4];
        for row in &self.r {
            for (k, v) in row.iter().enumerate() {
                c[k] += v;
            }
        }
        c
    }

    /// Nonnegative, zero on forbidden cells, and reproduces both marginals within `tol`.
    pub fn satisfies(&self, problem: &TransportProblem, tol: f64) -> bool {
        let nonneg = self.r.iter().flatten().all(|&v| v >= -tol);
        let zeros = (0..4).all(|j| (0..4).all(|k| !problem.forbidden[j][k] || self.r[j][k].abs() <= tol));
        let rows = self.row_sums().iter().zip(&problem.row_marginals).all(|(a, b)| (a - b).abs() <= tol);
        let cols = self.col_sums().iter().zip(&problem.col_marginals).all(|(a, b)| (a - b).abs() <= tol);
        nonneg && zeros && rows && cols
    }
}

fn check_marginal(p: &[f64; 4], name: &str) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < -MARGINAL_TOL) {
        return Err(Error::InvalidArgument(format!("{name} marginal has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > MARGINAL_TOL {
        return Err(Error::InvalidArgument(format!("{name} marginal sums to {s}")));
    }
    Ok(())
}

impl TransportProblem {
    pub fn new(row_marginals: [f64; 4], col_marginals: [f64; 4], forbidden: [[bool; 4]; 4]) -> Result<TransportProblem> {
        check_marginal(&row_marginals, "row")?;
        check_marginal(&col_marginals, "column")?;
        Ok(TransportProblem { row_marginals, col_marginals, forbidden })
    }
}

/// Max-flow source → rows → allowed cells → columns → sink; feasible iff the flow saturates.
pub fn feasible_transport(problem: &TransportProblem) -> Option<TransportPlan> {
    // nodes: 0 source, 1..=4 rows, 5..=8 columns, 9 sink
    const N: usize = 10;
    let mut cap = [[0.0f64; N]; N];
    for j in 0..4 {
        cap[0][1 + j] = problem.row_marginals[j].max(0.0);
        cap[5 + j][9] = problem.col_marginals[j].max(0.0);
        for k in 0..4 {
            if !problem.forbidden[j][k] {
                cap[1 + j][5 + k] = 2.0;
            }
        }
    }
    let original = cap;
    let mut total = 0.0;
    loop {
        // breadth-first search for a shortest augmenting path
        let mut prev = [usize::MAX; N];
        prev[0] = 0;
        let mut queue = vec![0usize];
        let mut head = 0;
        while head < queue.len() && prev[9] == usize::MAX {
            let u = queue[head];
            head += 1;
            for v in 0..N {
                if prev[v] == usize::MAX && cap[u][v] > 1e-15 {
                    prev[v] = u;
                    queue.push(v);
                }
            }
        }
        if prev[9] == usize::MAX {
            break;
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = 9;
        while v != 0 {
            let u = prev[v];
            bottleneck = bottleneck.min(cap[u][v]);
            v = u;
        }
        let mut v = 9;
        while v != 0 {
            let u = prev[v];
            cap[u][v] -= bottleneck;
            cap[v][u] += bottleneck;
            v = u;
        }
        total += bottleneck;
    }
    if total < 1.0 - MARGINAL_TOL {
        return None;
    }
    let mut r = [[0.0; 4]; 4];
    for j in 0..4 {
        for k in 0..4 {
            if !problem.forbidden[j][k] {
                r[j][k] = (original[1 + j][5 + k] - cap[1 + j][5 + k]).max(0.0);
            }
        }
    }
    Some(TransportPlan { r })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosedFormCase {
    /// Δδ_A ≥ Δδ_AB ≥ 0 ≥ Δδ_B and Γ ≥ max(0, min(Δδ_A, −Δδ_B)).
    One,
    /// Δδ_A ≥ Δδ_AB ≥ 0 ≥ Δδ_B and 0 ≤ Γ < min(Δδ_A, −Δδ_B).
    Two,
}

const IO: usize = 0;
const IA: usize = 1;
const IB: usize = 2;
const IAB: usize = 3;

fn require(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(format!("violated inequality: {what}")))
    }
}

/// The printed constructions for the two base cases.
pub fn construct_r_closed_form(case: ClosedFormCase, p_s: &[f64; 4], p_t: &[f64; 4]) -> Result<TransportPlan> {
    check_marginal(p_s, "P_s")?;
    check_marginal(p_t, "P_t")?;
    let tol = MARGINAL_TOL;
    require(p_t[IA] <= p_s[IA] + tol, "P_t(A) <= P_s(A)")?;
    require(p_t[IB] + tol >= p_s[IB], "P_t(B) >= P_s(B)")?;
    require(p_t[IA] + p_t[IAB] <= p_s[IA] + p_s[IAB] + tol, "P_t(A) + P_t(AB) <= P_s(A) + P_s(AB)")?;
    let mut r = [[0.0; 4]; 4];
    match case {
        ClosedFormCase::One => {
            require(p_t[IB] + p_s[IA] <= 1.0 + tol, "P_t(B) + P_s(A) <= 1")?;
            r[IA][IA] = p_t[IA];
            r[IB][IB] = p_s[IB];
            r[IO][IB] = (p_t[IB] - p_s[IB]).min(p_s[IO]);
            r[IAB][IB] = p_t[IB] - p_s[IB] - r[IO][IB];
            r[IO][IO] = p_s[IO] - r[IO][IB];
            r[IA][IAB] = (p_s[IA] - p_t[IA]).min(p_t[IAB]);
            r[IA][IO] = p_s[IA] - p_t[IA] - r[IA][IAB];
            r[IAB][IAB] = p_t[IAB] - r[IA][IAB];
            let pt_a_ab = p_t[IA] + p_t[IAB];
            let ps_b_o = p_s[IB] + p_s[IO];
            r[IAB][IO] = match (p_s[IA] >= pt_a_ab, p_t[IB] >= ps_b_o) {
                (true, true) => 1.0 - p_t[IB] - p_s[IA],
                (true, false) => p_s[IAB],
                (false, true) => p_t[IO],
                (false, false) => p_s[IA] + p_s[IAB] - pt_a_ab,
            };
        }
        ClosedFormCase::Two => {
            require(
                p_t[IB] + p_t[IAB] + tol >= p_s[IB] + p_s[IAB],
                "P_t(B) + P_t(AB) >= P_s(B) + P_s(AB)",
            )?;
            r[IB][IB] = p_s[IB];
            r[IA][IA] = p_t[IA];
            r[IO][IO] = p_t[IO].min(p_s[IO]);
            r[IO][IB] = p_s[IO] - r[IO][IO];
            r[IA][IO] = p_t[IO] - r[IO][IO];
            r[IAB][IAB] = p_t[IAB].min(p_s[IAB]);
            r[IAB][IB] = p_s[IAB] - r[IAB][IAB];
            r[IA][IAB] = p_t[IAB] - r[IAB][IAB];
            r[IA][IB] = p_s[IA] + p_t[IB] - 1.0 + r[IAB][IAB] + r[IO][IO];
        }
    }
    for v in r.iter_mut().flatten() {
        if *v < 0.0 && *v > -tol {
            *v = 0.0;
        }
    }
    Ok(TransportPlan { r })
}

pub fn closed_form_case(delta: &IndexDelta, gamma: f64) -> Option<ClosedFormCase> {
    let (da, db) = (delta.d_a, delta.d_b);
    let pattern = da >= da + db && da + db >= 0.0 && 0.0 >= db;
    if !pattern || gamma < 0.0 {
        return None;
    }
    if gamma >= da.min(-db) {
        Some(ClosedFormCase::One)
    } else {
        Some(ClosedFormCase::Two)
    }
}

/// Relabelings that map the model onto itself: flipping ownership of A or of B, swapping the goods,
/// and swapping the two periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Symmetry {
    pub flip_a: bool,
    pub flip_b: bool,
    pub swap_goods: bool,
    pub swap_periods: bool,
}

impl Symmetry {
    pub fn all() -> Vec<Symmetry> {
        (0..16u8)
            .map(|m| Symmetry { flip_a: m & 1 != 0, flip_b: m & 2 != 0, swap_goods: m & 4 != 0, swap_periods: m & 8 != 0 })
            .collect()
    }

    /// Image of a choice under the good-level operations, applied in the order flip A, flip B, swap.
    pub fn map_choice(&self, c: Choice) -> Choice {
        let (mut a, mut b) = c.bits();
        if self.flip_a {
            a = !a;
        }
        if self.flip_b {
            b = !b;
        }
        if self.swap_goods {
            std::mem::swap(&mut a, &mut b);
        }
        Choice::from_bits(a, b)
    }

    pub fn map_parameters(&self, delta: &IndexDelta, gamma: f64) -> (IndexDelta, f64) {
        let (mut da, mut db, mut g) = (delta.d_a, delta.d_b, gamma);
        if self.flip_a {
            da = -da;
            g = -g;
        }
        if self.flip_b {
            db = -db;
            g = -g;
        }
        if self.swap_goods {
            std::mem::swap(&mut da, &mut db);
        }
        if self.swap_periods {
            da = -da;
            db = -db;
        }
        (IndexDelta { d_a: da, d_b: db }, g)
    }

    pub fn map_marginals(&self, p_s: &[f64; 4], p_t: &[f64; 4]) -> ([f64; 4], [f64; 4]) {
        let mut qs = [0.0; 4];
        let mut qt = [0.0; 4];
        for c in Choice::ALL {
            let m = self.map_choice(c).index();
            qs[m] = p_s[c.index()];
            qt[m] = p_t[c.index()];
        }
        if self.swap_periods {
            (qt, qs)
        } else {
            (qs, qt)
        }
    }

    /// Pulls a plan for the transformed problem back to the original labels.
    pub fn pull_back(&self, plan: &TransportPlan) -> TransportPlan {
        let mut r = [[0.0; 4]; 4];
        for j in Choice::ALL {
            for k in Choice::ALL {
                let (mj, mk) = (self.map_choice(j).index(), self.map_choice(k).index());
                r[j.index()][k.index()] = if self.swap_periods { plan.r[mk][mj] } else { plan.r[mj][mk] };
            }
        }
        TransportPlan { r }
    }
}

/// Finds a relabeling that maps (Δδ, Γ) into one of the printed cases.
pub fn closed_form_symmetry(delta: &IndexDelta, gamma: f64) -> Option<(Symmetry, ClosedFormCase)> {
    Symmetry::all().into_iter().find_map(|s| {
        let (d, g) = s.map_parameters(delta, gamma);
        closed_form_case(&d, g).map(|c| (s, c))
    })
}

/// Closed-form plan for any sign pattern reachable from the printed cases by relabeling.
pub fn closed_form_plan(p_s: &[f64; 4], p_t: &[f64; 4], delta: &IndexDelta, gamma: f64) -> Result<TransportPlan> {
    let (sym, case) = closed_form_symmetry(delta, gamma).ok_or_else(|| {
        Error::NoClosedForm(format!("no closed form for Δδ = ({}, {}), Γ = {gamma}", delta.d_a, delta.d_b))
    })?;
    let (qs, qt) = sym.map_marginals(p_s, p_t);
    Ok(sym.pull_back(&construct_r_closed_form(case, &qs, &qt)?))
}

/// One covariate pair of a discrete instance with its observed marginal CCPs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalizePair {
    pub p_s: [f64; 4],
    pub p_t: [f64; 4],
    /// [x_A, x_B] in period s and t.
    pub x_s: [Vec<f64>; 2],
    pub x_t: [Vec<f64>; 2],
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalizeInstance {
    pub pairs: Vec<RationalizePair>,
    pub theta: Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalizeVerdict {
    pub rationalizable: bool,
    pub first_infeasible: Option<usize>,
}

pub fn pair_feasible(pair: &RationalizePair, theta: &Theta) -> Result<bool> {
    let ds = [dot(&pair.x_s[0], &theta.beta)?, dot(&pair.x_s[1], &theta.beta)?];
    let dt = [dot(&pair.x_t[0], &theta.beta)?, dot(&pair.x_t[1], &theta.beta)?];
    let g = dot(&pair.z, &theta.gamma)?;
    let delta = IndexDelta { d_a: ds[0] - dt[0], d_b: ds[1] - dt[1] };
    let problem = TransportProblem::new(pair.p_s, pair.p_t, forbidden_mask(&delta, g))?;
    Ok(feasible_transport(&problem).is_some())
}

pub fn rationalize(instance: &RationalizeInstance) -> Result<RationalizeVerdict> {
    for (k, pair) in instance.pairs.iter().enumerate() {
        if !pair_feasible(pair, &instance.theta)? {
            return Ok(RationalizeVerdict { rationalizable: false, first_infeasible: Some(k) });
        }
    }
    Ok(RationalizeVerdict { rationalizable: true, first_infeasible: None })
}

pub fn rationalizable(pairs: &[RationalizePair], theta: &Theta) -> Result<bool> {
    Ok(rationalize(&RationalizeInstance { pairs: pairs.to_vec(), theta: theta.clone() })?.rationalizable)
}
