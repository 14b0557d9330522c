// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Muckenhoupt-type constants for a weight on a finite space.
//!
//! Ball families are enumerated exactly: about every center, every distinct
//! closed ball (including the singleton) is a prefix of the distance order.
//! Worst-case subsets for the `A_∞`-type conditions are the superlevel sets
//! `{ω > λ}` of a ball (upper bounds on `ν(E)`) and the sublevel sets
//! `{ω ≤ λ}` (lower bounds); layer-cake extremality makes the sweep over
//! these sets exact for every subset of the ball.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::space::{
    doubling_with_index, BallIndex, BallRef, Bound, Convention, DoublingReport, Space, SpaceError,
    Weight,
};

/// Tolerance for the quantitative implication checks, relative to the larger
/// side and never below an absolute floor of the same size.
pub const IMPLICATION_RTOL: f64 = 1e-9;

pub const DEFAULT_P_GRID: [f64; 7] = [1.0, 1.25, 1.5, 2.0, 3.0, 4.0, 8.0];
pub const DEFAULT_EPS_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("not in any A_p: ω vanishes on a set of positive measure (point {point})")]
    VanishingWeight { point: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("invalid grid value {value} for {what}")]
    Grid { what: &'static str, value: f64 },
    #[error("reports were computed on different spaces or weights")]
    Mismatch,
}

/// Exponent and scale grids for a classification run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grids {
    pub p: Vec<f64>,
    pub eps: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            p: DEFAULT_P_GRID.to_vec(),
            eps: DEFAULT_EPS_GRID.to_vec(),
        }
    }
}

impl Grids {
    pub fn validate(&self) -> Result<(), WeightError> {
        if let Some(&p) = self.p.iter().find(|p| !(p.is_finite() && **p >= 1.0)) {
            return Err(WeightError::Grid {
                what: "p",
                value: p,
            });
        }
        if let Some(&e) = self
            .eps
            .iter()
            .find(|e| !(e.is_finite() && **e > 0.0 && **e < 1.0))
        {
            return Err(WeightError::Grid {
                what: "eps",
                value: e,
            });
        }
        Ok(())
    }
}

/// Which family of extremal subsets a breakpoint belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// `E = {x ∈ B : ω(x) ≥ λ}`
    Super,
    /// `E = {x ∈ B : ω(x) ≤ λ}`
    Sub,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Breakpoint {
    /// `μ(E)/μ(B)`
    pub u: f64,
    /// `ν(E)/ν(B)`, 0 when `ν(B) = 0`.
    pub v: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCurve {
    pub ball: BallRef,
    pub level: Level,
    pub breakpoints: Vec<Breakpoint>,
}

/// Ball (and level, for sweep curves) at which a constant is attained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub center: usize,
    pub radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl Witness {
    fn ball(center: usize, radius: f64) -> Self {
        Witness {
            center,
            radius,
            lambda: None,
        }
    }

    pub fn ball_ref(&self) -> BallRef {
        BallRef {
            center: self.center,
            radius: self.radius,
        }
    }
}

/// One point `(x, value)` of a constant curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub value: Bound,
    pub witness: Option<Witness>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Extremum {
    pub value: Bound,
    pub witness: Option<Witness>,
}

fn ball_members(space: &Space, at: BallRef) -> Result<Vec<usize>, SpaceError> {
    Ok(crate::space::ball(space, at.center, at.radius, Convention::Closed)?.members)
}

/// Breakpoints of `members` swept by level, ties grouped.
fn sweep_members(
    space: &Space,
    weight: &Weight,
    members: &[usize],
    level: Level,
) -> Vec<Breakpoint> {
    let mut sorted = members.to_vec();
    sorted.sort_by(|&a, &b| weight[a].total_cmp(&weight[b]).then(a.cmp(&b)));
    if level == Level::Super {
        sorted.reverse();
    }
    sweep_sorted(space.mu(), weight.values(), &sorted)
}

/// Sweep over ids already in sweep order.
fn sweep_sorted(mu: &[f64], w: &[f64], sorted: &[usize]) -> Vec<Breakpoint> {
    let (tmu, tnu) = sorted
        .iter()
        .fold((0.0, 0.0), |(a, b), &i| (a + mu[i], b + w[i] * mu[i]));
    let mut out = Vec::new();
    let (mut cmu, mut cnu) = (0.0, 0.0);
    let mut k = 0;
    while k < sorted.len() {
        let lambda = w[sorted[k]];
        while k < sorted.len() && w[sorted[k]] == lambda {
            cmu += mu[sorted[k]];
            cnu += w[sorted[k]] * mu[sorted[k]];
            k += 1;
        }
        out.push(Breakpoint {
            u: cmu / tmu,
            v: if tnu > 0.0 { cnu / tnu } else { 0.0 },
            lambda,
        });
    }
    out
}

pub fn superlevel_sweep(
    space: &Space,
    weight: &Weight,
    ball: &crate::space::Ball,
) -> Result<SweepCurve, WeightError> {
    level_sweep(space, weight, ball, Level::Super)
}

pub fn sublevel_sweep(
    space: &Space,
    weight: &Weight,
    ball: &crate::space::Ball,
) -> Result<SweepCurve, WeightError> {
    level_sweep(space, weight, ball, Level::Sub)
}

fn level_sweep(
    space: &Space,
    weight: &Weight,
    ball: &crate::space::Ball,
    level: Level,
) -> Result<SweepCurve, WeightError> {
    weight.check_len(space)?;
    for &m in &ball.members {
        space.check_point(m)?;
    }
    Ok(SweepCurve {
        ball: ball.descriptor(),
        level,
        breakpoints: sweep_members(space, weight, &ball.members, level),
    })
}

/// Piecewise-linear interpolation through `(0,0)` and the breakpoints,
/// evaluated at `eps`: the largest `ν`-fraction any (fractional) subset of
/// `μ`-fraction at most `eps` can carry.
pub fn envelope_at(breakpoints: &[Breakpoint], eps: f64) -> f64 {
    let (mut u0, mut v0) = (0.0, 0.0);
    for bp in breakpoints {
        if bp.u >= eps {
            if bp.u == eps {
                return bp.v;
            }
            return v0 + (bp.v - v0) * (eps - u0) / (bp.u - u0);
        }
        u0 = bp.u;
        v0 = bp.v;
    }
    v0
}

fn cond2_value(bp: &Breakpoint, p: f64) -> f64 {
    if p == 1.0 {
        bp.v / bp.u
    } else {
        bp.v / bp.u.powf(1.0 / p)
    }
}

fn cond4_value(bp: &Breakpoint, p: f64) -> f64 {
    if p == 1.0 {
        bp.v / bp.u
    } else {
        bp.v / bp.u.powf(p)
    }
}

fn swapped_value(bp: &Breakpoint, p: f64) -> Bound {
    if bp.v == 0.0 {
        return Bound::Unbounded;
    }
    Bound::Finite(if p == 1.0 {
        bp.u / bp.v
    } else {
        bp.u / bp.v.powf(1.0 / p)
    })
}

/// Running extremum with first-wins tie breaking.
#[derive(Clone, Copy, Debug)]
struct Best {
    value: Bound,
    witness: Option<Witness>,
}

impl Best {
    fn new(init: f64) -> Self {
        Best {
            value: Bound::Finite(init),
            witness: None,
        }
    }

    fn offer_max(&mut self, v: Bound, w: Witness) {
        let better = match (v, self.value) {
            (Bound::Unbounded, Bound::Unbounded) => false,
            (Bound::Unbounded, _) => true,
            (_, Bound::Unbounded) => false,
            (Bound::Finite(a), Bound::Finite(b)) => a > b || (self.witness.is_none() && a == b),
        };
        if better {
            self.value = v;
            self.witness = Some(w);
        }
    }

    fn offer_min(&mut self, v: f64, w: Witness) {
        let cur = self.value.finite().unwrap_or(f64::INFINITY);
        if v < cur || (self.witness.is_none() && v == cur) {
            self.value = Bound::Finite(v);
            self.witness = Some(w);
        }
    }

    fn merge_max(&mut self, other: &Best) {
        if let Some(w) = other.witness {
            self.offer_max(other.value, w);
        }
    }

    fn merge_min(&mut self, other: &Best) {
        if let (Some(w), Some(v)) = (other.witness, other.value.finite()) {
            self.offer_min(v, w);
        }
    }

    fn point(&self, x: f64) -> CurvePoint {
        CurvePoint {
            x,
            value: self.value,
            witness: self.witness,
        }
    }
}

/// Extremes of every sweep-based curve over all balls.
#[derive(Clone, Debug)]
struct SweepExtrema {
    /// max envelope(ε) over balls with ν(B) > 0
    cond1: Vec<Best>,
    cond2: Vec<Best>,
    cond4: Vec<Best>,
    swapped: Vec<Best>,
}

impl SweepExtrema {
    fn new(n_eps: usize, n_p: usize) -> Self {
        SweepExtrema {
            cond1: vec![Best::new(0.0); n_eps],
            cond2: vec![Best::new(0.0); n_p],
            cond4: vec![Best::new(1.0); n_p],
            swapped: vec![Best::new(0.0); n_p],
        }
    }

    fn merge(&mut self, o: &SweepExtrema) {
        for (a, b) in self.cond1.iter_mut().zip(&o.cond1) {
            a.merge_max(b);
        }
        for (a, b) in self.cond2.iter_mut().zip(&o.cond2) {
            a.merge_max(b);
        }
        for (a, b) in self.cond4.iter_mut().zip(&o.cond4) {
            a.merge_min(b);
        }
        for (a, b) in self.swapped.iter_mut().zip(&o.swapped) {
            a.merge_max(b);
        }
    }
}

fn sweep_extrema(
    space: &Space,
    index: &BallIndex,
    weight: &Weight,
    eps: &[f64],
    ps: &[f64],
) -> SweepExtrema {
    let mu = space.mu();
    let w = weight.values();
    let per_center: Vec<SweepExtrema> = (0..space.len())
        .into_par_iter()
        .map(|c| {
            let mut acc = SweepExtrema::new(eps.len(), ps.len());
            let order = index.order(c);
            let sorted_d = index.sorted(c);
            let mut by_w: Vec<usize> = Vec::with_capacity(order.len());
            let mut desc: Vec<usize> = Vec::with_capacity(order.len());
            let mut start = 0;
            for &e in index.ends(c) {
                for &j in &order[start..e] {
                    let pos = by_w.partition_point(|&i| w[i] < w[j] || (w[i] == w[j] && i < j));
                    by_w.insert(pos, j);
                }
                start = e;
                let radius = sorted_d[e - 1];
                let sub = sweep_sorted(mu, w, &by_w);
                desc.clear();
                desc.extend(by_w.iter().rev());
                let sup = sweep_sorted(mu, w, &desc);
                let nu_positive = sup.last().is_some_and(|b| b.v > 0.0);
                let wit = |lambda: f64| Witness {
                    center: c,
                    radius,
                    lambda: Some(lambda),
                };
                if nu_positive {
                    for (k, &x) in eps.iter().enumerate() {
                        let env = envelope_at(&sup, x);
                        acc.cond1[k].offer_max(Bound::Finite(env), Witness::ball(c, radius));
                    }
                }
                for (k, &p) in ps.iter().enumerate() {
                    for bp in &sup {
                        acc.cond2[k].offer_max(Bound::Finite(cond2_value(bp, p)), wit(bp.lambda));
                    }
                    for bp in &sub {
                        acc.cond4[k].offer_min(cond4_value(bp, p), wit(bp.lambda));
                        acc.swapped[k].offer_max(swapped_value(bp, p), wit(bp.lambda));
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = SweepExtrema::new(eps.len(), ps.len());
    for part in &per_center {
        total.merge(part);
    }
    total
}

/// `c(p) = sup v / u^{1/p}` over balls and superlevel breakpoints.
pub fn cond2_curve(
    space: &Space,
    weight: &Weight,
    p_grid: &[f64],
) -> Result<Vec<CurvePoint>, WeightError> {
    weight.check_len(space)?;
    let g = Grids {
        p: p_grid.to_vec(),
        eps: vec![],
    };
    g.validate()?;
    let index = BallIndex::new(space);
    let ex = sweep_extrema(space, &index, weight, &[], p_grid);
    Ok(p_grid
        .iter()
        .zip(&ex.cond2)
        .map(|(&p, b)| b.point(p))
        .collect())
}

/// `δ(ε) = 1 − sup envelope(ε)` over balls with `ν(B) > 0`.
///
/// The envelope interpolates between superlevel breakpoints, so the
/// returned `δ` is the largest value certified for every subset.
pub fn cond1_curve(
    space: &Space,
    weight: &Weight,
    eps_grid: &[f64],
) -> Result<Vec<CurvePoint>, WeightError> {
    weight.check_len(space)?;
    Grids {
        p: vec![],
        eps: eps_grid.to_vec(),
    }
    .validate()?;
    let index = BallIndex::new(space);
    let ex = sweep_extrema(space, &index, weight, eps_grid, &[]);
    Ok(cond1_points(eps_grid, &ex))
}

fn cond1_points(eps: &[f64], ex: &SweepExtrema) -> Vec<CurvePoint> {
    eps.iter()
        .zip(&ex.cond1)
        .map(|(&x, b)| CurvePoint {
            x,
            value: Bound::Finite((1.0 - b.value.finite().unwrap_or(1.0)).clamp(0.0, 1.0)),
            witness: b.witness,
        })
        .collect()
}

/// `c(p) = inf v / u^p` over balls and sublevel breakpoints; 0 means the
/// lower bound fails for every positive constant.
pub fn cond4_curve(
    space: &Space,
    weight: &Weight,
    p_grid: &[f64],
) -> Result<Vec<CurvePoint>, WeightError> {
    weight.check_len(space)?;
    Grids {
        p: p_grid.to_vec(),
        eps: vec![],
    }
    .validate()?;
    let index = BallIndex::new(space);
    let ex = sweep_extrema(space, &index, weight, &[], p_grid);
    Ok(p_grid
        .iter()
        .zip(&ex.cond4)
        .map(|(&p, b)| b.point(p))
        .collect())
}

/// Accumulated integrals over a growing ball; `pow` entries are filled by the
/// caller-specific exponent through [`BallSums::with_exponents`].
#[derive(Clone, Debug, Default)]
struct BallSums {
    mu: f64,
    nu: f64,
    min_w: Option<f64>,
    max_w: f64,
    exps: Vec<f64>,
    pow: Vec<f64>,
}

impl BallSums {
    fn with_exponents(exps: &[f64]) -> Self {
        BallSums {
            exps: exps.to_vec(),
            pow: vec![0.0; exps.len()],
            ..Default::default()
        }
    }

    fn add(&mut self, m: f64, w: f64) {
        self.mu += m;
        self.nu += w * m;
        self.min_w = Some(self.min_w.map_or(w, |x| x.min(w)));
        self.max_w = self.max_w.max(w);
        for (s, &a) in self.pow.iter_mut().zip(&self.exps) {
            *s += w.powf(a) * m;
        }
    }
}

fn sums_sup<G>(space: &Space, index: &BallIndex, weight: &Weight, exps: &[f64], ratio: G) -> Best
where
    G: Fn(&BallSums) -> Option<Bound> + Sync,
{
    let mu = space.mu();
    let w = weight.values();
    let parts: Vec<Best> = (0..space.len())
        .into_par_iter()
        .map(|c| {
            let mut best = Best::new(1.0);
            let sorted = index.sorted(c);
            let order = index.order(c);
            let mut sums = BallSums::with_exponents(exps);
            let mut start = 0;
            for &e in index.ends(c) {
                for &j in &order[start..e] {
                    sums.add(mu[j], w[j]);
                }
                start = e;
                if let Some(v) = ratio(&sums) {
                    best.offer_max(v, Witness::ball(c, sorted[e - 1]));
                }
            }
            best
        })
        .collect();
    let mut total = Best::new(1.0);
    for b in &parts {
        total.merge_max(b);
    }
    total
}

fn ap_ratio(s: &BallSums, p: f64) -> Bound {
    let avg = s.nu / s.mu;
    let avg_neg = s.pow[0] / s.mu;
    Bound::Finite(avg * avg_neg.powf(p - 1.0))
}

fn rhi_ratio(s: &BallSums, eps: f64) -> Option<Bound> {
    if s.nu <= 0.0 {
        return None;
    }
    let avg = s.nu / s.mu;
    let high = (s.pow[0] / s.mu).powf(1.0 / (1.0 + eps));
    Some(Bound::Finite(high / avg))
}

/// `sup_B (⨍ω)(⨍ω^{1−q})^{p−1}`, `q = p/(p−1)`.
pub fn ap_constant(space: &Space, weight: &Weight, p: f64) -> Result<Extremum, WeightError> {
    weight.check_len(space)?;
    if !(p.is_finite() && p > 1.0) {
        return Err(WeightError::Grid {
            what: "A_p exponent",
            value: p,
        });
    }
    if let Some(point) = weight.values().iter().position(|&w| w <= 0.0) {
        return Err(WeightError::VanishingWeight { point });
    }
    let index = BallIndex::new(space);
    Ok(ap_with_index(space, &index, weight, p))
}

fn ap_with_index(space: &Space, index: &BallIndex, weight: &Weight, p: f64) -> Extremum {
    let b = sums_sup(space, index, weight, &[-1.0 / (p - 1.0)], |s| {
        Some(ap_ratio(s, p))
    });
    Extremum {
        value: b.value,
        witness: b.witness,
    }
}

/// `sup_B ⨍ω / min_B ω`; unbounded when a ball has positive average and a
/// zero minimum.
pub fn a1_constant(space: &Space, weight: &Weight) -> Result<Extremum, WeightError> {
    weight.check_len(space)?;
    let index = BallIndex::new(space);
    Ok(a1_with_index(space, &index, weight))
}

fn a1_with_index(space: &Space, index: &BallIndex, weight: &Weight) -> Extremum {
    let b = sums_sup(space, index, weight, &[], |s| {
        let min = s.min_w.unwrap_or(0.0);
        if s.nu <= 0.0 {
            None
        } else if min <= 0.0 {
            Some(Bound::Unbounded)
        } else {
            Some(Bound::Finite(s.nu / s.mu / min))
        }
    });
    Extremum {
        value: b.value,
        witness: b.witness,
    }
}

/// `sup_B (⨍ω^{1+ε})^{1/(1+ε)} / ⨍ω` over balls with `ν(B) > 0`.
pub fn rhi_constant(space: &Space, weight: &Weight, eps: f64) -> Result<Extremum, WeightError> {
    weight.check_len(space)?;
    if !(eps > 0.0) || eps.is_nan() {
        return Err(WeightError::Grid {
            what: "reverse Hölder exponent",
            value: eps,
        });
    }
    let index = BallIndex::new(space);
    Ok(rhi_with_index(space, &index, weight, eps))
}

fn rhi_with_index(space: &Space, index: &BallIndex, weight: &Weight, eps: f64) -> Extremum {
    let b = if eps.is_infinite() {
        sums_sup(space, index, weight, &[], |s| {
            (s.nu > 0.0).then(|| Bound::Finite(s.max_w / (s.nu / s.mu)))
        })
    } else {
        sums_sup(space, index, weight, &[1.0 + eps], |s| rhi_ratio(s, eps))
    };
    Extremum {
        value: b.value,
        witness: b.witness,
    }
}

/// `sup_B (⨍f^s)^{1/s} / ⨍f` over balls with `⨍f > 0`, for `s ≥ 1`; the
/// reverse Hölder constant at `ε = s − 1`.
pub fn power_mean_constant(space: &Space, f: &Weight, s: f64) -> Result<Extremum, WeightError> {
    f.check_len(space)?;
    if !(s >= 1.0) {
        return Err(WeightError::Grid {
            what: "power mean exponent",
            value: s,
        });
    }
    let index = BallIndex::new(space);
    Ok(rhi_with_index(space, &index, f, s - 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApCurve {
    pub points: Vec<CurvePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub condition: &'static str,
    pub holds: bool,
    /// Grid parameter (`ε` or `p`) of the certifying constant.
    pub parameter: Option<f64>,
    pub constant: Option<Bound>,
}

/// All constant curves for one weight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassReport {
    pub grids: Grids,
    pub a1_constant: Extremum,
    pub ap_curve: ApCurve,
    pub cond1_curve: Vec<CurvePoint>,
    pub cond2_curve: Vec<CurvePoint>,
    pub cond4_curve: Vec<CurvePoint>,
    /// Condition (2) with the roles of `μ` and `ν` exchanged.
    pub cond2_swapped_curve: Vec<CurvePoint>,
    pub rhi_curve: Vec<CurvePoint>,
    /// Reverse Hölder constant at the exponent `ε = 1/(p−1)` dual to each grid
    /// `p` (`ε = ∞`, the sup ratio, at `p = 1`).
    pub rhi_conjugate_curve: Vec<CurvePoint>,
    pub nu_doubling: DoublingReport,
    pub nu_total: f64,
    pub verdicts: Vec<Verdict>,
}

/// Computes every curve of a [`ClassReport`].
pub fn classify(
    space: &Space,
    weight: &Weight,
    grids: &Grids,
    convention: Convention,
) -> Result<ClassReport, WeightError> {
    weight.check_len(space)?;
    grids.validate()?;
    let index = BallIndex::new(space);
    let ex = sweep_extrema(space, &index, weight, &grids.eps, &grids.p);
    let cond1_curve = cond1_points(&grids.eps, &ex);
    let pts = |v: &[Best]| -> Vec<CurvePoint> {
        grids.p.iter().zip(v).map(|(&p, b)| b.point(p)).collect()
    };
    let cond2_curve = pts(&ex.cond2);
    let cond4_curve = pts(&ex.cond4);
    let cond2_swapped_curve = pts(&ex.swapped);
    let a1 = a1_with_index(space, &index, weight);
    let ap_ps: Vec<f64> = grids.p.iter().copied().filter(|&p| p > 1.0).collect();
    let ap_curve = match weight.values().iter().position(|&w| w <= 0.0) {
        Some(point) => ApCurve {
            points: vec![],
            error: Some(WeightError::VanishingWeight { point }.to_string()),
        },
        None => ApCurve {
            points: ap_ps
                .iter()
                .map(|&p| {
                    let e = ap_with_index(space, &index, weight, p);
                    CurvePoint {
                        x: p,
                        value: e.value,
                        witness: e.witness,
                    }
                })
                .collect(),
            error: None,
        },
    };
    let rhi_curve = grids
        .eps
        .iter()
        .map(|&e| {
            let r = rhi_with_index(space, &index, weight, e);
            CurvePoint {
                x: e,
                value: r.value,
                witness: r.witness,
            }
        })
        .collect();
    let rhi_conjugate_curve = grids
        .p
        .iter()
        .map(|&p| {
            let e = if p == 1.0 {
                f64::INFINITY
            } else {
                1.0 / (p - 1.0)
            };
            let r = rhi_with_index(space, &index, weight, e);
            CurvePoint {
                x: p,
                value: r.value,
                witness: r.witness,
            }
        })
        .collect();
    let nu_doubling = doubling_with_index(space, &index, Some(weight), convention);
    let nu_total =
        crate::space::measure_of(space, Some(weight), &(0..space.len()).collect::<Vec<_>>());
    let mut report = ClassReport {
        grids: grids.clone(),
        a1_constant: a1,
        ap_curve,
        cond1_curve,
        cond2_curve,
        cond4_curve,
        cond2_swapped_curve,
        rhi_curve,
        rhi_conjugate_curve,
        nu_doubling,
        nu_total,
        verdicts: vec![],
    };
    report.verdicts = verdicts(&report);
    Ok(report)
}

fn verdicts(r: &ClassReport) -> Vec<Verdict> {
    let first =
        |c: &[CurvePoint], ok: &dyn Fn(&CurvePoint) -> bool| c.iter().find(|p| ok(p)).copied();
    let mk = |condition: &'static str, hit: Option<CurvePoint>| Verdict {
        condition,
        holds: hit.is_some(),
        parameter: hit.map(|p| p.x),
        constant: hit.map(|p| p.value),
    };
    let c1 = r
        .cond1_curve
        .iter()
        .filter(|p| p.value.finite().is_some_and(|d| d > 0.0))
        .max_by(|a, b| {
            a.value
                .finite()
                .unwrap()
                .total_cmp(&b.value.finite().unwrap())
        })
        .copied();
    let c4 = r
        .cond4_curve
        .iter()
        .rfind(|p| p.value.finite().is_some_and(|c| c > 0.0))
        .copied();
    vec![
        mk("(1) comparability", c1),
        mk(
            "(2) A_inf upper",
            first(&r.cond2_curve, &|p| p.value.is_finite()),
        ),
        mk(
            "(3) reverse Holder",
            first(&r.rhi_curve, &|p| p.value.is_finite()),
        ),
        mk("(4) A_inf lower", c4),
        mk(
            "(5) A_p",
            first(&r.ap_curve.points, &|p| p.value.is_finite()),
        ),
        Verdict {
            condition: "nu doubling",
            holds: r.nu_doubling.value.is_finite(),
            parameter: None,
            constant: Some(r.nu_doubling.value),
        },
        Verdict {
            condition: "A_1",
            holds: r.a1_constant.value.is_finite(),
            parameter: None,
            constant: Some(r.a1_constant.value),
        },
    ]
}

/// Which curve a witness belongs to, for replay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CurveKind {
    Cond1 { eps: f64 },
    Cond2 { p: f64 },
    Cond4 { p: f64 },
    Cond2Swapped { p: f64 },
    Rhi { eps: f64 },
    Ap { p: f64 },
    A1,
}

/// Re-evaluates a constant from its witness by direct enumeration of the
/// witness ball (no prefix sums, no incremental sweep).
pub fn replay_witness(
    space: &Space,
    weight: &Weight,
    kind: CurveKind,
    witness: &Witness,
) -> Result<Bound, WeightError> {
    let members = ball_members(space, witness.ball_ref())?;
    let w = weight.values();
    let mu = space.mu();
    let mass = |set: &[usize], f: &dyn Fn(f64) -> f64| -> f64 {
        set.iter().map(|&i| f(w[i]) * mu[i]).sum()
    };
    let m_b = mass(&members, &|_| 1.0);
    let n_b = mass(&members, &|x| x);
    let level_set = |lvl: Level| -> Vec<usize> {
        let lambda = witness.lambda.unwrap_or(0.0);
        members
            .iter()
            .copied()
            .filter(|&i| match lvl {
                Level::Super => w[i] >= lambda,
                Level::Sub => w[i] <= lambda,
            })
            .collect()
    };
    let uv = |set: &[usize]| -> Breakpoint {
        Breakpoint {
            u: mass(set, &|_| 1.0) / m_b,
            v: if n_b > 0.0 {
                mass(set, &|x| x) / n_b
            } else {
                0.0
            },
            lambda: witness.lambda.unwrap_or(0.0),
        }
    };
    Ok(match kind {
        CurveKind::Cond1 { eps } => {
            let bps = sweep_members(space, weight, &members, Level::Super);
            Bound::Finite((1.0 - envelope_at(&bps, eps)).clamp(0.0, 1.0))
        }
        CurveKind::Cond2 { p } => Bound::Finite(cond2_value(&uv(&level_set(Level::Super)), p)),
        CurveKind::Cond4 { p } => Bound::Finite(cond4_value(&uv(&level_set(Level::Sub)), p)),
        CurveKind::Cond2Swapped { p } => swapped_value(&uv(&level_set(Level::Sub)), p),
        CurveKind::Rhi { eps } => {
            let avg = n_b / m_b;
            if eps.is_infinite() {
                Bound::Finite(members.iter().map(|&i| w[i]).fold(0.0, f64::max) / avg)
            } else {
                Bound::Finite(
                    (mass(&members, &|x| x.powf(1.0 + eps)) / m_b).powf(1.0 / (1.0 + eps)) / avg,
                )
            }
        }
        CurveKind::Ap { p } => {
            let e = -1.0 / (p - 1.0);
            Bound::Finite((n_b / m_b) * (mass(&members, &|x| x.powf(e)) / m_b).powf(p - 1.0))
        }
        CurveKind::A1 => {
            let min = members.iter().map(|&i| w[i]).fold(f64::INFINITY, f64::min);
            if min <= 0.0 {
                Bound::Unbounded
            } else {
                Bound::Finite(n_b / m_b / min)
            }
        }
    })
}

/// One row of the implication-consistency table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Implication {
    pub relation: &'static str,
    pub premise: bool,
    pub conclusion: bool,
    pub consistent: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImplicationTable {
    pub rows: Vec<Implication>,
    pub violations: usize,
}

fn le_rel(a: f64, b: f64) -> bool {
    a <= b + IMPLICATION_RTOL * b.abs().max(a.abs()).max(1.0)
}

/// Checks the relations between conditions (1)–(5) at the level of the
/// computed constants. Each quantitative bound is a rigorous consequence on a
/// finite space, so any failure signals an inconsistent computation.
pub fn implication_matrix(r: &ClassReport) -> Result<ImplicationTable, WeightError> {
    let n_p = r.grids.p.len();
    if r.cond2_curve.len() != n_p
        || r.cond4_curve.len() != n_p
        || r.cond2_swapped_curve.len() != n_p
        || r.rhi_conjugate_curve.len() != n_p
        || r.cond1_curve.len() != r.grids.eps.len()
        || r.rhi_curve.len() != r.grids.eps.len()
    {
        return Err(WeightError::Mismatch);
    }
    let mut rows = Vec::new();
    let c2_finite: Vec<(f64, f64)> = r
        .cond2_curve
        .iter()
        .filter_map(|c| c.value.finite().map(|v| (c.x, v)))
        .collect();
    let c4_pos: Vec<(f64, f64)> = r
        .cond4_curve
        .iter()
        .filter_map(|c| c.value.finite().filter(|v| *v > 0.0).map(|v| (c.x, v)))
        .collect();
    let deltas: Vec<(f64, f64)> = r
        .cond1_curve
        .iter()
        .map(|c| (c.x, c.value.finite().unwrap_or(0.0)))
        .collect();
    let any_delta = deltas.iter().any(|&(_, d)| d > 0.0);
    let ap_finite =
        r.ap_curve.error.is_none() && r.ap_curve.points.iter().any(|c| c.value.is_finite());

    // (2) ⇒ (1): δ(ε) ≥ 1 − c(p) ε^{1/p}
    {
        let mut bad = Vec::new();
        for &(p, c) in &c2_finite {
            for &(e, d) in &deltas {
                let bound = 1.0 - c * e.powf(1.0 / p);
                if !le_rel(bound, d) {
                    bad.push(format!("p={p} eps={e}: delta={d} < {bound}"));
                }
            }
        }
        rows.push(Implication {
            relation: "(2) => (1)",
            premise: !c2_finite.is_empty(),
            conclusion: any_delta,
            consistent: bad.is_empty(),
            detail: if bad.is_empty() {
                "delta(eps) >= 1 - c(p) eps^(1/p) on the grid".into()
            } else {
                bad.join("; ")
            },
        });
    }
    // (3) ⇒ (2): c(p) ≤ C_RHI(1/(p−1))
    {
        let mut bad = Vec::new();
        for (c2, rc) in r.cond2_curve.iter().zip(&r.rhi_conjugate_curve) {
            if let (Some(a), Some(b)) = (c2.value.finite(), rc.value.finite()) {
                if !le_rel(a, b) {
                    bad.push(format!("p={}: c={a} > rhi bound {b}", c2.x));
                }
            } else if c2.value == Bound::Unbounded && rc.value.is_finite() {
                bad.push(format!("p={}: c unbounded under finite rhi", c2.x));
            }
        }
        let rhi_finite = r.rhi_conjugate_curve.iter().any(|c| c.value.is_finite());
        rows.push(Implication {
            relation: "(3) => (2)",
            premise: rhi_finite,
            conclusion: !c2_finite.is_empty(),
            consistent: bad.is_empty(),
            detail: if bad.is_empty() {
                "c(p) <= C_rhi(1/(p-1)) for every grid p".into()
            } else {
                bad.join("; ")
            },
        });
    }
    // (2) ⇒ (3): C_RHI(ε) ≤ c(p) (q/(q−1−ε))^{1/(1+ε)} for ε < q − 1
    {
        let mut bad = Vec::new();
        let mut checked = 0;
        // with ν ≡ 0 no ball enters the reverse Hölder supremum
        let active = if r.nu_total > 0.0 {
            &c2_finite[..]
        } else {
            &[]
        };
        for &(p, c) in active {
            for rc in &r.rhi_curve {
                let eps = rc.x;
                let bound = if p == 1.0 {
                    c
                } else {
                    let q = p / (p - 1.0);
                    if eps >= q - 1.0 {
                        continue;
                    }
                    c * (q / (q - 1.0 - eps)).powf(1.0 / (1.0 + eps))
                };
                checked += 1;
                if let Some(v) = rc.value.finite() {
                    if !le_rel(v, bound) {
                        bad.push(format!("p={p} eps={eps}: C_rhi={v} > {bound}"));
                    }
                }
            }
        }
        rows.push(Implication {
            relation: "(2) => (3)",
            premise: !c2_finite.is_empty(),
            conclusion: r.rhi_curve.iter().any(|c| c.value.is_finite()),
            consistent: bad.is_empty(),
            detail: if bad.is_empty() {
                format!("layer-cake bound dominates C_rhi on {checked} (p, eps) pairs")
            } else {
                bad.join("; ")
            },
        });
    }
    // (4) ⇔ (2) on swapped measures: c'(p) = c4(p)^{−1/p}
    {
        let mut bad = Vec::new();
        for (c4, sw) in r.cond4_curve.iter().zip(&r.cond2_swapped_curve) {
            let p = c4.x;
            let c = c4.value.finite().unwrap_or(0.0);
            match sw.value {
                Bound::Unbounded if c > 0.0 => {
                    bad.push(format!("p={p}: swapped unbounded but c4={c}"))
                }
                Bound::Finite(s) => {
                    let expect = c.powf(-1.0 / p);
                    if !(c > 0.0 && le_rel(s, expect) && le_rel(expect, s)) {
                        bad.push(format!("p={p}: swapped={s}, c4^(-1/p)={expect}"));
                    }
                }
                _ => {}
            }
        }
        rows.push(Implication {
            relation: "(4) <=> (2) with mu, nu exchanged",
            premise: !c4_pos.is_empty(),
            conclusion: r.cond2_swapped_curve.iter().any(|c| c.value.is_finite()),
            consistent: bad.is_empty(),
            detail: if bad.is_empty() {
                "swapped c'(p) = c4(p)^(-1/p)".into()
            } else {
                bad.join("; ")
            },
        });
    }
    // (4) ⇒ (1): δ(ε) ≥ c4(p) (1−ε)^p
    {
        let mut bad = Vec::new();
        for &(p, c) in &c4_pos {
            for &(e, d) in &deltas {
                let bound = c * (1.0 - e).powf(p);
                if !le_rel(bound, d) {
                    bad.push(format!("p={p} eps={e}: delta={d} < {bound}"));
                }
            }
        }
        rows.push(Implication {
            relation: "(4) => (1)",
            premise: !c4_pos.is_empty(),
            conclusion: any_delta,
            consistent: bad.is_empty() && (c4_pos.is_empty() || any_delta),
            detail: if bad.is_empty() {
                "delta(eps) >= c4(p) (1-eps)^p on the grid".into()
            } else {
                bad.join("; ")
            },
        });
    }
    // (2) & (4) ⇒ (5)
    {
        let premise = !c2_finite.is_empty() && !c4_pos.is_empty();
        rows.push(Implication {
            relation: "(2) & (4) => (5)",
            premise,
            conclusion: ap_finite,
            consistent: !premise || ap_finite,
            detail: "finite A_p constant for some grid p".into(),
        });
    }
    // (5) ⇒ ν doubling
    {
        rows.push(Implication {
            relation: "(5) => nu doubling",
            premise: ap_finite,
            conclusion: r.nu_doubling.value.is_finite(),
            consistent: !ap_finite || r.nu_doubling.value.is_finite(),
            detail: format!("nu doubling constant {}", r.nu_doubling.value),
        });
    }
    // ν doubling & (1) ⇒ (2) & (4)
    {
        let premise = r.nu_doubling.value.is_finite() && any_delta && r.nu_total > 0.0;
        let conclusion = !c2_finite.is_empty() && !c4_pos.is_empty();
        rows.push(Implication {
            relation: "nu doubling & (1) => (2) & (4)",
            premise,
            conclusion,
            consistent: !premise || conclusion,
            detail: "finite c2 and positive c4 on the grid".into(),
        });
    }
    // A_p ⊂ A_q: nonincreasing in p
    {
        let mut bad = Vec::new();
        for w in r.ap_curve.points.windows(2) {
            if let (Some(a), Some(b)) = (w[0].value.finite(), w[1].value.finite()) {
                if !le_rel(b, a) {
                    bad.push(format!("A_{}={a} < A_{}={b}", w[0].x, w[1].x));
                }
            }
        }
        rows.push(Implication {
            relation: "A_p subset A_q (p < q)",
            premise: ap_finite,
            conclusion: ap_finite,
            consistent: bad.is_empty(),
            detail: if bad.is_empty() {
                "A_p constant nonincreasing in p".into()
            } else {
                bad.join("; ")
            },
        });
    }
    // A_1 ⊂ A_p
    {
        let a1 = r.a1_constant.value.finite();
        let mut bad = Vec::new();
        if let Some(a1) = a1 {
            for c in &r.ap_curve.points {
                if let Some(v) = c.value.finite() {
                    if !le_rel(v, a1) {
                        bad.push(format!("A_{}={v} > A_1={a1}", c.x));
                    }
                }
            }
        }
        rows.push(Implication {
            relation: "A_1 subset A_p",
            premise: a1.is_some(),
            conclusion: ap_finite,
            consistent: bad.is_empty() && (a1.is_none() || ap_finite || r.nu_total == 0.0),
            detail: if bad.is_empty() {
                "A_p constant <= A_1 constant".into()
            } else {
                bad.join("; ")
            },
        });
    }
    let violations = rows.iter().filter(|r| !r.consistent).count();
    Ok(ImplicationTable { rows, violations })
}
