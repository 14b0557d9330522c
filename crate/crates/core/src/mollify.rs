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

//! Separated nets, partitions of unity and the mollified weights `ω_t`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::space::{Bound, Space, SpaceError, Weight};
use crate::weights::{power_mean_constant, Extremum, WeightError};

/// Default exponent gains tried by [`gehring_probe`].
pub const DEFAULT_GEHRING_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
/// Improved constants up to this multiple of the base constant qualify.
pub const GEHRING_FACTOR: f64 = 10.0;
/// Largest spread of the uniform reverse Hölder constants across scales.
pub const UNIFORM_RHI_FACTOR: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MollifyError {
    #[error("scale must be positive and finite, got {0}")]
    Scale(f64),
    #[error("test set {0:?} needs point coordinates")]
    NoCoordinates(String),
    #[error("test set {name:?} has bounds of dimension {got}, space has {want}")]
    BoxDimension {
        name: String,
        got: usize,
        want: usize,
    },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

fn check_scale(t: f64) -> Result<(), MollifyError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(MollifyError::Scale(t))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Net {
    pub t: f64,
    pub centers: Vec<usize>,
    /// Largest number of doubled balls `B(x_i, 2t)` containing one point.
    pub overlap: usize,
}

/// Greedy maximal set with pairwise distances `> 2t/5`, scanning ids in
/// ascending order. Maximality gives coverage by the closed balls
/// `B(x_i, 2t/5) ⊂ B(x_i, t)`.
pub fn separated_net(space: &Space, t: f64) -> Result<Net, MollifyError> {
    check_scale(t)?;
    let sep = 2.0 * t / 5.0;
    let mut centers: Vec<usize> = Vec::new();
    for x in 0..space.len() {
        if centers.iter().all(|&c| space.dist(c, x) > sep) {
            centers.push(x);
        }
    }
    let overlap = (0..space.len())
        .map(|x| {
            centers
                .iter()
                .filter(|&&c| space.dist(c, x) <= 2.0 * t)
                .count()
        })
        .max()
        .unwrap_or(0);
    Ok(Net {
        t,
        centers,
        overlap,
    })
}

/// Unnormalized cutoff: 1 on `B(x_i, t)`, linear decay to 0 at `2t`.
fn cutoff(d: f64, t: f64) -> f64 {
    if d <= t {
        1.0
    } else if d <= 2.0 * t {
        1.0 - (d - t) / t
    } else {
        0.0
    }
}

/// Normalized partition of unity subordinate to the doubled net balls.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Per center, the `(point, φ_i(point))` pairs with `φ_i > 0`.
    pub phi: Vec<Vec<(usize, f64)>>,
}

impl Partition {
    /// `Σ_i φ_i(x)` for every point.
    pub fn sums(&self, n: usize) -> Vec<f64> {
        let mut s = vec![0.0; n];
        for row in &self.phi {
            for &(x, v) in row {
                s[x] += v;
            }
        }
        s
    }
}

pub fn partition(space: &Space, net: &Net) -> Result<Partition, MollifyError> {
    check_scale(net.t)?;
    for &c in &net.centers {
        space.check_point(c)?;
    }
    let t = net.t;
    let n = space.len();
    let mut denom = vec![0.0; n];
    for &c in &net.centers {
        for (x, &d) in space.dist_row(c).iter().enumerate() {
            denom[x] += cutoff(d, t);
        }
    }
    let phi = net
        .centers
        .iter()
        .map(|&c| {
            space
                .dist_row(c)
                .iter()
                .enumerate()
                .filter_map(|(x, &d)| {
                    let v = cutoff(d, t);
                    (v > 0.0).then(|| (x, v / denom[x]))
                })
                .collect()
        })
        .collect();
    Ok(Partition { phi })
}

/// Two-sided comparison of each `a_i` with `ν(B_i)/μ(B_i)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sandwich {
    /// Overlap times the largest doubling ratio measured at the net balls.
    pub constant: Bound,
    /// Smallest constant that makes every inequality hold.
    pub achieved: Bound,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MollifiedWeight {
    pub t: f64,
    pub net: Net,
    pub a: Vec<f64>,
    #[serde(skip)]
    pub omega_t: Weight,
    #[serde(skip)]
    pub partition: Partition,
    /// `min_x φ_i(x)` over `x ∈ B_i`, the `1/C` in `(1/C) χ_{B_i} ≤ φ_i`.
    pub partition_lower: f64,
    pub sandwich: Sandwich,
    /// Smallest `C` with `ω_t(y)` within a factor `C` of
    /// `ν(B(x,t))/μ(B(x,t))` whenever `d(x,y) ≤ 2t`.
    pub local_constant: Bound,
    /// Smallest `C` with `ω_t(x) ≤ C ω_t(y)` whenever `d(x,y) ≤ 2t`; pairs
    /// where both vanish are skipped.
    pub comparability: Bound,
}

/// `max(a/b, b/a)` folded into a running bound; `0/0` is skipped.
fn widen(acc: &mut Bound, a: f64, b: f64) {
    if a == 0.0 && b == 0.0 {
        return;
    }
    if a == 0.0 || b == 0.0 {
        *acc = Bound::Unbounded;
        return;
    }
    if let Bound::Finite(c) = *acc {
        *acc = Bound::Finite(c.max(a / b).max(b / a));
    }
}

fn ball_sums(space: &Space, w: &[f64], c: usize, r: f64) -> (f64, f64) {
    space
        .dist_row(c)
        .iter()
        .zip(space.mu())
        .zip(w)
        .filter(|((&d, _), _)| d <= r)
        .fold((0.0, 0.0), |(m, v), ((_, &mu), &wi)| (m + mu, v + wi * mu))
}

/// `ω_t = Σ a_i φ_i` with `a_i = ∫φ_i dν / ∫φ_i dμ`.
pub fn mollify(space: &Space, weight: &Weight, t: f64) -> Result<MollifiedWeight, MollifyError> {
    weight.check_len(space)?;
    let net = separated_net(space, t)?;
    let part = partition(space, &net)?;
    let mu = space.mu();
    let w = weight.values();
    let n = space.len();
    let a: Vec<f64> = part
        .phi
        .iter()
        .map(|row| {
            let (m, v) = row.iter().fold((0.0, 0.0), |(m, v), &(x, p)| {
                (m + p * mu[x], v + p * w[x] * mu[x])
            });
            assert!(m > 0.0, "net center carries its own mass");
            v / m
        })
        .collect();
    let mut omega = vec![0.0; n];
    for (row, &ai) in part.phi.iter().zip(&a) {
        for &(x, p) in row {
            omega[x] += ai * p;
        }
    }
    let partition_lower = part
        .phi
        .iter()
        .zip(&net.centers)
        .flat_map(|(row, &c)| {
            row.iter()
                .filter(move |&&(x, _)| space.dist(c, x) <= t)
                .map(|&(_, p)| p)
        })
        .fold(1.0, f64::min);

    let mut doubling = 1.0f64;
    let mut nu_doubling_finite = true;
    let mut achieved = Bound::Finite(1.0);
    for (&c, &ai) in net.centers.iter().zip(&a) {
        let (m1, v1) = ball_sums(space, w, c, t);
        let (m2, v2) = ball_sums(space, w, c, 2.0 * t);
        doubling = doubling.max(m2 / m1);
        if v1 > 0.0 {
            doubling = doubling.max(v2 / v1);
        } else if v2 > 0.0 {
            nu_doubling_finite = false;
        }
        widen(&mut achieved, ai, v1 / m1);
    }
    let constant = if nu_doubling_finite {
        Bound::Finite(net.overlap as f64 * doubling)
    } else {
        Bound::Unbounded
    };
    let holds = match (achieved, constant) {
        (Bound::Finite(x), Bound::Finite(c)) => x <= c,
        (_, Bound::Unbounded) => true,
        _ => false,
    };

    let (local_constant, comparability) = (0..n)
        .into_par_iter()
        .map(|x| {
            let (m, v) = ball_sums(space, w, x, t);
            let avg = v / m;
            let mut local = Bound::Finite(1.0);
            let mut comp = Bound::Finite(1.0);
            for (y, &d) in space.dist_row(x).iter().enumerate() {
                if d <= 2.0 * t {
                    widen(&mut local, omega[y], avg);
                    widen(&mut comp, omega[x], omega[y]);
                }
            }
            (local, comp)
        })
        .reduce(
            || (Bound::Finite(1.0), Bound::Finite(1.0)),
            |a, b| (max_bound(a.0, b.0), max_bound(a.1, b.1)),
        );

    Ok(MollifiedWeight {
        t,
        net,
        a,
        omega_t: Weight::new(omega)?,
        partition: part,
        partition_lower,
        sandwich: Sandwich {
            constant,
            achieved,
            holds,
        },
        local_constant,
        comparability,
    })
}

fn max_bound(a: Bound, b: Bound) -> Bound {
    match (a, b) {
        (Bound::Finite(x), Bound::Finite(y)) => Bound::Finite(x.max(y)),
        _ => Bound::Unbounded,
    }
}

/// A named point set treated as open.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestSet {
    pub name: String,
    pub members: Vec<usize>,
}

impl TestSet {
    /// Points with every coordinate strictly inside `(lo_k, hi_k)`.
    pub fn open_box(
        space: &Space,
        name: &str,
        lo: &[f64],
        hi: &[f64],
    ) -> Result<TestSet, MollifyError> {
        let coords = space
            .coords()
            .ok_or_else(|| MollifyError::NoCoordinates(name.to_string()))?;
        let dim = coords.first().map_or(0, Vec::len);
        if lo.len() != dim || hi.len() != dim {
            return Err(MollifyError::BoxDimension {
                name: name.to_string(),
                got: lo.len().max(hi.len()),
                want: dim,
            });
        }
        let members = coords
            .iter()
            .enumerate()
            .filter(|(_, x)| {
                x.iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(&v, (&l, &h))| l < v && v < h)
            })
            .map(|(i, _)| i)
            .collect();
        Ok(TestSet {
            name: name.to_string(),
            members,
        })
    }

    pub fn whole(space: &Space) -> TestSet {
        TestSet {
            name: "X".to_string(),
            members: (0..space.len()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakRow {
    pub t: f64,
    pub set: String,
    pub nu: f64,
    pub nu_t: f64,
    pub relative_error: f64,
    /// `ν(U_{4t})` with `U_{4t}` the points of `U` farther than `4t` from
    /// the complement.
    pub nu_inner: f64,
    pub inner_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakTable {
    pub rows: Vec<WeakRow>,
}

impl WeakTable {
    /// Errors of one set, in the order of the scales probed.
    pub fn errors(&self, set: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.set == set)
            .map(|r| r.relative_error)
            .collect()
    }
}

/// True when `errors` never grows, except for at most one step of relative
/// size at most `slack`.
pub fn nonincreasing_with_slack(errors: &[f64], slack: f64) -> bool {
    let mut inversions = 0;
    for w in errors.windows(2) {
        if w[1] > w[0] {
            inversions += 1;
            if inversions > 1 || w[1] > w[0] * (1.0 + slack) {
                return false;
            }
        }
    }
    true
}

pub fn weak_convergence_probe(
    space: &Space,
    weight: &Weight,
    t_list: &[f64],
    sets: &[TestSet],
) -> Result<WeakTable, MollifyError> {
    weight.check_len(space)?;
    let n = space.len();
    let nu: Vec<f64> = (0..n).map(|i| weight[i] * space.mu()[i]).collect();
    let total: f64 = nu.iter().sum();
    let floor = 1e-12 * total.max(f64::MIN_POSITIVE);
    for s in sets {
        for &i in &s.members {
            space.check_point(i)?;
        }
    }
    let mut rows = Vec::new();
    for &t in t_list {
        let m = mollify(space, weight, t)?;
        for s in sets {
            let mut inside = vec![false; n];
            for &i in &s.members {
                inside[i] = true;
            }
            let nu_u: f64 = s.members.iter().map(|&i| nu[i]).sum();
            let nu_t: f64 = s
                .members
                .iter()
                .map(|&i| m.omega_t[i] * space.mu()[i])
                .sum();
            let nu_inner: f64 = s
                .members
                .iter()
                .filter(|&&i| {
                    (0..n)
                        .filter(|&j| !inside[j])
                        .all(|j| space.dist(i, j) > 4.0 * t)
                })
                .map(|&i| nu[i])
                .sum();
            rows.push(WeakRow {
                t,
                set: s.name.clone(),
                nu: nu_u,
                nu_t,
                relative_error: (nu_t - nu_u).abs() / nu_u.max(floor),
                nu_inner,
                inner_holds: nu_t >= nu_inner - 1e-12,
            });
        }
    }
    Ok(WeakTable { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RhiScale {
    pub t: f64,
    /// `sup_B (⨍ω_t)^{1/Q} / ⨍ω_t^{1/Q}` over every ball.
    pub constant: Extremum,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RhiProbe {
    pub scales: Vec<RhiScale>,
    pub max_constant: f64,
    /// Largest over smallest constant across scales.
    pub spread: f64,
    pub uniform: bool,
}

/// `f = ω_t^{1/Q}` for the mollified weight.
pub fn root_weight(space: &Space, m: &MollifiedWeight) -> Result<Weight, MollifyError> {
    let q = space.q();
    Ok(Weight::new(
        m.omega_t
            .values()
            .iter()
            .map(|&w| w.powf(1.0 / q))
            .collect(),
    )?)
}

pub fn uniform_rhi_probe(
    space: &Space,
    weight: &Weight,
    t_list: &[f64],
) -> Result<RhiProbe, MollifyError> {
    let mut scales = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let m = mollify(space, weight, t)?;
        let f = root_weight(space, &m)?;
        scales.push(RhiScale {
            t,
            constant: power_mean_constant(space, &f, space.q())?,
        });
    }
    let vals: Vec<f64> = scales
        .iter()
        .filter_map(|s| s.constant.value.finite())
        .collect();
    let max_constant = vals.iter().copied().fold(1.0, f64::max);
    let min_constant = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if vals.is_empty() {
        1.0
    } else {
        max_constant / min_constant
    };
    Ok(RhiProbe {
        scales,
        max_constant,
        spread,
        uniform: spread <= UNIFORM_RHI_FACTOR,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GehringPoint {
    pub eps: f64,
    /// `sup_B (⨍f^{Q+ε})^{1/(Q+ε)} / ⨍f`.
    pub constant: Extremum,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GehringProbe {
    pub t: f64,
    /// The exponent-`Q` constant.
    pub base: Extremum,
    pub curve: Vec<GehringPoint>,
    /// Largest grid `ε` whose constant is at most [`GEHRING_FACTOR`] times
    /// the base constant.
    pub eps_star: Option<f64>,
}

pub fn gehring_probe(
    space: &Space,
    mollified: &MollifiedWeight,
    eps_grid: &[f64],
) -> Result<GehringProbe, MollifyError> {
    if let Some(&e) = eps_grid.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(MollifyError::Weight(WeightError::Grid {
            what: "Gehring gain",
            value: e,
        }));
    }
    let f = root_weight(space, mollified)?;
    let q = space.q();
    let base = power_mean_constant(space, &f, q)?;
    let limit = GEHRING_FACTOR * base.value.finite().unwrap_or(f64::INFINITY);
    let mut curve = Vec::with_capacity(eps_grid.len());
    let mut eps_star: Option<f64> = None;
    for &eps in eps_grid {
        let c = power_mean_constant(space, &f, q + eps)?;
        if c.value.finite().is_some_and(|v| v <= limit) {
            eps_star = Some(eps_star.map_or(eps, |s| s.max(eps)));
        }
        curve.push(GehringPoint { eps, constant: c });
    }
    Ok(GehringProbe {
        t: mollified.t,
        base,
        curve,
        eps_star,
    })
}

/// Geometric scales from `diam/4` halving down to twice the smallest
/// spacing.
pub fn default_t_grid(space: &Space) -> Vec<f64> {
    let spacing = (0..space.len())
        .map(|i| space.nearest_distance(i))
        .fold(f64::INFINITY, f64::min);
    let mut t = space.diameter() / 4.0;
    let mut out = Vec::new();
    while t >= 2.0 * spacing && out.len() < 64 {
        out.push(t);
        t /= 2.0;
    }
    if out.is_empty() {
        out.push(space.diameter().max(spacing));
    }
    out
}
