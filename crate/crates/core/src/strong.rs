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

//! Quasi-distance `δ_ν`, its chain metrization and the strong `A_∞`
//! distortion certificate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::metric_closure;
use crate::space::{
    doubling_constant, BallIndex, BallRef, Bound, Convention, Space, SpaceError, Weight,
};
use crate::weights::{classify, ApCurve, CurvePoint, Grids, WeightError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrongError {
    #[error("matrix has {len} entries, expected {n}×{n}")]
    Shape { n: usize, len: usize },
    #[error("quasi-distance is not symmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("quasi-distance must be finite and nonnegative with zero diagonal (entry ({i}, {j}))")]
    Entry { i: usize, j: usize },
    #[error("ν is not doubling (witness {witness:?})")]
    NonDoubling { witness: Option<BallRef> },
    #[error("stability needs at least 2 scales, got {0}")]
    TooFewScales(usize),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

fn root_q(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x
    } else if q == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / q)
    }
}

/// `δ_ν(x,y) = [ν(B°(x,d)) + ν(B°(y,d))]^{1/Q}`, `d = d(x,y)`, as a
/// row-major n×n matrix.
pub fn quasi_distance(space: &Space, weight: &Weight) -> Result<Vec<f64>, StrongError> {
    weight.check_len(space)?;
    let index = BallIndex::new(space);
    Ok(quasi_distance_with_index(space, &index, weight))
}

/// `ν(B°(c, r))` for every center and every `r` in `dist_row(c)`.
fn open_ball_masses(space: &Space, index: &BallIndex, weight: &Weight) -> Vec<f64> {
    let n = space.len();
    let nu: Vec<f64> = (0..n).map(|i| weight[i] * space.mu()[i]).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|c| {
            let prefix = index.prefix(c, &nu);
            space
                .dist_row(c)
                .iter()
                .map(|&d| prefix[index.count(c, d, Convention::Open)])
                .collect()
        })
        .collect();
    rows.concat()
}

fn quasi_distance_with_index(space: &Space, index: &BallIndex, weight: &Weight) -> Vec<f64> {
    let n = space.len();
    let balls = open_ball_masses(space, index, weight);
    let q = space.q();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = root_q(balls[i * n + j] + balls[j * n + i], q);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

/// Chain metric with its distortion against `δ_ν`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrization {
    #[serde(skip)]
    pub delta_nu: Vec<f64>,
    #[serde(skip)]
    pub delta: Vec<f64>,
    pub n: usize,
    pub distortion: Bound,
    pub witness: Option<(usize, usize)>,
    pub restricted: bool,
}

impl Metrization {
    pub fn delta_at(&self, i: usize, j: usize) -> f64 {
        self.delta[i * self.n + j]
    }

    pub fn delta_nu_at(&self, i: usize, j: usize) -> f64 {
        self.delta_nu[i * self.n + j]
    }
}

fn validate_quasi(n: usize, m: &[f64]) -> Result<(), StrongError> {
    if m.len() != n * n {
        return Err(StrongError::Shape { n, len: m.len() });
    }
    for i in 0..n {
        for j in 0..n {
            let v = m[i * n + j];
            if !(v.is_finite() && v >= 0.0) || (i == j && v != 0.0) {
                return Err(StrongError::Entry { i, j });
            }
            if v != m[j * n + i] {
                return Err(StrongError::Asymmetric {
                    i: i.min(j),
                    j: i.max(j),
                });
            }
        }
    }
    Ok(())
}

/// Largest chain metric below `δ_ν`. Unrestricted chains use all-pairs
/// shortest paths on the complete graph. Restricted chains from `x` to `y`
/// stay in the closed ball `B(x, 2d(x,y))`; the result is symmetrized by
/// taking the smaller of the two directions and need not satisfy the
/// triangle inequality.
pub fn chain_metrization(
    delta_nu: &[f64],
    space: &Space,
    restricted: bool,
) -> Result<Metrization, StrongError> {
    let n = space.len();
    validate_quasi(n, delta_nu)?;
    let delta = if restricted {
        restricted_chains(delta_nu, space)
    } else {
        let mut d = delta_nu.to_vec();
        metric_closure(n, &mut d);
        d
    };
    let (distortion, witness) = distortion(n, delta_nu, &delta);
    Ok(Metrization {
        delta_nu: delta_nu.to_vec(),
        delta,
        n,
        distortion,
        witness,
        restricted,
    })
}

/// `max δ_ν/δ` over pairs `i < j`; unbounded as soon as `δ` fails to
/// separate two points, with the first such pair as witness.
fn distortion(n: usize, delta_nu: &[f64], delta: &[f64]) -> (Bound, Option<(usize, usize)>) {
    let mut best = 1.0;
    let mut witness = None;
    for i in 0..n {
        for j in i + 1..n {
            let d = delta[i * n + j];
            if d == 0.0 {
                return (Bound::Unbounded, Some((i, j)));
            }
            let r = delta_nu[i * n + j] / d;
            if r > best || witness.is_none() && r == best {
                best = r;
                witness = Some((i, j));
            }
        }
    }
    (Bound::Finite(best), witness)
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// For each source, vertices join in distance order; the shortest-path row
/// over the inserted set is repaired after each insertion by propagating
/// decreases out of the new vertex.
fn restricted_chains(w: &[f64], space: &Space) -> Vec<f64> {
    let n = space.len();
    let index = BallIndex::new(space);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let order = index.order(x);
            let sorted = index.sorted(x);
            let mut dist = vec![f64::INFINITY; n];
            let mut inserted: Vec<usize> = Vec::with_capacity(n);
            let mut row = vec![0.0; n];
            let mut heap = BinaryHeap::new();
            let mut next = 0;
            for k in 0..n {
                let y = order[k];
                let limit = 2.0 * sorted[k];
                while next < n && sorted[next] <= limit {
                    let v = order[next];
                    next += 1;
                    let dv = if v == x {
                        0.0
                    } else {
                        inserted
                            .iter()
                            .map(|&u| dist[u] + w[u * n + v])
                            .fold(f64::INFINITY, f64::min)
                    };
                    dist[v] = dv;
                    inserted.push(v);
                    heap.push(Entry { cost: dv, node: v });
                    while let Some(Entry { cost, node: a }) = heap.pop() {
                        if cost > dist[a] {
                            continue;
                        }
                        for &u in &inserted {
                            let cand = cost + w[a * n + u];
                            if cand < dist[u] {
                                dist[u] = cand;
                                heap.push(Entry {
                                    cost: cand,
                                    node: u,
                                });
                            }
                        }
                    }
                }
                row[y] = dist[y];
            }
            row
        })
        .collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = rows[i][j].min(rows[j][i]);
        }
    }
    out
}

/// Result of the two-sided comparison between `δ_ν(x,y)` and
/// `ν(B°(x,d(x,y)))^{1/Q}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    /// Smallest `C` with `δ_ν(x,y) ≤ C ν(B°(x,d))^{1/Q}` over pairs with a
    /// ν-positive ball.
    pub constant: f64,
    pub witness: Option<(usize, usize)>,
    /// `ν(B°(x,d))^{1/Q} ≤ δ_ν(x,y)` held for every ordered pair.
    pub lower_holds: bool,
    pub nu_doubling: Bound,
}

/// `δ_ν(x,y) / ν(B°(x,d(x,y)))^{1/Q}` for one ordered pair, by direct
/// enumeration of both open balls.
pub fn comparison_ratio(
    space: &Space,
    weight: &Weight,
    x: usize,
    y: usize,
) -> Result<Bound, StrongError> {
    weight.check_len(space)?;
    space.check_point(x)?;
    space.check_point(y)?;
    let d = space.dist(x, y);
    let nu_ball = |c: usize| -> f64 {
        (0..space.len())
            .filter(|&j| space.dist(c, j) < d)
            .map(|j| weight[j] * space.mu()[j])
            .sum()
    };
    let (bx, by) = (nu_ball(x), nu_ball(y));
    if bx <= 0.0 {
        return Ok(Bound::Unbounded);
    }
    Ok(Bound::Finite(
        root_q(bx + by, space.q()) / root_q(bx, space.q()),
    ))
}

pub fn comparison_check(space: &Space, weight: &Weight) -> Result<Comparison, StrongError> {
    weight.check_len(space)?;
    let doubling = doubling_constant(space, Some(weight), Convention::Closed);
    if !doubling.value.is_finite() {
        return Err(StrongError::NonDoubling {
            witness: doubling.witness,
        });
    }
    let index = BallIndex::new(space);
    let balls = open_ball_masses(space, &index, weight);
    let dn = quasi_distance_with_index(space, &index, weight);
    let n = space.len();
    let q = space.q();
    let mut constant = 1.0;
    let mut witness = None;
    let mut lower_holds = true;
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let lower = root_q(balls[x * n + y], q);
            if lower > dn[x * n + y] {
                lower_holds = false;
            }
            if lower > 0.0 {
                let r = dn[x * n + y] / lower;
                if r > constant || witness.is_none() && r == constant {
                    constant = r;
                    witness = Some((x, y));
                }
            }
        }
    }
    Ok(Comparison {
        constant,
        witness,
        lower_holds,
        nu_doubling: doubling.value,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum SaVerdict {
    /// Consecutive distortions within a factor 2.
    Stable,
    Unstable,
    /// Some scale has unbounded distortion.
    NotStrong,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleEntry {
    pub n: usize,
    pub distortion: Bound,
    pub witness: Option<(usize, usize)>,
    /// Distortion with chains confined to `B(x, 2d(x,y))`, when requested.
    pub restricted_distortion: Option<Bound>,
    pub cond2_curve: Vec<CurvePoint>,
    pub ap_curve: ApCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stability {
    pub scales: Vec<ScaleEntry>,
    /// Largest ratio between consecutive finite distortions.
    pub max_step_ratio: Option<f64>,
    pub verdict: SaVerdict,
    pub note: &'static str,
}

pub const STABILITY_FACTOR: f64 = 2.0;

/// Per-scale distortions of a refinement sequence, with the `A_∞` upper
/// constant and `A_p` curve of each scale attached.
pub fn sa_verdict(
    family: &[(Space, Weight)],
    p_grid: &[f64],
    restricted: bool,
) -> Result<Stability, StrongError> {
    if family.len() < 2 {
        return Err(StrongError::TooFewScales(family.len()));
    }
    let grids = Grids {
        p: p_grid.to_vec(),
        eps: vec![],
    };
    let mut scales = Vec::with_capacity(family.len());
    for (space, weight) in family {
        let dn = quasi_distance(space, weight)?;
        let m = chain_metrization(&dn, space, false)?;
        let restricted_distortion = if restricted {
            Some(chain_metrization(&dn, space, true)?.distortion)
        } else {
            None
        };
        let report = classify(space, weight, &grids, Convention::Closed)?;
        scales.push(ScaleEntry {
            n: space.len(),
            distortion: m.distortion,
            witness: m.witness,
            restricted_distortion,
            cond2_curve: report.cond2_curve,
            ap_curve: report.ap_curve,
        });
    }
    let mut max_step_ratio: Option<f64> = None;
    let mut unbounded = false;
    for pair in scales.windows(2) {
        match (pair[0].distortion.finite(), pair[1].distortion.finite()) {
            (Some(a), Some(b)) => {
                let r = a.max(b) / a.min(b);
                max_step_ratio = Some(max_step_ratio.map_or(r, |m| m.max(r)));
            }
            _ => unbounded = true,
        }
    }
    let verdict = if unbounded {
        SaVerdict::NotStrong
    } else if max_step_ratio.is_some_and(|r| r <= STABILITY_FACTOR) {
        SaVerdict::Stable
    } else {
        SaVerdict::Unstable
    };
    Ok(Stability {
        scales,
        max_step_ratio,
        verdict,
        note: "finite spaces with positive weights always have finite distortion; strong means stable across refinement",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SpaceParts;

    fn line(n: usize, q: f64) -> Space {
        let dist = (0..n * n)
            .map(|k| ((k / n) as f64 - (k % n) as f64).abs())
            .collect();
        Space::new(SpaceParts {
            dist,
            mu: vec![1.0; n],
            q,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn two_point_quasi_distance() {
        let w = Weight::constant(2, 1.0);
        assert_eq!(quasi_distance(&line(2, 1.0), &w).unwrap()[1], 2.0);
        assert_eq!(quasi_distance(&line(2, 2.0), &w).unwrap()[1], 2f64.sqrt());
        let zero = Weight::constant(2, 0.0);
        assert!(quasi_distance(&line(2, 1.0), &zero)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn three_collinear_points() {
        let s = line(3, 1.0);
        let dn = quasi_distance(&s, &Weight::constant(3, 1.0)).unwrap();
        assert_eq!(dn[2], 4.0);
        let m = chain_metrization(&dn, &s, false).unwrap();
        assert_eq!(m.delta_at(0, 2), 4.0);
        assert_eq!(m.distortion, Bound::Finite(1.0));
    }

    #[test]
    fn metric_input_is_fixed() {
        let s = line(4, 1.0);
        let m = chain_metrization(s.dist_matrix(), &s, false).unwrap();
        assert_eq!(m.delta, s.dist_matrix());
        assert_eq!(m.distortion, Bound::Finite(1.0));
        let r = chain_metrization(s.dist_matrix(), &s, true).unwrap();
        assert_eq!(r.delta, s.dist_matrix());
    }

    #[test]
    fn rejects_bad_matrices() {
        let s = line(2, 1.0);
        assert!(matches!(
            chain_metrization(&[0.0, 1.0, 2.0, 0.0], &s, false),
            Err(StrongError::Asymmetric { .. })
        ));
        assert!(matches!(
            chain_metrization(&[1.0, 1.0, 1.0, 0.0], &s, false),
            Err(StrongError::Entry { .. })
        ));
        assert!(matches!(
            chain_metrization(&[0.0], &s, false),
            Err(StrongError::Shape { .. })
        ));
    }

    #[test]
    fn too_few_scales() {
        let s = line(2, 1.0);
        let w = Weight::constant(2, 1.0);
        assert_eq!(
            sa_verdict(&[(s, w)], &[2.0], false).unwrap_err(),
            StrongError::TooFewScales(1)
        );
    }
}
