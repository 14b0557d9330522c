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

//! Finite metric measure spaces: validated distance matrices, point masses,
//! balls, discrete integration, and doubling/regularity diagnostics.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::graph;

/// Absolute tolerance for metric and skeleton validation.
pub const METRIC_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("space must contain at least one point")]
    Empty,
    #[error("distance matrix has {len} entries, expected {n}x{n}")]
    Shape { n: usize, len: usize },
    #[error("invalid point id {id} (space has {n} points)")]
    InvalidPoint { id: usize, n: usize },
    #[error("invariant violated: non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invariant violated: dist({0},{0}) must be 0")]
    Diagonal(usize),
    #[error("invariant violated: dist({i},{j}) != dist({j},{i})")]
    Symmetry { i: usize, j: usize },
    #[error("invariant violated: dist({i},{j}) must be positive for distinct points")]
    Coincident { i: usize, j: usize },
    #[error("invariant violated: triangle inequality fails for ({i},{j},{k})")]
    Triangle { i: usize, j: usize, k: usize },
    #[error("invariant violated: mass of point {0} must be positive")]
    Mass(usize),
    #[error("invariant violated: homogeneous dimension must be positive, got {0}")]
    Dimension(f64),
    #[error("invariant violated: skeleton edge ({a},{b}) is invalid")]
    Edge { a: usize, b: usize },
    #[error(
        "invariant violated: skeleton path length {graph} between {i} and {j} differs from metric {metric}"
    )]
    Skeleton {
        i: usize,
        j: usize,
        graph: f64,
        metric: f64,
    },
    #[error("invariant violated: weight has {len} entries, expected {n}")]
    WeightShape { n: usize, len: usize },
    #[error("invariant violated: weight at point {0} must be finite and nonnegative")]
    WeightValue(usize),
    #[error("coordinates must have one row per point with a common dimension")]
    Coordinates,
    #[error("operation needs at least {0} points")]
    TooFewPoints(usize),
}

/// Ball membership convention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `dist <= r`
    #[default]
    Closed,
    /// `dist < r`
    Open,
}

/// Undirected skeleton edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// A real number that may be the sentinel `UNBOUNDED`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    Finite(f64),
    Unbounded,
}

impl Bound {
    pub fn is_finite(self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Unbounded => None,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{v}"),
            Bound::Unbounded => f.write_str("UNBOUNDED"),
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Bound::Finite(v) => s.serialize_f64(*v),
            Bound::Unbounded => s.serialize_str("UNBOUNDED"),
        }
    }
}

/// Ball descriptor without its member list.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallRef {
    pub center: usize,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
    pub convention: Convention,
    /// Ascending point ids.
    pub members: Vec<usize>,
}

impl Ball {
    pub fn descriptor(&self) -> BallRef {
        BallRef {
            center: self.center,
            radius: self.radius,
        }
    }
}

/// Nonnegative per-point density.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight(Vec<f64>);

impl Weight {
    pub fn new(values: Vec<f64>) -> Result<Self, SpaceError> {
        if let Some(i) = values.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(SpaceError::WeightValue(i));
        }
        Ok(Weight(values))
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Weight(vec![c; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Weight {
        Weight(self.0.iter().map(|w| w * c).collect())
    }

    pub fn check_len(&self, space: &Space) -> Result<(), SpaceError> {
        if self.0.len() != space.len() {
            return Err(SpaceError::WeightShape {
                n: space.len(),
                len: self.0.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Weight {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Raw ingredients of a [`Space`], validated by [`Space::new`].
#[derive(Clone, Debug, Default)]
pub struct SpaceParts {
    /// Row-major n×n distances.
    pub dist: Vec<f64>,
    pub mu: Vec<f64>,
    pub q: f64,
    pub coords: Option<Vec<Vec<f64>>>,
    pub skeleton: Option<Vec<Edge>>,
}

/// A finite metric measure space.
///
/// Construction validates every invariant: zero diagonal, symmetry,
/// separation of distinct points, the triangle inequality (to
/// [`METRIC_TOL`]), positive masses and, when a skeleton is attached, that
/// shortest skeleton paths reproduce the metric.
#[derive(Clone, Debug, PartialEq)]
pub struct Space {
    n: usize,
    dist: Vec<f64>,
    mu: Vec<f64>,
    q: f64,
    coords: Option<Vec<Vec<f64>>>,
    skeleton: Option<Vec<Edge>>,
}

impl Space {
    pub fn new(parts: SpaceParts) -> Result<Self, SpaceError> {
        let SpaceParts {
            dist,
            mu,
            q,
            coords,
            skeleton,
        } = parts;
        let n = mu.len();
        if n == 0 {
            return Err(SpaceError::Empty);
        }
        if dist.len() != n * n {
            return Err(SpaceError::Shape { n, len: dist.len() });
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(SpaceError::Dimension(q));
        }
        if dist.iter().any(|d| !d.is_finite()) {
            return Err(SpaceError::NonFinite("distance matrix"));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(SpaceError::NonFinite("measure"));
        }
        if let Some(i) = mu.iter().position(|m| *m <= 0.0) {
            return Err(SpaceError::Mass(i));
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(SpaceError::Diagonal(i));
            }
            for j in (i + 1)..n {
                let d = dist[i * n + j];
                if d != dist[j * n + i] {
                    return Err(SpaceError::Symmetry { i, j });
                }
                if d <= 0.0 {
                    return Err(SpaceError::Coincident { i, j });
                }
            }
        }
        check_triangle(n, &dist)?;
        if let Some(c) = &coords {
            if c.len() != n || c.iter().any(|row| row.len() != c[0].len()) {
                return Err(SpaceError::Coordinates);
            }
            if c.iter().flatten().any(|x| !x.is_finite()) {
                return Err(SpaceError::NonFinite("coordinates"));
            }
        }
        if let Some(edges) = &skeleton {
            check_skeleton(n, &dist, edges)?;
        }
        Ok(Space {
            n,
            dist,
            mu,
            q,
            coords,
            skeleton,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn dist_row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn dist_matrix(&self) -> &[f64] {
        &self.dist
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn skeleton(&self) -> Option<&[Edge]> {
        self.skeleton.as_deref()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    pub fn check_point(&self, id: usize) -> Result<(), SpaceError> {
        if id >= self.n {
            return Err(SpaceError::InvalidPoint { id, n: self.n });
        }
        Ok(())
    }

    /// Distance from `i` to the nearest other point, or 0 for a single point.
    pub fn nearest_distance(&self, i: usize) -> f64 {
        if self.n == 1 {
            return 0.0;
        }
        self.dist_row(i)
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &d)| d)
            .fold(f64::INFINITY, f64::min)
    }

    /// Same space with every mass multiplied by `c`.
    pub fn with_scaled_measure(&self, c: f64) -> Result<Space, SpaceError> {
        let mut s = self.clone();
        for m in &mut s.mu {
            *m *= c;
        }
        if let Some(i) = s.mu.iter().position(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(SpaceError::Mass(i));
        }
        Ok(s)
    }
}

fn check_triangle(n: usize, dist: &[f64]) -> Result<(), SpaceError> {
    let bad = (0..n).into_par_iter().find_map_first(|i| {
        let row_i = &dist[i * n..(i + 1) * n];
        for j in 0..n {
            let dij = row_i[j];
            let row_j = &dist[j * n..(j + 1) * n];
            for k in (i + 1)..n {
                if row_i[k] > dij + row_j[k] + METRIC_TOL {
                    return Some((i, j, k));
                }
            }
        }
        None
    });
    match bad {
        Some((i, j, k)) => Err(SpaceError::Triangle { i, j, k }),
        None => Ok(()),
    }
}

fn check_skeleton(n: usize, dist: &[f64], edges: &[Edge]) -> Result<(), SpaceError> {
    for e in edges {
        if e.a >= n || e.b >= n || e.a == e.b || !(e.length.is_finite() && e.length > 0.0) {
            return Err(SpaceError::Edge { a: e.a, b: e.b });
        }
    }
    let adj = graph::adjacency(n, edges);
    let bad = (0..n).into_par_iter().find_map_first(|i| {
        let sp = graph::dijkstra(&adj, &[i], |_, _, len| len).dist;
        (0..n).find_map(|j| {
            let metric = dist[i * n + j];
            let g = sp[j];
            if !((g - metric).abs() <= METRIC_TOL) {
                Some((i, j, g, metric))
            } else {
                None
            }
        })
    });
    match bad {
        Some((i, j, graph, metric)) => Err(SpaceError::Skeleton {
            i,
            j,
            graph,
            metric,
        }),
        None => Ok(()),
    }
}

/// Sorted distances from `center` to every other point, deduplicated.
///
/// These are exactly the radii at which closed balls about `center` change.
pub fn candidate_radii(space: &Space, center: usize) -> Result<Vec<f64>, SpaceError> {
    space.check_point(center)?;
    let mut r: Vec<f64> = space
        .dist_row(center)
        .iter()
        .copied()
        .filter(|d| *d > 0.0)
        .collect();
    r.sort_by(f64::total_cmp);
    r.dedup();
    Ok(r)
}

pub fn ball(
    space: &Space,
    center: usize,
    radius: f64,
    convention: Convention,
) -> Result<Ball, SpaceError> {
    space.check_point(center)?;
    let members = space
        .dist_row(center)
        .iter()
        .enumerate()
        .filter(|&(_, &d)| match convention {
            Convention::Closed => d <= radius,
            Convention::Open => d < radius,
        })
        .map(|(j, _)| j)
        .collect();
    Ok(Ball {
        center,
        radius,
        convention,
        members,
    })
}

/// `Σ mu_i` (or `Σ ω_i mu_i`) over `set`.
pub fn measure_of(space: &Space, weight: Option<&Weight>, set: &[usize]) -> f64 {
    let mu = space.mu();
    match weight {
        None => set.iter().map(|&i| mu[i]).sum(),
        Some(w) => set.iter().map(|&i| w[i] * mu[i]).sum(),
    }
}

/// Per-point masses of `μ` or of `ν = ω μ`.
pub fn masses(space: &Space, weight: Option<&Weight>) -> Vec<f64> {
    match weight {
        None => space.mu().to_vec(),
        Some(w) => space
            .mu()
            .iter()
            .zip(w.values())
            .map(|(m, w)| m * w)
            .collect(),
    }
}

/// For every center, all points ordered by `(distance, id)`.
///
/// Every ball about a center is a prefix of its row; prefix sums turn ball
/// integrals into O(1) lookups.
#[derive(Clone, Debug)]
pub struct BallIndex {
    n: usize,
    order: Vec<usize>,
    sorted: Vec<f64>,
    /// Per center, the prefix lengths at which the distance strictly increases
    /// (the last entry is n).
    ends: Vec<Vec<usize>>,
}

impl BallIndex {
    pub fn new(space: &Space) -> Self {
        let n = space.len();
        let rows: Vec<(Vec<usize>, Vec<f64>, Vec<usize>)> = (0..n)
            .into_par_iter()
            .map(|c| {
                let row = space.dist_row(c);
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
                let d: Vec<f64> = idx.iter().map(|&j| row[j]).collect();
                let mut ends = Vec::new();
                for k in 1..=n {
                    if k == n || d[k] != d[k - 1] {
                        ends.push(k);
                    }
                }
                (idx, d, ends)
            })
            .collect();
        let mut order = Vec::with_capacity(n * n);
        let mut sorted = Vec::with_capacity(n * n);
        let mut ends = Vec::with_capacity(n);
        for (o, d, e) in rows {
            order.extend(o);
            sorted.extend(d);
            ends.push(e);
        }
        BallIndex {
            n,
            order,
            sorted,
            ends,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Points ordered by distance from `c`.
    pub fn order(&self, c: usize) -> &[usize] {
        &self.order[c * self.n..(c + 1) * self.n]
    }

    /// Sorted distances from `c`, aligned with [`BallIndex::order`].
    pub fn sorted(&self, c: usize) -> &[f64] {
        &self.sorted[c * self.n..(c + 1) * self.n]
    }

    /// Prefix lengths of the distinct closed balls about `c`, smallest
    /// (the singleton) first.
    pub fn ends(&self, c: usize) -> &[usize] {
        &self.ends[c]
    }

    /// Radius of the closed ball formed by the first `len` points about `c`.
    pub fn radius_of(&self, c: usize, len: usize) -> f64 {
        self.sorted(c)[len - 1]
    }

    pub fn count(&self, c: usize, radius: f64, convention: Convention) -> usize {
        let s = self.sorted(c);
        match convention {
            Convention::Closed => s.partition_point(|&d| d <= radius),
            Convention::Open => s.partition_point(|&d| d < radius),
        }
    }

    /// Prefix sums of `values` in the distance order of `c`; entry k is the
    /// sum over the first k points.
    pub fn prefix(&self, c: usize, values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n + 1);
        let mut acc = 0.0;
        out.push(acc);
        for &j in self.order(c) {
            acc += values[j];
            out.push(acc);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoublingReport {
    pub value: Bound,
    /// Ball attaining the value (first in center/radius order).
    pub witness: Option<BallRef>,
}

/// `sup m(B(x,2r)) / m(B(x,r))` over all centers and all radii `r > 0`,
/// where `m` is `μ` or `ω μ`. A zero denominator under a positive numerator
/// yields [`Bound::Unbounded`].
///
/// Balls about `x` only change at the candidate radii `r_1 < … < r_K`, so on
/// each interval `[r_k, r_{k+1})` the ratio is largest as `r → r_{k+1}`, where
/// `B(x,2r)` becomes `{d < 2 r_{k+1}}`. The supremum is attained: the witness
/// radius is the smallest one at which the maximal pair of balls occurs
/// under `convention`.
pub fn doubling_constant(
    space: &Space,
    weight: Option<&Weight>,
    convention: Convention,
) -> DoublingReport {
    let index = BallIndex::new(space);
    doubling_with_index(space, &index, weight, convention)
}

pub fn doubling_with_index(
    space: &Space,
    index: &BallIndex,
    weight: Option<&Weight>,
    convention: Convention,
) -> DoublingReport {
    let m = masses(space, weight);
    let per_center: Vec<(Bound, Option<BallRef>)> = (0..space.len())
        .into_par_iter()
        .map(|c| {
            let pre = index.prefix(c, &m);
            let s = index.sorted(c);
            let ends = index.ends(c);
            let mut best = Bound::Finite(1.0);
            let mut witness = None;
            for k in 0..ends.len().saturating_sub(1) {
                let inner = ends[k];
                let next_r = s[ends[k]];
                let outer = index.count(c, 2.0 * next_r, Convention::Open);
                let (den, num) = (pre[inner], pre[outer]);
                let val = if den > 0.0 {
                    Bound::Finite(num / den)
                } else if num > 0.0 {
                    Bound::Unbounded
                } else {
                    continue;
                };
                if bound_gt(val, best) {
                    best = val;
                    let radius = match convention {
                        Convention::Open => next_r,
                        Convention::Closed => s[inner - 1].max(s[outer - 1] / 2.0),
                    };
                    witness = Some(BallRef { center: c, radius });
                    if val == Bound::Unbounded {
                        break;
                    }
                }
            }
            (best, witness)
        })
        .collect();
    let mut value = Bound::Finite(1.0);
    let mut witness = None;
    for (v, w) in per_center {
        if bound_gt(v, value) {
            value = v;
            witness = w;
        }
    }
    DoublingReport { value, witness }
}

/// Ratio `m(B(x,2r)) / m(B(x,r))` for one ball, by direct enumeration.
pub fn doubling_ratio(
    space: &Space,
    weight: Option<&Weight>,
    at: BallRef,
    convention: Convention,
) -> Result<Bound, SpaceError> {
    let inner = ball(space, at.center, at.radius, convention)?;
    let outer = ball(space, at.center, 2.0 * at.radius, convention)?;
    let den = measure_of(space, weight, &inner.members);
    let num = measure_of(space, weight, &outer.members);
    Ok(if den > 0.0 {
        Bound::Finite(num / den)
    } else if num > 0.0 {
        Bound::Unbounded
    } else {
        Bound::Finite(1.0)
    })
}

fn bound_gt(a: Bound, b: Bound) -> bool {
    match (a, b) {
        (Bound::Unbounded, Bound::Unbounded) => false,
        (Bound::Unbounded, _) => true,
        (_, Bound::Unbounded) => false,
        (Bound::Finite(x), Bound::Finite(y)) => x.partial_cmp(&y) == Some(Ordering::Greater),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityFit {
    /// Smallest `c_A` with `r^Q / c_A <= μ(B(x,r)) <= c_A r^Q` over every
    /// center and candidate radius (closed balls).
    pub c_a: f64,
    /// Least-squares slope of `log μ(B)` against `log r`.
    pub q_fit: f64,
    pub witness: BallRef,
    pub samples: usize,
    pub fit_samples: usize,
}

/// Ahlfors-regularity diagnostics.
///
/// `q_fit` regresses on radii up to a quarter of the diameter, where balls
/// have not yet saturated against the extent of the space, and measures each
/// ball at its jump radius by the mean of its open and closed masses.
pub fn regularity_fit(space: &Space) -> Result<RegularityFit, SpaceError> {
    if space.len() < 2 {
        return Err(SpaceError::TooFewPoints(2));
    }
    let index = BallIndex::new(space);
    let q = space.q();
    let mu = space.mu();
    let cap = space.diameter() / 4.0;
    let mut c_a = 1.0;
    let mut witness = BallRef {
        center: 0,
        radius: 0.0,
    };
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    let (mut samples, mut fit_samples) = (0usize, 0usize);
    for c in 0..space.len() {
        let pre = index.prefix(c, mu);
        let s = index.sorted(c);
        let ends = index.ends(c);
        for k in 1..ends.len() {
            let r = s[ends[k] - 1];
            let m = pre[ends[k]];
            let rq = r.powf(q);
            let ratio = (m / rq).max(rq / m);
            if ratio > c_a {
                c_a = ratio;
                witness = BallRef {
                    center: c,
                    radius: r,
                };
            }
            samples += 1;
            if r <= cap {
                let mid = 0.5 * (m + pre[ends[k - 1]]);
                let (x, y) = (r.ln(), mid.ln());
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                fit_samples += 1;
            }
        }
    }
    let nf = fit_samples as f64;
    let denom = nf * sxx - sx * sx;
    let q_fit = if fit_samples >= 2 && denom.abs() > 0.0 {
        (nf * sxy - sx * sy) / denom
    } else {
        f64::NAN
    };
    Ok(RegularityFit {
        c_a,
        q_fit,
        witness,
        samples,
        fit_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Space {
        let n = xs.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = (xs[i] - xs[j]).abs();
            }
        }
        Space::new(SpaceParts {
            dist,
            mu: vec![1.0; n],
            q: 1.0,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn ball_examples() {
        let one = line(&[0.0]);
        assert_eq!(
            ball(&one, 0, 1.0, Convention::Closed).unwrap().members,
            vec![0]
        );
        let two = line(&[0.0, 1.0]);
        assert_eq!(
            ball(&two, 0, 1.0, Convention::Open).unwrap().members,
            vec![0]
        );
        assert_eq!(
            ball(&two, 0, 1.0, Convention::Closed).unwrap().members,
            vec![0, 1]
        );
        let three = line(&[0.0, 0.5, 1.0]);
        assert_eq!(
            ball(&three, 0, 0.5, Convention::Closed).unwrap().members,
            vec![0, 1]
        );
        assert!(ball(&three, 0, 0.0, Convention::Open)
            .unwrap()
            .members
            .is_empty());
        assert_eq!(
            ball(&three, 7, 0.5, Convention::Closed),
            Err(SpaceError::InvalidPoint { id: 7, n: 3 })
        );
    }

    #[test]
    fn measure_examples() {
        let three = line(&[0.0, 1.0, 2.0]);
        assert_eq!(measure_of(&three, None, &[]), 0.0);
        assert_eq!(measure_of(&three, None, &[0, 1, 2]), 3.0);
        let two = line(&[0.0, 1.0]);
        let w = Weight::new(vec![1.0, 4.0]).unwrap();
        assert_eq!(measure_of(&two, Some(&w), &[0, 1]), 5.0);
    }

    #[test]
    fn candidate_radii_examples() {
        assert!(candidate_radii(&line(&[0.0]), 0).unwrap().is_empty());
        assert_eq!(candidate_radii(&line(&[0.0, 1.0]), 0).unwrap(), vec![1.0]);
        assert_eq!(
            candidate_radii(&line(&[0.0, 0.5, 1.0]), 0).unwrap(),
            vec![0.5, 1.0]
        );
    }

    #[test]
    fn single_point_doubling_is_one() {
        let one = line(&[0.0]);
        let d = doubling_constant(&one, None, Convention::Closed);
        assert_eq!(d.value, Bound::Finite(1.0));
    }

    #[test]
    fn zero_weight_half_is_unbounded() {
        let s = line(&[0.0, 1.0, 3.0]);
        let w = Weight::new(vec![0.0, 0.0, 1.0]).unwrap();
        let d = doubling_constant(&s, Some(&w), Convention::Closed);
        assert_eq!(d.value, Bound::Unbounded);
        let at = d.witness.unwrap();
        assert_eq!(at.center, 0);
        assert_eq!(
            doubling_ratio(&s, Some(&w), at, Convention::Closed),
            Ok(Bound::Unbounded)
        );
    }

    #[test]
    fn validation_rejects_bad_input() {
        let bad_tri = Space::new(SpaceParts {
            dist: vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0],
            mu: vec![1.0; 3],
            q: 1.0,
            ..Default::default()
        });
        assert!(matches!(bad_tri, Err(SpaceError::Triangle { .. })));
        let bad_mass = Space::new(SpaceParts {
            dist: vec![0.0, 1.0, 1.0, 0.0],
            mu: vec![1.0, 0.0],
            q: 1.0,
            ..Default::default()
        });
        assert_eq!(bad_mass, Err(SpaceError::Mass(1)));
        let asym = Space::new(SpaceParts {
            dist: vec![0.0, 1.0, 1.5, 0.0],
            mu: vec![1.0, 1.0],
            q: 1.0,
            ..Default::default()
        });
        assert_eq!(asym, Err(SpaceError::Symmetry { i: 0, j: 1 }));
        let bad_skel = Space::new(SpaceParts {
            dist: vec![0.0, 1.0, 1.0, 0.0],
            mu: vec![1.0, 1.0],
            q: 1.0,
            skeleton: Some(vec![Edge {
                a: 0,
                b: 1,
                length: 2.0,
            }]),
            ..Default::default()
        });
        assert!(matches!(bad_skel, Err(SpaceError::Skeleton { .. })));
    }

    #[test]
    fn index_prefixes_match_balls() {
        let s = line(&[0.0, 0.3, 0.5, 1.0, 1.7]);
        let idx = BallIndex::new(&s);
        for c in 0..s.len() {
            for r in candidate_radii(&s, c).unwrap() {
                let b = ball(&s, c, r, Convention::Closed).unwrap();
                assert_eq!(idx.count(c, r, Convention::Closed), b.members.len());
                let ob = ball(&s, c, r, Convention::Open).unwrap();
                assert_eq!(idx.count(c, r, Convention::Open), ob.members.len());
            }
        }
    }
}
