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

//! Builders for the reference spaces and weights, plus file I/O.

mod io;

pub use io::{
    load, load_str, save_report, save_space, space_to_string, to_report_string, write_atomic,
    MetricSpec, PointEntry, SpaceFile,
};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::space::{
    ball, candidate_radii, Convention, Edge, Space, SpaceError, SpaceParts, Weight,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("parse error at line {line}, column {column}, field `{field}`: {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(#[from] SpaceError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("degenerate image: the map collapses the ball about point {0} to a null set")]
    DegenerateImage(usize),
}

/// Axis-aligned uniform grid on `[-extent, extent]^dim`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub extent: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, extent: f64) -> Result<Self, CorpusError> {
        if !(dim == 1 || dim == 2) {
            return Err(CorpusError::Argument(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < 2 {
            return Err(CorpusError::Argument(format!(
                "grid needs n >= 2 per axis, got {n}"
            )));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(CorpusError::Argument(format!(
                "grid extent must be positive, got {extent}"
            )));
        }
        Ok(GridSpec { dim, n, extent })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.n - 1) as f64
    }

    pub fn points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Integer lattice index of point `id` (x fastest).
    pub fn index(&self, id: usize) -> [usize; 2] {
        if self.dim == 1 {
            [id, 0]
        } else {
            [id % self.n, id / self.n]
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing()
    }

    fn coords(&self) -> Vec<Vec<f64>> {
        (0..self.points())
            .map(|id| {
                let ix = self.index(id);
                (0..self.dim).map(|k| self.coord(ix[k])).collect()
            })
            .collect()
    }

    fn skeleton(&self) -> Vec<Edge> {
        let h = self.spacing();
        let mut edges = Vec::new();
        for id in 0..self.points() {
            let [i, j] = self.index(id);
            if i + 1 < self.n {
                edges.push(Edge {
                    a: id,
                    b: id + 1,
                    length: h,
                });
            }
            if self.dim == 2 && j + 1 < self.n {
                edges.push(Edge {
                    a: id,
                    b: id + self.n,
                    length: h,
                });
            }
        }
        edges
    }
}

/// Which path metric a 2-D grid carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GridMetric {
    Euclidean,
    Taxicab,
}

fn build_grid(spec: &GridSpec, metric: GridMetric) -> Result<Space, CorpusError> {
    let h = spec.spacing();
    let np = spec.points();
    let mut dist = vec![0.0; np * np];
    for a in 0..np {
        let [ai, aj] = spec.index(a);
        for b in 0..np {
            let [bi, bj] = spec.index(b);
            let di = ai.abs_diff(bi);
            let dj = aj.abs_diff(bj);
            // Distances come from integer offsets so equal offsets give
            // bit-identical lengths and doubling a radius stays exact.
            dist[a * np + b] = match metric {
                GridMetric::Euclidean => h * ((di * di + dj * dj) as f64).sqrt(),
                GridMetric::Taxicab => h * (di + dj) as f64,
            };
        }
    }
    let skeleton = (spec.dim == 1 || metric == GridMetric::Taxicab).then(|| spec.skeleton());
    Ok(Space::new(SpaceParts {
        dist,
        mu: vec![h.powi(spec.dim as i32); np],
        q: spec.dim as f64,
        coords: Some(spec.coords()),
        skeleton,
    })?)
}

/// Uniform grid on `[-extent, extent]^dim` with the Euclidean metric, cell
/// masses `h^dim` and `Q = dim`.
///
/// One-dimensional grids carry their nearest-neighbor skeleton. In two
/// dimensions nearest-neighbor paths measure taxicab length, so the
/// Euclidean grid has no skeleton; use [`lattice_space`] for curve families.
pub fn grid_space(dim: usize, n: usize, extent: f64) -> Result<Space, CorpusError> {
    build_grid(&GridSpec::new(dim, n, extent)?, GridMetric::Euclidean)
}

/// Uniform grid whose metric is the path metric of its nearest-neighbor
/// skeleton (taxicab in two dimensions; identical to [`grid_space`] in one).
pub fn lattice_space(dim: usize, n: usize, extent: f64) -> Result<Space, CorpusError> {
    build_grid(&GridSpec::new(dim, n, extent)?, GridMetric::Taxicab)
}

/// Two parallel unit segments at mutual distance 2, with the weight that
/// vanishes on the first and equals one on the second.
///
/// Points `0..n` sample segment one at cell midpoints, `n..2n` segment two.
pub fn segment_pair_space(n: usize) -> Result<(Space, Weight), CorpusError> {
    if n < 2 {
        return Err(CorpusError::Argument(format!(
            "segment pair needs n >= 2, got {n}"
        )));
    }
    let h = 1.0 / n as f64;
    let np = 2 * n;
    let mut dist = vec![0.0; np * np];
    for a in 0..np {
        for b in 0..np {
            dist[a * np + b] = if a / n == b / n {
                h * (a % n).abs_diff(b % n) as f64
            } else {
                2.0
            };
        }
    }
    let coords = (0..np)
        .map(|a| vec![(1 + a / n) as f64, ((a % n) as f64 + 0.5) * h])
        .collect();
    let space = Space::new(SpaceParts {
        dist,
        mu: vec![h; np],
        q: 1.0,
        coords: Some(coords),
        skeleton: None,
    })?;
    let weight = Weight::new((0..np).map(|a| if a < n { 0.0 } else { 1.0 }).collect())?;
    Ok((space, weight))
}

/// Unit circle together with a line segment through its center, in the plane.
#[derive(Clone, Debug)]
pub struct SpherePlane {
    pub space: Space,
    pub origin: usize,
    pub line: Vec<usize>,
    pub circle: Vec<usize>,
}

/// Circle ∪ line with `n` circle cells of arc length `2π/n`; the line
/// `[-2, 2]` is sampled at the same spacing through the origin. Ambient
/// Euclidean distances, one-dimensional cell masses, `Q = 1`.
pub fn sphere_plane_space(n: usize) -> Result<SpherePlane, CorpusError> {
    if n < 8 {
        return Err(CorpusError::Argument(format!(
            "sphere-plane needs n >= 8, got {n}"
        )));
    }
    let h = 2.0 * PI / n as f64;
    let k = (2.0 / h).floor() as i64;
    let mut coords: Vec<Vec<f64>> = (-k..=k).map(|i| vec![i as f64 * h, 0.0]).collect();
    let line: Vec<usize> = (0..coords.len()).collect();
    let origin = k as usize;
    for j in 0..n {
        let theta = h * (j as f64 + 0.5);
        coords.push(vec![theta.cos(), theta.sin()]);
    }
    let circle: Vec<usize> = (line.len()..coords.len()).collect();
    let np = coords.len();
    let mut dist = vec![0.0; np * np];
    for a in 0..np {
        for b in 0..np {
            dist[a * np + b] = if a == b {
                0.0
            } else if (a == origin && b >= line.len()) || (b == origin && a >= line.len()) {
                1.0
            } else {
                (coords[a][0] - coords[b][0]).hypot(coords[a][1] - coords[b][1])
            };
        }
    }
    let space = Space::new(SpaceParts {
        dist,
        mu: vec![h; np],
        q: 1.0,
        coords: Some(coords),
        skeleton: None,
    })?;
    Ok(SpherePlane {
        space,
        origin,
        line,
        circle,
    })
}

/// `ω_i = max(dist(basepoint, i), d_min)^α` with `d_min` the distance from
/// the basepoint to its nearest neighbor.
pub fn power_weight(space: &Space, alpha: f64, basepoint: usize) -> Result<Weight, CorpusError> {
    space.check_point(basepoint)?;
    if !alpha.is_finite() {
        return Err(CorpusError::Argument(format!(
            "exponent must be finite, got {alpha}"
        )));
    }
    let d_min = space.nearest_distance(basepoint);
    let w = space
        .dist_row(basepoint)
        .iter()
        .map(|&d| d.max(d_min).powf(alpha))
        .collect();
    Ok(Weight::new(w)?)
}

/// Closed-form quasisymmetric model maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelMap {
    Identity,
    /// `x ↦ |x|^(β−1) x`
    RadialStretch {
        beta: f64,
    },
}

impl ModelMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            ModelMap::Identity => x.to_vec(),
            ModelMap::RadialStretch { beta } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r == 0.0 {
                    return vec![0.0; x.len()];
                }
                let s = r.powf(beta - 1.0);
                x.iter().map(|v| v * s).collect()
            }
        }
    }

    /// The image of a source grid: point `j` is `f(x_j)` and carries the
    /// area (length in 1-D) of the image of its source cell. The image cell
    /// is the polygon through the images of the cell corners and edge
    /// midpoints.
    pub fn image_grid(&self, source: &GridSpec) -> Result<ImageGrid, CorpusError> {
        if let ModelMap::RadialStretch { beta } = *self {
            if !(beta.is_finite() && beta > 0.0) {
                return Err(CorpusError::Argument(format!(
                    "stretch exponent must be positive, got {beta}"
                )));
            }
        }
        let half = source.spacing() / 2.0;
        let coords = source.coords();
        let mut mu = Vec::with_capacity(coords.len());
        for x in &coords {
            let m = if source.dim == 1 {
                (self.apply(&[x[0] + half])[0] - self.apply(&[x[0] - half])[0]).abs()
            } else {
                // counterclockwise around the cell
                let ring = [
                    (-1.0, -1.0),
                    (0.0, -1.0),
                    (1.0, -1.0),
                    (1.0, 0.0),
                    (1.0, 1.0),
                    (0.0, 1.0),
                    (-1.0, 1.0),
                    (-1.0, 0.0),
                ];
                let pts: Vec<Vec<f64>> = ring
                    .iter()
                    .map(|&(a, b)| self.apply(&[x[0] + a * half, x[1] + b * half]))
                    .collect();
                let twice: f64 = (0..pts.len())
                    .map(|k| {
                        let (p, q) = (&pts[k], &pts[(k + 1) % pts.len()]);
                        p[0] * q[1] - q[0] * p[1]
                    })
                    .sum();
                twice.abs() / 2.0
            };
            mu.push(m);
        }
        let points = coords.iter().map(|x| self.apply(x)).collect();
        Ok(ImageGrid { points, mu })
    }
}

/// Target space of a model map: image points with re-measured cells.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    pub points: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
}

impl ImageGrid {
    /// Index of the target point nearest to `y` (lowest index on ties).
    pub fn snap(&self, y: &[f64]) -> usize {
        let d2 = |p: &[f64]| p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        (0..self.points.len())
            .min_by(|&a, &b| {
                d2(&self.points[a])
                    .total_cmp(&d2(&self.points[b]))
                    .then(a.cmp(&b))
            })
            .unwrap_or(0)
    }

    pub fn total(&self) -> f64 {
        self.mu.iter().sum()
    }
}

/// Discrete Jacobian of `map` on a grid space: for each point the ratio
/// `μ_Y(f(B)) / μ_X(B)` on the smallest nontrivial closed ball `B`, with
/// `f(B)` the set of target points nearest to the images of the members.
pub fn jacobian_weight(
    space: &Space,
    map: &ModelMap,
    target: &ImageGrid,
) -> Result<Weight, CorpusError> {
    let coords = space
        .coords()
        .ok_or_else(|| CorpusError::Argument("jacobian weight needs point coordinates".into()))?;
    if target.points.len() != space.len() || target.mu.len() != space.len() {
        return Err(CorpusError::Argument(format!(
            "target has {} points, space has {}",
            target.points.len(),
            space.len()
        )));
    }
    if coords
        .iter()
        .zip(&target.points)
        .any(|(c, t)| c.len() != t.len())
    {
        return Err(CorpusError::Argument(
            "target dimension does not match the space".into(),
        ));
    }
    let mut w = Vec::with_capacity(space.len());
    for i in 0..space.len() {
        let r_min = candidate_radii(space, i)?.first().copied().unwrap_or(0.0);
        let b = ball(space, i, r_min, Convention::Closed)?;
        let mut image: Vec<usize> = b
            .members
            .iter()
            .map(|&j| target.snap(&map.apply(&coords[j])))
            .collect();
        image.sort_unstable();
        image.dedup();
        let mu_y: f64 = image.iter().map(|&k| target.mu[k]).sum();
        if !(mu_y > 0.0) {
            return Err(CorpusError::DegenerateImage(i));
        }
        let mu_x: f64 = b.members.iter().map(|&j| space.mu()[j]).sum();
        w.push(mu_y / mu_x);
    }
    Ok(Weight::new(w)?)
}

/// Deterministic log-uniform weights in `[1/range, range]`.
pub fn random_weight(n: usize, seed: u64, dynamic_range: f64) -> Result<Weight, CorpusError> {
    if !(dynamic_range.is_finite() && dynamic_range >= 1.0) {
        return Err(CorpusError::Argument(format!(
            "dynamic range must be at least 1, got {dynamic_range}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = dynamic_range.ln();
    let w = (0..n)
        .map(|_| (span * (2.0 * rng.gen::<f64>() - 1.0)).exp())
        .collect();
    Ok(Weight::new(w)?)
}
