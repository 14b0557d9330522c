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

//! `p`-modulus of source-to-sink path families on the graph skeleton.
//!
//! Densities live on vertices and a path's `ρ`-length is the trapezoid sum
//! `Σ ((ρ_u + ρ_v)/2) ℓ(u,v)`. The modulus is found by cutting planes: a
//! master problem over the generated paths, and a shortest-path separation
//! oracle over all paths.

use std::collections::{BTreeMap, HashMap};

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use serde::Serialize;
use thiserror::Error;

use crate::graph::{adjacency, dijkstra, Adjacency};
use crate::space::{ball, Bound, Convention, Space, SpaceError};

pub const DEFAULT_TOL: f64 = 1e-6;
/// Violated paths added per cutting-plane round.
const BATCH: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModulusError {
    #[error("space has no skeleton graph")]
    NoSkeleton,
    #[error("points {a} and {b} are not adjacent in the skeleton")]
    NotAdjacent { a: usize, b: usize },
    #[error("source and sink share point {0}")]
    Overlap(usize),
    #[error("source and sink must be nonempty")]
    EmptyFamily,
    #[error("exponent must satisfy 1 <= p < inf, got {0}")]
    Exponent(f64),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("ball too large: B(x0, 2r) covers the space")]
    BallTooLarge,
    #[error("no convergence after {iterations} rounds; modulus in [{lower}, {upper}]")]
    NotConverged {
        iterations: usize,
        lower: f64,
        upper: f64,
    },
    #[error("master problem failed: {0}")]
    Master(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// All skeleton paths from a point of `source` to a point of `sink`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveFamily {
    pub source: Vec<usize>,
    pub sink: Vec<usize>,
}

impl CurveFamily {
    pub fn new(
        space: &Space,
        mut source: Vec<usize>,
        mut sink: Vec<usize>,
    ) -> Result<Self, ModulusError> {
        source.sort_unstable();
        source.dedup();
        sink.sort_unstable();
        sink.dedup();
        if source.is_empty() || sink.is_empty() {
            return Err(ModulusError::EmptyFamily);
        }
        for &v in source.iter().chain(&sink) {
            space.check_point(v)?;
        }
        if let Some(&v) = source.iter().find(|v| sink.binary_search(v).is_ok()) {
            return Err(ModulusError::Overlap(v));
        }
        Ok(CurveFamily { source, sink })
    }
}

/// Skeleton adjacency plus shortest edge length per unordered pair.
struct Skeleton {
    adj: Adjacency,
    lengths: HashMap<(usize, usize), f64>,
}

impl Skeleton {
    fn of(space: &Space) -> Result<Self, ModulusError> {
        let edges = space.skeleton().ok_or(ModulusError::NoSkeleton)?;
        let mut lengths = HashMap::new();
        for e in edges {
            let key = (e.a.min(e.b), e.a.max(e.b));
            let slot = lengths.entry(key).or_insert(e.length);
            *slot = f64::min(*slot, e.length);
        }
        Ok(Skeleton {
            adj: adjacency(space.len(), edges),
            lengths,
        })
    }

    fn length(&self, a: usize, b: usize) -> Result<f64, ModulusError> {
        self.lengths
            .get(&(a.min(b), a.max(b)))
            .copied()
            .ok_or(ModulusError::NotAdjacent { a, b })
    }

    /// Per-vertex coefficients of a path's `ρ`-length, sorted by vertex.
    fn coefficients(&self, path: &[usize]) -> Result<Vec<(usize, f64)>, ModulusError> {
        let mut c: BTreeMap<usize, f64> = BTreeMap::new();
        for w in path.windows(2) {
            let half = self.length(w[0], w[1])? / 2.0;
            *c.entry(w[0]).or_insert(0.0) += half;
            *c.entry(w[1]).or_insert(0.0) += half;
        }
        Ok(c.into_iter().collect())
    }
}

/// Trapezoid-rule `ρ`-length of a skeleton path.
pub fn curve_length(space: &Space, rho: &[f64], path: &[usize]) -> Result<f64, ModulusError> {
    let sk = Skeleton::of(space)?;
    for &v in path {
        space.check_point(v)?;
    }
    path.windows(2)
        .map(|w| Ok((rho[w[0]] + rho[w[1]]) / 2.0 * sk.length(w[0], w[1])?))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusResult {
    pub p: f64,
    /// `Σ ρ_v^p μ_v` of the returned density.
    pub value: f64,
    pub rho: Vec<f64>,
    pub active_paths: Vec<Vec<usize>>,
    /// Smallest `ρ`-length over every path of the family.
    pub certificate: Bound,
    /// Master-problem optimum (or dual value), below the true modulus.
    pub lower: f64,
    /// `value / certificate^p`, above the true modulus.
    pub upper: f64,
    pub iterations: usize,
}

fn mass(space: &Space, rho: &[f64], p: f64) -> f64 {
    rho.iter()
        .zip(space.mu())
        .map(|(&r, &m)| if p == 1.0 { r * m } else { r.powf(p) * m })
        .sum()
}

/// Shortest `ρ`-lengths from the source set; sink vertices are terminal so
/// every returned path meets the sink only at its end.
fn separate(
    sk: &Skeleton,
    fam: &CurveFamily,
    rho: &[f64],
    n: usize,
) -> (Bound, Vec<(f64, Vec<usize>)>) {
    let mut is_sink = vec![false; n];
    for &t in &fam.sink {
        is_sink[t] = true;
    }
    let mut adj = sk.adj.clone();
    for (v, out) in adj.iter_mut().enumerate() {
        if is_sink[v] {
            out.clear();
        }
    }
    let sp = dijkstra(&adj, &fam.source, |u, v, len| (rho[u] + rho[v]) / 2.0 * len);
    let mut hits: Vec<(f64, usize)> = fam
        .sink
        .iter()
        .filter(|&&t| sp.dist[t].is_finite())
        .map(|&t| (sp.dist[t], t))
        .collect();
    if hits.is_empty() {
        return (Bound::Unbounded, vec![]);
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let cert = hits[0].0;
    let paths = hits.into_iter().map(|(d, t)| (d, sp.path_to(t))).collect();
    (Bound::Finite(cert), paths)
}

/// Cutting-plane `p`-modulus of a path family.
pub fn p_modulus(
    space: &Space,
    family: &CurveFamily,
    p: f64,
    tol: f64,
) -> Result<ModulusResult, ModulusError> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(ModulusError::Exponent(p));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(ModulusError::Tolerance(tol));
    }
    let family = CurveFamily::new(space, family.source.clone(), family.sink.clone())?;
    let sk = Skeleton::of(space)?;
    let n = space.len();
    let cap = 10 * n * n;
    let mut master = if p == 1.0 {
        Master::linear(space)
    } else {
        Master::convex(space, p)
    };
    let mut rho = vec![0.0; n];
    let mut lower = 0.0;
    let mut active: Vec<Vec<usize>> = Vec::new();
    let mut iterations = 0;
    loop {
        let (cert, paths) = separate(&sk, &family, &rho, n);
        let value = mass(space, &rho, p);
        let upper = match cert {
            Bound::Unbounded => value,
            Bound::Finite(c) if c > 0.0 => value / c.powf(p),
            Bound::Finite(_) => f64::INFINITY,
        };
        let done = match cert {
            Bound::Unbounded => true,
            Bound::Finite(c) => {
                c >= 1.0 - tol && upper - lower <= tol * p * upper.max(f64::MIN_POSITIVE)
            }
        };
        if done {
            return Ok(ModulusResult {
                p,
                value,
                rho,
                active_paths: active,
                certificate: cert,
                lower: lower.min(upper),
                upper,
                iterations,
            });
        }
        if iterations >= cap {
            return Err(ModulusError::NotConverged {
                iterations,
                lower,
                upper,
            });
        }
        iterations += 1;
        let mut added = 0;
        for (len, path) in paths {
            if added == BATCH || len >= 1.0 - tol / 2.0 {
                break;
            }
            if active.contains(&path) {
                continue;
            }
            master.add(&sk.coefficients(&path)?)?;
            active.push(path);
            added += 1;
        }
        let (next, bound) = master.solve(space, tol)?;
        rho = next;
        lower = bound;
    }
}

enum Master {
    /// Dual-simplex LP, warm-started as rows arrive.
    Linear {
        problem: Problem,
        vars: Vec<Variable>,
        solution: Option<minilp::Solution>,
        pending: Vec<Vec<(usize, f64)>>,
    },
    /// Dual coordinate ascent on `min Σ μ ρ^p` under the generated rows.
    Convex {
        p: f64,
        rows: Vec<Vec<(usize, f64)>>,
        lambda: Vec<f64>,
    },
}

impl Master {
    fn linear(space: &Space) -> Self {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars = space
            .mu()
            .iter()
            .map(|&m| problem.add_var(m, (0.0, f64::INFINITY)))
            .collect();
        Master::Linear {
            problem,
            vars,
            solution: None,
            pending: vec![],
        }
    }

    fn convex(_space: &Space, p: f64) -> Self {
        Master::Convex {
            p,
            rows: vec![],
            lambda: vec![],
        }
    }

    fn add(&mut self, row: &[(usize, f64)]) -> Result<(), ModulusError> {
        match self {
            Master::Linear { pending, .. } => pending.push(row.to_vec()),
            Master::Convex { rows, lambda, .. } => {
                rows.push(row.to_vec());
                lambda.push(0.0);
            }
        }
        Ok(())
    }

    /// New density and a lower bound on the master optimum.
    fn solve(&mut self, space: &Space, tol: f64) -> Result<(Vec<f64>, f64), ModulusError> {
        match self {
            Master::Linear {
                problem,
                vars,
                solution,
                pending,
            } => {
                let master_err = |e: minilp::Error| ModulusError::Master(e.to_string());
                let mut sol = match solution.take() {
                    Some(s) => s,
                    None => {
                        for row in pending.drain(..) {
                            let expr: Vec<(Variable, f64)> =
                                row.iter().map(|&(v, c)| (vars[v], c)).collect();
                            problem.add_constraint(expr.as_slice(), ComparisonOp::Ge, 1.0);
                        }
                        problem.solve().map_err(master_err)?
                    }
                };
                for row in pending.drain(..) {
                    let expr: Vec<(Variable, f64)> =
                        row.iter().map(|&(v, c)| (vars[v], c)).collect();
                    sol = sol
                        .add_constraint(expr.as_slice(), ComparisonOp::Ge, 1.0)
                        .map_err(master_err)?;
                }
                let rho: Vec<f64> = vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect();
                let obj = sol.objective();
                *solution = Some(sol);
                Ok((rho, obj))
            }
            Master::Convex { p, rows, lambda } => Ok(dual_ascent(space, *p, rows, lambda, tol)),
        }
    }
}

/// `ρ_v(λ) = (s_v / (p μ_v))^{1/(p−1)}` with `s = Σ_k λ_k a_k`.
fn density(s: &[f64], mu: &[f64], p: f64) -> Vec<f64> {
    s.iter()
        .zip(mu)
        .map(|(&sv, &m)| {
            if sv > 0.0 {
                (sv / (p * m)).powf(1.0 / (p - 1.0))
            } else {
                0.0
            }
        })
        .collect()
}

fn dual_value(s: &[f64], mu: &[f64], lambda: &[f64], p: f64) -> f64 {
    let q = p / (p - 1.0);
    let penalty: f64 = s
        .iter()
        .zip(mu)
        .map(|(&sv, &m)| {
            if sv > 0.0 {
                (p - 1.0) * m * (sv / (p * m)).powf(q)
            } else {
                0.0
            }
        })
        .sum();
    lambda.iter().sum::<f64>() - penalty
}

/// Gauss–Seidel over the multipliers: each `λ_k` is set so its row is
/// tight (or to 0 if the row is slack at 0). Returns the density scaled up
/// to satisfy every generated row, and the dual value as the lower bound.
fn dual_ascent(
    space: &Space,
    p: f64,
    rows: &[Vec<(usize, f64)>],
    lambda: &mut [f64],
    tol: f64,
) -> (Vec<f64>, f64) {
    let mu = space.mu();
    let n = mu.len();
    let mut s = vec![0.0; n];
    for (row, &l) in rows.iter().zip(lambda.iter()) {
        for &(v, c) in row {
            s[v] += l * c;
        }
    }
    let row_len = |s: &[f64], row: &[(usize, f64)]| -> f64 {
        row.iter()
            .map(|&(v, c)| {
                if s[v] > 0.0 {
                    c * (s[v] / (p * mu[v])).powf(1.0 / (p - 1.0))
                } else {
                    0.0
                }
            })
            .sum()
    };
    for _sweep in 0..10_000 {
        let mut moved = 0.0f64;
        for (k, row) in rows.iter().enumerate() {
            let old = lambda[k];
            // length as a function of λ_k, increasing
            let at = |lk: f64, s: &mut Vec<f64>| -> f64 {
                for &(v, c) in row {
                    s[v] += (lk - old) * c;
                }
                let l = row_len(s, row);
                for &(v, c) in row {
                    s[v] -= (lk - old) * c;
                }
                l
            };
            let mut new = 0.0;
            if at(0.0, &mut s) < 1.0 {
                let (mut lo, mut hi) = (0.0, old.max(1.0));
                while at(hi, &mut s) < 1.0 {
                    lo = hi;
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if at(mid, &mut s) < 1.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                new = hi;
            }
            for &(v, c) in row {
                s[v] += (new - old) * c;
            }
            moved = moved.max((new - old).abs() / new.max(old).max(1e-300));
            lambda[k] = new;
        }
        let rho = density(&s, mu, p);
        let primal = mass(space, &rho, p);
        let dual = dual_value(&s, mu, lambda, p);
        let worst = rows
            .iter()
            .map(|r| row_len(&s, r))
            .fold(f64::INFINITY, f64::min);
        if worst >= 1.0 - tol / 4.0 && primal - dual <= tol * primal / 4.0 || moved < 1e-15 {
            break;
        }
    }
    let rho = density(&s, mu, p);
    let worst = rows
        .iter()
        .map(|r| row_len(&s, r))
        .fold(f64::INFINITY, f64::min);
    let scale = if worst.is_finite() && worst > 0.0 && worst < 1.0 {
        1.0 / worst
    } else {
        1.0
    };
    let rho: Vec<f64> = rho.iter().map(|r| r * scale).collect();
    (rho, dual_value(&s, mu, lambda, p).max(0.0))
}

/// `mod_1` of paths joining `B(x0, r)` to `X ∖ B(x0, 2r)`, normalized as
/// `mod_1 · r / μ(B(x0, r))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallModulus {
    pub x0: usize,
    pub r: f64,
    pub ball_mass: f64,
    pub ratio: f64,
    /// Ratio bounds from the solver bracket.
    pub ratio_lower: f64,
    pub ratio_upper: f64,
    pub modulus: ModulusResult,
}

pub fn ball_modulus_check(
    space: &Space,
    x0: usize,
    r: f64,
    tol: f64,
) -> Result<BallModulus, ModulusError> {
    space.check_point(x0)?;
    let source = ball(space, x0, r, Convention::Closed)?.members;
    let sink: Vec<usize> = (0..space.len())
        .filter(|&v| space.dist(x0, v) > 2.0 * r)
        .collect();
    if sink.is_empty() {
        return Err(ModulusError::BallTooLarge);
    }
    let fam = CurveFamily::new(space, source.clone(), sink)?;
    let m = p_modulus(space, &fam, 1.0, tol)?;
    let ball_mass: f64 = source.iter().map(|&v| space.mu()[v]).sum();
    let k = r / ball_mass;
    Ok(BallModulus {
        x0,
        r,
        ball_mass,
        ratio: m.value * k,
        ratio_lower: m.lower * k,
        ratio_upper: m.upper * k,
        modulus: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Edge, SpaceParts};

    fn path_graph(n: usize) -> Space {
        let dist = (0..n * n)
            .map(|k| ((k / n) as f64 - (k % n) as f64).abs())
            .collect();
        let skeleton = (0..n - 1)
            .map(|i| Edge {
                a: i,
                b: i + 1,
                length: 1.0,
            })
            .collect();
        Space::new(SpaceParts {
            dist,
            mu: vec![1.0; n],
            q: 1.0,
            coords: None,
            skeleton: Some(skeleton),
        })
        .unwrap()
    }

    #[test]
    fn trapezoid_lengths() {
        let s = path_graph(3);
        assert_eq!(curve_length(&s, &[0.0, 0.0, 0.0], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(curve_length(&s, &[0.0, 1.0, 0.0], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(curve_length(&s, &[5.0, 1.0, 0.0], &[1]).unwrap(), 0.0);
        assert_eq!(
            curve_length(&s, &[0.0; 3], &[0, 2]).unwrap_err(),
            ModulusError::NotAdjacent { a: 0, b: 2 }
        );
    }

    #[test]
    fn three_vertex_path() {
        let s = path_graph(3);
        let fam = CurveFamily::new(&s, vec![0], vec![2]).unwrap();
        let m = p_modulus(&s, &fam, 1.0, 1e-9).unwrap();
        assert!((m.value - 1.0).abs() < 1e-9);
        assert!((m.rho[1] - 1.0).abs() < 1e-9 && m.rho[0].abs() < 1e-9);
        let m2 = p_modulus(&s, &fam, 2.0, 1e-9).unwrap();
        assert!((m2.value - 1.0 / 1.5).abs() < 1e-8, "{}", m2.value);
    }

    #[test]
    fn family_validation() {
        let s = path_graph(3);
        assert_eq!(
            CurveFamily::new(&s, vec![0, 1], vec![1]).unwrap_err(),
            ModulusError::Overlap(1)
        );
        assert_eq!(
            CurveFamily::new(&s, vec![], vec![1]).unwrap_err(),
            ModulusError::EmptyFamily
        );
        let fam = CurveFamily::new(&s, vec![0], vec![2]).unwrap();
        assert_eq!(
            p_modulus(&s, &fam, 0.5, 1e-6).unwrap_err(),
            ModulusError::Exponent(0.5)
        );
        assert_eq!(
            ball_modulus_check(&s, 1, 5.0, 1e-6).unwrap_err(),
            ModulusError::BallTooLarge
        );
    }
}
