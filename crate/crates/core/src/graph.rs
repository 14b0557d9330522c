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

//! Small shared graph routines over skeleton edges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::space::Edge;

/// Neighbor list entry: `(neighbor, edge length)`.
pub type Adjacency = Vec<Vec<(usize, f64)>>;

pub fn adjacency(n: usize, edges: &[Edge]) -> Adjacency {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push((e.b, e.length));
        adj[e.b].push((e.a, e.length));
    }
    for list in &mut adj {
        list.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    }
    adj
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Entry {
    cost: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, ties broken by smaller node id
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub struct ShortestPaths {
    pub dist: Vec<f64>,
    pub pred: Vec<Option<usize>>,
}

impl ShortestPaths {
    /// Path from a source to `target`, sources first. Empty if unreachable.
    pub fn path_to(&self, target: usize) -> Vec<usize> {
        if !self.dist[target].is_finite() {
            return Vec::new();
        }
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = self.pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }
}

/// Multi-source Dijkstra; `cost(u, v, length)` must be nonnegative.
pub fn dijkstra<F>(adj: &Adjacency, sources: &[usize], cost: F) -> ShortestPaths
where
    F: Fn(usize, usize, f64) -> f64,
{
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        if dist[s] > 0.0 {
            dist[s] = 0.0;
            heap.push(Entry { cost: 0.0, node: s });
        }
    }
    while let Some(Entry { cost: d, node: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, len) in &adj[u] {
            let nd = d + cost(u, v, len);
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some(u);
                heap.push(Entry { cost: nd, node: v });
            }
        }
    }
    ShortestPaths { dist, pred }
}

/// One Floyd–Warshall pass over a dense nonnegative matrix; returns whether
/// any entry decreased. In floating point a single pass can leave
/// one-ulp triangle violations, so callers needing an exact metric repeat
/// until no entry changes.
pub fn floyd_warshall(n: usize, w: &mut [f64]) -> bool {
    use rayon::prelude::*;
    let mut changed = false;
    for k in 0..n {
        let row_k: Vec<f64> = w[k * n..(k + 1) * n].to_vec();
        changed |= w
            .par_chunks_mut(n)
            .map(|row_i| {
                let dik = row_i[k];
                let mut hit = false;
                if !dik.is_finite() {
                    return false;
                }
                for (x, &dkj) in row_i.iter_mut().zip(&row_k) {
                    let cand = dik + dkj;
                    if cand < *x {
                        *x = cand;
                        hit = true;
                    }
                }
                hit
            })
            .reduce(|| false, |a, b| a || b);
    }
    changed
}

/// Repeats [`floyd_warshall`] until the matrix is a fixed point, so the
/// result satisfies the triangle inequality exactly.
pub fn metric_closure(n: usize, w: &mut [f64]) {
    while floyd_warshall(n, w) {}
}
