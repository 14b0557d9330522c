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

//! Shared generators for the integration tests.

#![allow(dead_code)]

use proptest::prelude::*;
use weightlab::space::{Space, SpaceParts, Weight};

pub fn euclidean(points: &[(i32, i32)], mu: Vec<f64>) -> Space {
    euclidean_q(points, mu, 2.0)
}

pub fn euclidean_q(points: &[(i32, i32)], mu: Vec<f64>, q: f64) -> Space {
    let n = points.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (dx, dy) = (
                (points[i].0 - points[j].0) as f64,
                (points[i].1 - points[j].1) as f64,
            );
            dist[i * n + j] = (dx * dx + dy * dy).sqrt();
        }
    }
    Space::new(SpaceParts {
        dist,
        mu,
        q,
        ..Default::default()
    })
    .unwrap()
}

/// Small spaces on an integer lattice (many tied distances) with weights
/// drawn from a short list (many tied values, some zeros).
pub fn small_case(max_n: usize, allow_zero: bool) -> impl Strategy<Value = (Space, Weight)> {
    small_case_q(max_n, allow_zero, 2.0)
}

/// As [`small_case`] with dimension `q`. Every mass and weight value is a
/// short binary fraction, so at `q = 1` all chain sums are exact.
pub fn small_case_q(
    max_n: usize,
    allow_zero: bool,
    q: f64,
) -> impl Strategy<Value = (Space, Weight)> {
    let wvals: Vec<f64> = if allow_zero {
        vec![0.0, 0.5, 1.0, 2.0, 4.0, 7.0]
    } else {
        vec![0.5, 1.0, 2.0, 4.0, 7.0]
    };
    prop::collection::btree_set((0i32..5, 0i32..5), 2..=max_n).prop_flat_map(move |pts| {
        let pts: Vec<(i32, i32)> = pts.into_iter().collect();
        let n = pts.len();
        (
            Just(pts),
            prop::collection::vec(prop::sample::select(vec![0.5, 1.0, 1.5, 3.0]), n),
            prop::collection::vec(prop::sample::select(wvals.clone()), n),
        )
            .prop_map(move |(pts, mu, w)| (euclidean_q(&pts, mu, q), Weight::new(w).unwrap()))
    })
}
