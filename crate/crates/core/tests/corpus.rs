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

//! Builder properties checked against closed forms and brute force.

use weightlab::corpus::{grid_space, jacobian_weight, power_weight, GridSpec, ModelMap};
use weightlab::space::Space;
use weightlab::weights::a1_constant;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn origin(s: &Space) -> usize {
    let c = s.coords().unwrap();
    (0..s.len())
        .min_by(|&a, &b| norm(&c[a]).total_cmp(&norm(&c[b])))
        .unwrap()
}

/// `sup_B ⨍ω / min_B ω` over every closed ball, by direct enumeration.
fn a1_brute(s: &Space, w: &[f64]) -> f64 {
    let n = s.len();
    let mut best: f64 = 0.0;
    for c in 0..n {
        for r in s.dist_row(c).to_vec() {
            let members: Vec<usize> = (0..n).filter(|&j| s.dist(c, j) <= r).collect();
            let m: f64 = members.iter().map(|&j| s.mu()[j]).sum();
            let avg = members.iter().map(|&j| w[j] * s.mu()[j]).sum::<f64>() / m;
            let min = members.iter().map(|&j| w[j]).fold(f64::INFINITY, f64::min);
            best = best.max(avg / min);
        }
    }
    best
}

#[test]
fn a1_power_weight_is_stable_under_refinement() {
    let mut values = Vec::new();
    for n in [101, 201] {
        let s = grid_space(1, n, 1.0).unwrap();
        let w = power_weight(&s, -0.5, origin(&s)).unwrap();
        let fast = a1_constant(&s, &w).unwrap().value.finite().unwrap();
        let brute = a1_brute(&s, w.values());
        assert!((fast - brute).abs() <= 1e-12 * brute, "{fast} vs {brute}");
        values.push(fast);
    }
    assert!(
        values[0].max(values[1]) / values[0].min(values[1]) <= 2.0,
        "{values:?}"
    );
}

#[test]
fn radial_stretch_jacobian_tracks_the_closed_form() {
    let spec = GridSpec::new(2, 33, 1.0).unwrap();
    let s = grid_space(2, 33, 1.0).unwrap();
    let map = ModelMap::RadialStretch { beta: 2.0 };
    let target = map.image_grid(&spec).unwrap();
    let w = jacobian_weight(&s, &map, &target).unwrap();
    let h = spec.spacing();
    let coords = s.coords().unwrap();
    let ratios: Vec<f64> = (0..s.len())
        .filter(|&i| norm(&coords[i]) >= 0.25)
        .map(|i| w[i] / (norm(&coords[i]) + h).powi(2))
        .collect();
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(max / min <= 8.0, "{min} .. {max}");

    // image cells tile f([-a, a]²), a = 1 + h/2, whose area is
    // ∫ J = ∫ 2|x|² = 16 a⁴ / 3; along the edge (a, t) ↦ |(a,t)|(a,t) the
    // boundary form (x dy − y dx)/2 is a(a² + t²)/2, giving the same value
    let a = 1.0 + h / 2.0;
    let image = 16.0 * a.powi(4) / 3.0;
    assert!(
        (target.total() - image).abs() <= 1e-3 * image,
        "{} vs {image}",
        target.total()
    );
    let mass: f64 = w.values().iter().zip(s.mu()).map(|(a, b)| a * b).sum();
    assert!((mass - image).abs() <= 0.15 * image, "{mass} vs {image}");
}
