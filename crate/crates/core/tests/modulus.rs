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

//! Cutting-plane modulus against an exhaustive-path LP solved by vertex
//! enumeration.

use proptest::prelude::*;
use weightlab::corpus::{grid_space, lattice_space};
use weightlab::modulus::*;
use weightlab::space::{Bound, Edge, Space, SpaceParts};

/// Connected graph space whose metric is the skeleton path metric.
fn graph_space(n: usize, edges: &[(usize, usize, f64)], mu: Vec<f64>) -> Space {
    let mut dist = vec![f64::INFINITY; n * n];
    for i in 0..n {
        dist[i * n + i] = 0.0;
    }
    for &(a, b, l) in edges {
        dist[a * n + b] = dist[a * n + b].min(l);
        dist[b * n + a] = dist[b * n + a].min(l);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let c = dist[i * n + k] + dist[k * n + j];
                if c < dist[i * n + j] {
                    dist[i * n + j] = c;
                }
            }
        }
    }
    let skeleton = edges
        .iter()
        .map(|&(a, b, length)| Edge { a, b, length })
        .collect();
    Space::new(SpaceParts {
        dist,
        mu,
        q: 1.0,
        coords: None,
        skeleton: Some(skeleton),
    })
    .unwrap()
}

fn random_instance() -> impl Strategy<Value = (Space, Vec<usize>, Vec<usize>)> {
    (3usize..=7).prop_flat_map(|n| {
        let lens = prop::sample::select(vec![0.5, 1.0, 1.5, 2.0]);
        (
            Just(n),
            prop::collection::vec((0..n, lens.clone()), n - 1),
            prop::collection::vec((0..n, 0..n, lens), 0..3),
            prop::collection::vec(prop::sample::select(vec![0.5, 1.0, 2.0]), n),
            prop::collection::vec(0u8..3, n),
        )
            .prop_filter_map("need a source and a sink", |(n, tree, extra, mu, role)| {
                // vertex k > 0 hangs off an earlier vertex
                let mut edges: Vec<(usize, usize, f64)> = tree
                    .iter()
                    .enumerate()
                    .map(|(k, &(p, l))| (p % (k + 1), k + 1, l))
                    .collect();
                edges.extend(
                    extra
                        .iter()
                        .filter(|e| e.0 != e.1)
                        .map(|&(a, b, l)| (a, b, l)),
                );
                let source: Vec<usize> = (0..n).filter(|&v| role[v] == 1).collect();
                let sink: Vec<usize> = (0..n).filter(|&v| role[v] == 2).collect();
                if source.is_empty() || sink.is_empty() {
                    return None;
                }
                Some((graph_space(n, &edges, mu), source, sink))
            })
    })
}

fn simple_paths(
    s: &Space,
    source: &[usize],
    sink: &[usize],
    cap: usize,
) -> Option<Vec<Vec<usize>>> {
    let n = s.len();
    let sk = s.skeleton().unwrap();
    let mut nb = vec![vec![]; n];
    for e in sk {
        nb[e.a].push(e.b);
        nb[e.b].push(e.a);
    }
    let mut out = Vec::new();
    fn go(
        v: usize,
        nb: &[Vec<usize>],
        sink: &[usize],
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        cap: usize,
    ) -> bool {
        if sink.contains(&v) {
            out.push(path.clone());
        }
        if out.len() > cap {
            return false;
        }
        for &w in &nb[v] {
            if !path.contains(&w) {
                path.push(w);
                let ok = go(w, nb, sink, path, out, cap);
                path.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    for &a in source {
        if !go(a, &nb, sink, &mut vec![a], &mut out, cap) {
            return None;
        }
    }
    Some(out)
}

/// `min c·x` over `A x ≥ 1, x ≥ 0` by enumerating every basic solution.
fn lp_by_vertices(cost: &[f64], rows: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut all: Vec<(Vec<f64>, f64)> = rows.iter().map(|r| (r.clone(), 1.0)).collect();
    for v in 0..n {
        let mut e = vec![0.0; n];
        e[v] = 1.0;
        all.push((e, 0.0));
    }
    let m = all.len();
    let mut best = f64::INFINITY;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = solve_square(&pick.iter().map(|&k| all[k].clone()).collect::<Vec<_>>()) {
            let feasible = x.iter().all(|&v| v >= -1e-11)
                && rows
                    .iter()
                    .all(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() >= 1.0 - 1e-11);
            if feasible {
                best = best.min(cost.iter().zip(&x).map(|(a, b)| a * b).sum());
            }
        }
        // next n-combination of 0..m
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < m - n + i {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn solve_square(eqs: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = eqs.len();
    let mut a: Vec<Vec<f64>> = eqs
        .iter()
        .map(|(r, b)| r.iter().copied().chain([*b]).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

fn row_of(s: &Space, path: &[usize]) -> Vec<f64> {
    let mut row = vec![0.0; s.len()];
    for w in path.windows(2) {
        let l = s
            .skeleton()
            .unwrap()
            .iter()
            .filter(|e| (e.a, e.b) == (w[0], w[1]) || (e.b, e.a) == (w[0], w[1]))
            .map(|e| e.length)
            .fold(f64::INFINITY, f64::min);
        row[w[0]] += l / 2.0;
        row[w[1]] += l / 2.0;
    }
    row
}

fn check_result(s: &Space, fam: &CurveFamily, m: &ModulusResult, tol: f64) {
    let value: f64 = m
        .rho
        .iter()
        .zip(s.mu())
        .map(|(r, mu)| r.powf(m.p) * mu)
        .sum();
    assert!((value - m.value).abs() <= 1e-12 * value.max(1.0));
    for path in &m.active_paths {
        assert!(fam.source.contains(&path[0]) && fam.sink.contains(path.last().unwrap()));
        assert!(curve_length(s, &m.rho, path).unwrap() >= 1.0 - tol - 1e-9);
    }
    assert!(m.certificate.finite().unwrap() >= 1.0 - tol);
    assert!(m.lower <= m.upper && m.upper - m.lower <= tol * m.value * m.p + 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn linear_modulus_matches_path_lp((s, source, sink) in random_instance()) {
        let fam = CurveFamily::new(&s, source.clone(), sink.clone()).unwrap();
        let m = p_modulus(&s, &fam, 1.0, 1e-10).unwrap();
        check_result(&s, &fam, &m, 1e-10);
        if let Some(paths) = simple_paths(&s, &source, &sink, 10) {
            let rows: Vec<Vec<f64>> = paths.iter().map(|p| row_of(&s, p)).collect();
            let exact = lp_by_vertices(s.mu(), &rows);
            prop_assert!((m.value - exact).abs() <= 1e-9 * exact.max(1.0), "{} vs {}", m.value, exact);
        }
    }

    #[test]
    fn larger_families_have_larger_modulus((s, source, sink) in random_instance(), p in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let fam = CurveFamily::new(&s, source.clone(), sink.clone()).unwrap();
        let base = p_modulus(&s, &fam, p, 1e-8).unwrap();
        check_result(&s, &fam, &base, 1e-8);
        let free: Vec<usize> = (0..s.len()).filter(|v| !source.contains(v) && !sink.contains(v)).collect();
        if let Some(&extra) = free.first() {
            for (src, snk) in [([source.clone(), vec![extra]].concat(), sink.clone()), (source.clone(), [sink.clone(), vec![extra]].concat())] {
                let bigger = p_modulus(&s, &CurveFamily::new(&s, src, snk).unwrap(), p, 1e-8).unwrap();
                prop_assert!(bigger.upper >= base.lower * (1.0 - 1e-9));
            }
        }
    }
}

#[test]
fn three_vertex_path() {
    let s = graph_space(3, &[(0, 1, 1.0), (1, 2, 1.0)], vec![1.0; 3]);
    let fam = CurveFamily::new(&s, vec![0], vec![2]).unwrap();
    let m = p_modulus(&s, &fam, 1.0, DEFAULT_TOL).unwrap();
    assert!((m.value - 1.0).abs() <= 1e-6);
    assert_eq!(m.active_paths, vec![vec![0, 1, 2]]);
    let exact = lp_by_vertices(s.mu(), &[row_of(&s, &[0, 1, 2])]);
    assert!((exact - 1.0).abs() < 1e-12);
}

#[test]
fn parallel_paths_add() {
    // a-b-c and d-e-f, joined at the source end and at the sink end
    let edges = [
        (0, 1, 1.0),
        (1, 2, 1.0),
        (3, 4, 1.0),
        (4, 5, 1.0),
        (0, 3, 1.0),
        (2, 5, 1.0),
    ];
    let s = graph_space(6, &edges, vec![1.0; 6]);
    let fam = CurveFamily::new(&s, vec![0, 3], vec![2, 5]).unwrap();
    let m1 = p_modulus(&s, &fam, 1.0, 1e-9).unwrap();
    assert!((m1.value - 2.0).abs() < 1e-9);
    let m2 = p_modulus(&s, &fam, 2.0, 1e-9).unwrap();
    check_result(&s, &fam, &m2, 1e-9);
    assert!((m2.value - 4.0 / 3.0).abs() < 1e-7, "{}", m2.value);
}

#[test]
fn one_dimensional_capacity() {
    let s = grid_space(1, 21, 1.0).unwrap();
    let l = ball_modulus_check(&s, 10, 0.25, 1e-9).unwrap();
    assert!((l.modulus.value - 2.0).abs() < 1e-9);
    assert!((l.ratio - 1.0).abs() < 1e-9);
}

#[test]
fn plane_ratios_are_positive_and_comparable() {
    let s = lattice_space(2, 33, 1.0).unwrap();
    let x0 = 33 * 16 + 16;
    let a = ball_modulus_check(&s, x0, 0.25, DEFAULT_TOL).unwrap();
    let b = ball_modulus_check(&s, x0, 0.375, DEFAULT_TOL).unwrap();
    for l in [&a, &b] {
        assert!(l.ratio > 0.0);
        assert!((l.ratio_upper - l.ratio_lower) <= 1e-5 * l.ratio);
        assert_eq!(
            l.modulus.certificate,
            Bound::Finite(l.modulus.certificate.finite().unwrap())
        );
    }
    assert!(a.ratio.max(b.ratio) / a.ratio.min(b.ratio) <= 4.0);
}
