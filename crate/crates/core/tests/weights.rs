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

//! Sweep-based constants checked against exhaustive subset enumeration.

mod common;

use common::small_case;
use proptest::prelude::*;
use weightlab::corpus::{grid_space, random_weight, segment_pair_space};
use weightlab::space::{ball, Bound, Convention, Space, Weight};
use weightlab::weights::*;

/// Every closed ball as an explicit member list, by direct filtering.
fn all_balls(s: &Space) -> Vec<Vec<usize>> {
    let n = s.len();
    let mut out = Vec::new();
    for c in 0..n {
        let mut radii: Vec<f64> = (0..n).map(|j| s.dist(c, j)).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        for r in radii {
            out.push((0..n).filter(|&j| s.dist(c, j) <= r).collect());
        }
    }
    out
}

/// `(u, v)` for every nonempty subset of `members`.
fn subset_points(s: &Space, w: &Weight, members: &[usize]) -> Vec<(f64, f64)> {
    let mb: f64 = members.iter().map(|&i| s.mu()[i]).sum();
    let nb: f64 = members.iter().map(|&i| w[i] * s.mu()[i]).sum();
    (1u32..(1 << members.len()))
        .map(|mask| {
            let (mut m, mut v) = (0.0, 0.0);
            for (k, &i) in members.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    m += s.mu()[i];
                    v += w[i] * s.mu()[i];
                }
            }
            (m / mb, if nb > 0.0 { v / nb } else { 0.0 })
        })
        .collect()
}

fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1e-300)
}

fn bound_close(a: Bound, b: Bound, rtol: f64) -> bool {
    match (a, b) {
        (Bound::Finite(x), Bound::Finite(y)) => close(x, y, rtol),
        _ => a == b,
    }
}

const PS: [f64; 4] = [1.0, 1.5, 2.0, 4.0];
const EPS: [f64; 3] = [0.1, 0.3, 0.6];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn subsets_lie_between_the_sweep_envelopes((s, w) in small_case(12, true)) {
        for c in 0..s.len() {
            let mut radii: Vec<f64> = (0..s.len()).map(|j| s.dist(c, j)).collect();
            radii.sort_by(f64::total_cmp);
            radii.dedup();
            for r in radii {
                let b = ball(&s, c, r, Convention::Closed).unwrap();
                let sup = superlevel_sweep(&s, &w, &b).unwrap();
                let sub = sublevel_sweep(&s, &w, &b).unwrap();
                for win in sup.breakpoints.windows(2) {
                    prop_assert!(win[0].u <= win[1].u && win[0].v <= win[1].v);
                }
                for (u, v) in subset_points(&s, &w, &b.members) {
                    prop_assert!(v <= envelope_at(&sup.breakpoints, u) + 1e-12);
                    prop_assert!(v >= envelope_at(&sub.breakpoints, u) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn cond2_and_cond4_match_exhaustive_search((s, w) in small_case(8, true)) {
        let c2 = cond2_curve(&s, &w, &PS).unwrap();
        let c4 = cond4_curve(&s, &w, &PS).unwrap();
        let report = classify(&s, &w, &Grids { p: PS.to_vec(), eps: EPS.to_vec() }, Convention::Closed).unwrap();
        for (k, &p) in PS.iter().enumerate() {
            let (mut best2, mut best4) = (0.0f64, f64::INFINITY);
            let mut best_sw = Bound::Finite(0.0);
            for members in all_balls(&s) {
                for (u, v) in subset_points(&s, &w, &members) {
                    best2 = best2.max(v / u.powf(1.0 / p));
                    best4 = best4.min(v / u.powf(p));
                    let sw = if v == 0.0 { Bound::Unbounded } else { Bound::Finite(u / v.powf(1.0 / p)) };
                    best_sw = match (best_sw, sw) {
                        (Bound::Unbounded, _) | (_, Bound::Unbounded) => Bound::Unbounded,
                        (Bound::Finite(a), Bound::Finite(b)) => Bound::Finite(a.max(b)),
                    };
                }
            }
            prop_assert!(close(c2[k].value.finite().unwrap(), best2, 1e-12), "p={} {:?} vs {}", p, c2[k].value, best2);
            prop_assert!(close(c4[k].value.finite().unwrap(), best4, 1e-12) || best4 == 0.0 && c4[k].value == Bound::Finite(0.0));
            prop_assert!(bound_close(report.cond2_swapped_curve[k].value, best_sw, 1e-12));
        }
    }

    #[test]
    fn cond1_matches_hull_of_subset_points((s, w) in small_case(6, true)) {
        let c1 = cond1_curve(&s, &w, &EPS).unwrap();
        for (k, &eps) in EPS.iter().enumerate() {
            let mut worst = 0.0f64;
            for members in all_balls(&s) {
                let pts = subset_points(&s, &w, &members);
                if pts.last().unwrap().1 == 0.0 {
                    continue;
                }
                let mut best = 0.0f64;
                for &(ua, va) in pts.iter().chain([(0.0, 0.0)].iter()) {
                    if ua > eps {
                        continue;
                    }
                    best = best.max(va);
                    for &(ub, vb) in &pts {
                        if ub > eps {
                            best = best.max(va + (vb - va) * (eps - ua) / (ub - ua));
                        }
                    }
                }
                worst = worst.max(best);
            }
            let delta = c1[k].value.finite().unwrap();
            prop_assert!((delta - (1.0 - worst).clamp(0.0, 1.0)).abs() < 1e-12, "eps={} {} vs {}", eps, delta, 1.0 - worst);
        }
    }

    #[test]
    fn witnesses_replay((s, w) in small_case(10, true)) {
        let g = Grids { p: PS.to_vec(), eps: EPS.to_vec() };
        let r = classify(&s, &w, &g, Convention::Closed).unwrap();
        let check = |kind: CurveKind, pt: &CurvePoint| -> Result<(), TestCaseError> {
            if let Some(wit) = &pt.witness {
                let again = replay_witness(&s, &w, kind, wit).unwrap();
                prop_assert!(bound_close(again, pt.value, 1e-12), "{:?}: {:?} vs {:?}", kind, again, pt.value);
            }
            Ok(())
        };
        for pt in &r.cond1_curve { check(CurveKind::Cond1 { eps: pt.x }, pt)?; }
        for pt in &r.cond2_curve { check(CurveKind::Cond2 { p: pt.x }, pt)?; }
        for pt in &r.cond4_curve { check(CurveKind::Cond4 { p: pt.x }, pt)?; }
        for pt in &r.cond2_swapped_curve { check(CurveKind::Cond2Swapped { p: pt.x }, pt)?; }
        for pt in &r.rhi_curve { check(CurveKind::Rhi { eps: pt.x }, pt)?; }
        for pt in &r.ap_curve.points { check(CurveKind::Ap { p: pt.x }, pt)?; }
        for pt in &r.rhi_conjugate_curve {
            let eps = if pt.x == 1.0 { f64::INFINITY } else { 1.0 / (pt.x - 1.0) };
            check(CurveKind::Rhi { eps }, pt)?;
        }
        let a1 = CurvePoint { x: 0.0, value: r.a1_constant.value, witness: r.a1_constant.witness };
        check(CurveKind::A1, &a1)?;
    }

    #[test]
    fn implications_are_consistent((s, w) in small_case(10, true)) {
        let r = classify(&s, &w, &Grids::default(), Convention::Closed).unwrap();
        let t = implication_matrix(&r).unwrap();
        prop_assert_eq!(t.violations, 0, "{:#?}", t.rows);
    }

    #[test]
    fn ap_curve_nonincreasing((s, w) in small_case(10, false)) {
        let r = classify(&s, &w, &Grids { p: vec![1.5, 2.0, 3.0, 4.0, 8.0], eps: vec![0.1] }, Convention::Closed).unwrap();
        for win in r.ap_curve.points.windows(2) {
            let (a, b) = (win[0].value.finite().unwrap(), win[1].value.finite().unwrap());
            prop_assert!(b <= a * (1.0 + 1e-12));
        }
        let c2: Vec<f64> = r.cond2_curve.iter().map(|c| c.value.finite().unwrap()).collect();
        // u^{1/p} grows with p on [0, 1], so c(p) shrinks
        prop_assert!(c2.windows(2).all(|x| x[1] <= x[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn curves_are_scale_invariant((s, w) in small_case(9, true), c in prop::sample::select(vec![0.25, 2.0, 4.0])) {
        let g = Grids::default();
        let base = classify(&s, &w, &g, Convention::Closed).unwrap();
        let by_w = classify(&s, &w.scaled(c), &g, Convention::Closed).unwrap();
        let by_mu = classify(&s.with_scaled_measure(c).unwrap(), &w, &g, Convention::Closed).unwrap();
        // power-of-two factors scale every partial sum without rounding
        let vals = |c: &[CurvePoint]| c.iter().map(|p| p.value).collect::<Vec<_>>();
        for other in [&by_w, &by_mu] {
            prop_assert_eq!(vals(&base.cond1_curve), vals(&other.cond1_curve));
            prop_assert_eq!(vals(&base.cond2_curve), vals(&other.cond2_curve));
            prop_assert_eq!(vals(&base.cond4_curve), vals(&other.cond4_curve));
            prop_assert_eq!(vals(&base.cond2_swapped_curve), vals(&other.cond2_swapped_curve));
            prop_assert_eq!(base.a1_constant.value, other.a1_constant.value);
        }
        // fractional powers of cω round differently from c^a ω^a
        prop_assert_eq!(&base.ap_curve, &by_mu.ap_curve);
        prop_assert_eq!(&base.rhi_curve, &by_mu.rhi_curve);
        for (a, b) in base.rhi_curve.iter().zip(&by_w.rhi_curve).chain(base.ap_curve.points.iter().zip(&by_w.ap_curve.points)) {
            prop_assert!(bound_close(a.value, b.value, 1e-12));
        }
    }

    #[test]
    fn curves_are_scale_invariant_to_rounding((s, w) in small_case(9, true), c in 0.01f64..100.0) {
        let g = Grids::default();
        let base = classify(&s, &w, &g, Convention::Closed).unwrap();
        let other = classify(&s, &w.scaled(c), &g, Convention::Closed).unwrap();
        let pairs = base.cond2_curve.iter().zip(&other.cond2_curve)
            .chain(base.cond4_curve.iter().zip(&other.cond4_curve))
            .chain(base.cond1_curve.iter().zip(&other.cond1_curve))
            .chain(base.rhi_curve.iter().zip(&other.rhi_curve));
        for (a, b) in pairs {
            prop_assert!(bound_close(a.value, b.value, 1e-12) || (a.value.finite().unwrap_or(1.0) - b.value.finite().unwrap_or(1.0)).abs() < 1e-13);
        }
    }
}

#[test]
fn segment_pair_profile() {
    let (s, w) = segment_pair_space(32).unwrap();
    // a ball inside segment one carries no ν
    let b = ball(&s, 0, 1.0, Convention::Closed).unwrap();
    assert_eq!(b.members.len(), 32);
    assert!(superlevel_sweep(&s, &w, &b)
        .unwrap()
        .breakpoints
        .iter()
        .all(|bp| bp.v == 0.0));

    let r = classify(&s, &w, &Grids::default(), Convention::Closed).unwrap();
    assert_eq!(r.cond2_curve[0].value, Bound::Finite(2.0));
    assert!(r.cond2_curve.iter().all(|c| c.value.is_finite()));
    assert!(r.cond4_curve.iter().all(|c| c.value == Bound::Finite(0.0)));
    assert!(r
        .ap_curve
        .error
        .as_deref()
        .unwrap()
        .starts_with("not in any A_p"));
    assert_eq!(r.a1_constant.value, Bound::Unbounded);
    assert_eq!(r.nu_doubling.value, Bound::Unbounded);
    // whole-space ball: segment two is the first superlevel set at u = 1/2, v = 1
    let d04 = r
        .cond1_curve
        .iter()
        .find(|c| c.x == 0.4)
        .unwrap()
        .value
        .finite()
        .unwrap();
    assert!((d04 - 0.2).abs() < 1e-12);
    let v: Vec<(&str, bool)> = r.verdicts.iter().map(|v| (v.condition, v.holds)).collect();
    assert!(v.contains(&("(2) A_inf upper", true)));
    assert!(v.contains(&("(4) A_inf lower", false)));
    assert!(v.contains(&("(5) A_p", false)));
    assert_eq!(implication_matrix(&r).unwrap().violations, 0);
    assert!(matches!(
        ap_constant(&s, &w, 2.0),
        Err(WeightError::VanishingWeight { .. })
    ));
}

#[test]
fn constant_weight_profile() {
    let s = grid_space(1, 41, 1.0).unwrap();
    let w = Weight::constant(41, 1.0);
    let r = classify(&s, &w, &Grids::default(), Convention::Closed).unwrap();
    let one = |c: &CurvePoint| close(c.value.finite().unwrap(), 1.0, 1e-12);
    assert!(r.cond2_curve.iter().all(one));
    assert!(r.cond4_curve.iter().all(one));
    assert!(r.ap_curve.points.iter().all(one));
    assert!(r.rhi_curve.iter().all(one));
    assert_eq!(r.a1_constant.value, Bound::Finite(1.0));
    for c in &r.cond1_curve {
        assert!(close(c.value.finite().unwrap(), 1.0 - c.x, 1e-12));
    }
    let t = implication_matrix(&r).unwrap();
    assert_eq!(t.violations, 0);
    assert!(r.verdicts.iter().all(|v| v.holds));
}

#[test]
fn random_weights_are_consistent() {
    let s = grid_space(1, 41, 1.0).unwrap();
    for seed in 0..10 {
        let w = random_weight(41, seed, 10.0).unwrap();
        let r = classify(&s, &w, &Grids::default(), Convention::Closed).unwrap();
        let t = implication_matrix(&r).unwrap();
        assert_eq!(t.violations, 0, "seed {seed}: {:#?}", t.rows);
    }
}
