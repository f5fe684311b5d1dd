use mdq_core::game::{quadratic_action, rate_i};
use mdq_core::model::{ClassParams, ModelParams};
use mdq_core::paths::{skorohod_map, PLPath};
use mdq_core::rscost::RsEstimate;
use mdq_core::workload::WorkloadGeometry;
use proptest::prelude::*;

fn pl_path(max_pts: usize) -> impl Strategy<Value = PLPath> {
    (2..max_pts)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(0.0f64..1.0, k - 2),
                prop::collection::vec(-1.5f64..1.5, k),
            )
        })
        .prop_filter_map("distinct grid", |(mut inner, steps)| {
            inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut grid = vec![0.0];
            grid.extend(inner);
            grid.push(1.0);
            if grid.windows(2).any(|w| w[1] - w[0] < 1e-6) {
                return None;
            }
            let mut values = Vec::with_capacity(steps.len());
            let mut acc = 0.0;
            for s in steps {
                acc += s;
                values.push(acc);
            }
            PLPath::new(grid, values).ok()
        })
}

/// Minimal `hold . x` over `theta . x = w`, `0 <= x <= D`, by enumerating
/// the vertices of the feasible polytope.
fn h_by_vertices(g: &WorkloadGeometry, w: f64) -> f64 {
    let n = g.num_classes();
    let mut best = f64::INFINITY;
    for free in 0..n {
        for mask in 0u32..(1 << n) {
            if mask & (1 << free) != 0 {
                continue;
            }
            let mut x = vec![0.0; n];
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    x[i] = g.buffers[i];
                }
            }
            let rest: f64 = (0..n).filter(|&i| i != free).map(|i| g.theta[i] * x[i]).sum();
            let xf = (w - rest) / g.theta[free];
            if xf >= -1e-12 && xf <= g.buffers[free] + 1e-12 {
                x[free] = xf.clamp(0.0, g.buffers[free]);
                best = best.min(g.dot_hold(&x));
            }
        }
    }
    best
}

fn random_geometry() -> impl Strategy<Value = WorkloadGeometry> {
    (1usize..5)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.5f64..4.0, n),
                prop::collection::vec(0.1f64..1.0, n),
                prop::collection::vec(0.2f64..5.0, n),
                prop::collection::vec(0.5f64..3.0, n),
            )
        })
        .prop_map(|(mu, share, hold, buffer)| {
            let total: f64 = share.iter().sum();
            let classes = (0..mu.len())
                .map(|i| ClassParams {
                    lambda: share[i] / total * mu[i],
                    mu: mu[i],
                    var_ia: 1.0,
                    var_st: 1.0,
                    tilde_lambda: 0.0,
                    tilde_mu: 1.0,
                    buffer: buffer[i],
                    hold_cost: hold[i],
                    reject_cost: 1.0,
                    ia_dist: None,
                    st_dist: None,
                    label: 0,
                })
                .collect();
            let n = mu.len();
            let params = ModelParams::new(classes, vec![0.0; n], 0.3);
            let min_d = buffer.iter().copied().fold(f64::INFINITY, f64::min);
            WorkloadGeometry::new(&params, min_d / 8.0).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn skorohod_output_is_a_reflection(omega in pl_path(25), a in -1.0f64..0.0, width in 0.1f64..2.0) {
        let b = a + width;
        let out = skorohod_map(&omega, a, b).unwrap();
        let grid = out.grid().to_vec();
        for (k, &t) in grid.iter().enumerate() {
            let phi = out.phi.values()[k];
            prop_assert!(phi >= a - 1e-12 && phi <= b + 1e-12);
            let w = omega.eval(t).unwrap();
            let identity = w + out.eta1.values()[k] - out.eta2.values()[k];
            prop_assert!((phi - identity).abs() < 1e-9);
        }
        prop_assert!(out.eta1.is_nondecreasing(0.0));
        prop_assert!(out.eta2.is_nondecreasing(0.0));
    }

    #[test]
    fn skorohod_is_untouched_inside(omega in pl_path(20)) {
        let lo = omega.values().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = omega.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let out = skorohod_map(&omega, lo - 0.5, hi + 0.5).unwrap();
        prop_assert_eq!(&out.phi, &omega);
        prop_assert!(out.eta1.values().iter().all(|&v| v == 0.0));
        prop_assert!(out.eta2.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn skorohod_refinement_invariance(omega in pl_path(20), b in 0.2f64..1.5) {
        let g = omega.grid();
        let mut fine = g.to_vec();
        fine.extend(g.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        fine.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let refined = omega.resample(&fine).unwrap();
        let coarse = skorohod_map(&omega, 0.0, b).unwrap();
        let finer = skorohod_map(&refined, 0.0, b).unwrap();
        prop_assert!(coarse.phi.sup_distance(&finer.phi) < 1e-12);
        prop_assert!(coarse.eta1.sup_distance(&finer.eta1) < 1e-12);
        prop_assert!(coarse.eta2.sup_distance(&finer.eta2) < 1e-12);
    }

    #[test]
    fn gamma_carries_its_workload(g in random_geometry(), u in 0.0f64..1.0) {
        let w = u * g.total;
        let x = g.gamma(w).unwrap();
        prop_assert!((g.dot_theta(&x) - w).abs() < 1e-12 * (1.0 + w));
        let xa = g.gamma_a(w).unwrap();
        prop_assert!((g.dot_theta(&xa) - w).abs() < 1e-12 * (1.0 + w));
        for i in 0..x.len() {
            prop_assert!(x[i] >= 0.0 && x[i] <= g.buffers[i] + 1e-12);
        }
    }

    #[test]
    fn h_matches_vertex_enumeration(g in random_geometry(), u in 0.0f64..1.0) {
        let w = u * g.total;
        let h = g.h(w).unwrap();
        let oracle = h_by_vertices(&g, w);
        prop_assert!((h - oracle).abs() < 1e-10 * (1.0 + oracle), "{} vs {}", h, oracle);
    }

    #[test]
    fn h_is_convex(g in random_geometry(), u in 0.0f64..1.0, v in 0.0f64..1.0, lam in 0.0f64..1.0) {
        let (w1, w2) = (u * g.total, v * g.total);
        let mid = (lam * w1 + (1.0 - lam) * w2).clamp(0.0, g.total);
        let lhs = g.h(mid).unwrap();
        let rhs = lam * g.h(w1).unwrap() + (1.0 - lam) * g.h(w2).unwrap();
        prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn rate_is_refinement_invariant(p in pl_path(20), q in pl_path(20), t in 0.05f64..1.0) {
        let anchor = |p: &PLPath| p.map(|v| v - p.first_value());
        let (p, q) = (anchor(&p), anchor(&q));
        let refine = |p: &PLPath| {
            let mut g = p.grid().to_vec();
            g.extend(p.grid().windows(2).map(|w| w[0] + 0.3 * (w[1] - w[0])));
            g.push(t);
            g.sort_by(|a, b| a.partial_cmp(b).unwrap());
            g.dedup();
            p.resample(&g).unwrap()
        };
        let coarse = rate_i(0.7, 1.3, &p, &q, t).unwrap();
        let fine = rate_i(0.7, 1.3, &refine(&p), &refine(&q), t).unwrap();
        prop_assert!((coarse - fine).abs() < 1e-12 * (1.0 + coarse));
        prop_assert!(quadratic_action(&p, t).unwrap() >= 0.0);
    }

    #[test]
    fn estimate_shifts_with_cost(lw in prop::collection::vec(-20.0f64..20.0, 2..60), c in 0.0f64..3.0, b in 1.0f64..20.0) {
        let base = RsEstimate::from_log_weights(lw.clone(), b).unwrap();
        let shifted = RsEstimate::from_log_weights(lw.iter().map(|x| x + b * b * c).collect(), b).unwrap();
        prop_assert!((shifted.value - base.value - c).abs() < 1e-12 * (1.0 + c + base.value.abs()));
        prop_assert!(base.ess > 0.0 && base.ess <= lw.len() as f64 + 1e-9);
    }
}
