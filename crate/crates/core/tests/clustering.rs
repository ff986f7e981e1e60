use proptest::prelude::*;
use semiparam::clustering::{
    fit, fit_from, init_centroids, objective, solve_membership, solve_membership_with,
    update_centroids, ClusterConfig, MembershipSolver,
};
use semiparam::data::RngSeed;

fn instance(max_n: usize, max_d: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (2..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), n),
            prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1.0 } else { -1.0 }), n),
        )
    })
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Textbook Lloyd iteration from given centroids; `None` if a cluster empties.
fn lloyd(x: &[Vec<f64>], mut c: Vec<Vec<f64>>) -> Option<f64> {
    let d = x[0].len();
    let mut assign = vec![usize::MAX; x.len()];
    loop {
        let next: Vec<usize> = x
            .iter()
            .map(|xi| {
                let mut best = 0;
                for j in 1..c.len() {
                    if sq(xi, &c[j]) < sq(xi, &c[best]) {
                        best = j;
                    }
                }
                best
            })
            .collect();
        if next == assign {
            return Some(x.iter().zip(&assign).map(|(xi, &a)| sq(xi, &c[a])).sum());
        }
        assign = next;
        for (j, cj) in c.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = x
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a == j)
                .map(|(r, _)| r)
                .collect();
            if members.is_empty() {
                return None;
            }
            *cj = (0..d)
                .map(|t| members.iter().map(|m| m[t]).sum::<f64>() / members.len() as f64)
                .collect();
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_never_rises((x, y) in instance(40, 3), k in 1usize..5, r in prop::sample::select(vec![0.0, 0.5, 1.0, 10.0]), seed in any::<u64>()) {
        let k = k.min(x.len());
        let m = fit(&x, &y, &ClusterConfig::new(k, r).with_seed(seed)).unwrap();
        for w in m.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
        prop_assert_eq!(m.assignment.len(), x.len());
        prop_assert!(m.counts().iter().all(|&c| c > 0));
    }

    #[test]
    fn zero_penalty_is_lloyd((x, y) in instance(8, 2), seed in any::<u64>()) {
        let k = 2.min(x.len());
        let init = init_centroids(&x, k, RngSeed(seed)).unwrap();
        if let Some(reference) = lloyd(&x, init.clone()) {
            let m = fit_from(&x, &y, init, &ClusterConfig::new(k, 0.0)).unwrap();
            prop_assert!((m.final_objective - reference).abs() <= 1e-10 * (1.0 + reference),
                "fit {} vs Lloyd {}", m.final_objective, reference);
        }
    }

    #[test]
    fn zero_penalty_membership_is_nearest((x, y) in instance(30, 3), k in 1usize..5, seed in any::<u64>()) {
        let k = k.min(x.len());
        let c = init_centroids(&x, k, RngSeed(seed)).unwrap();
        let m = solve_membership(&x, &y, &c, 0.0).unwrap();
        for (xi, zi) in x.iter().zip(&m.z) {
            let j = zi.iter().position(|v| *v == 1.0).expect("integral row");
            let best = c.iter().map(|cj| sq(xi, cj)).fold(f64::INFINITY, f64::min);
            prop_assert!(sq(xi, &c[j]) <= best);
        }
    }

    #[test]
    fn membership_rows_are_distributions((x, y) in instance(12, 2), k in 1usize..4, r in 0.0..5.0f64, seed in any::<u64>()) {
        let k = k.min(x.len());
        let c = init_centroids(&x, k, RngSeed(seed)).unwrap();
        let m = solve_membership(&x, &y, &c, r).unwrap();
        for zi in &m.z {
            prop_assert!((zi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(zi.iter().all(|v| *v >= -1e-12));
        }
        let recomputed = objective(&x, &y, &m.z, &c, r).unwrap();
        prop_assert!((recomputed - m.objective).abs() < 1e-8 * (1.0 + recomputed.abs()));
        // ICM is a heuristic and can only do as well as the LP.
        let icm = solve_membership_with(&x, &y, &c, r, MembershipSolver::Icm).unwrap();
        prop_assert!(m.objective <= icm.objective + 1e-8);
    }

    #[test]
    fn converged_centroids_are_stable((x, y) in instance(40, 3), k in 1usize..5, seed in any::<u64>()) {
        let k = k.min(x.len());
        let cfg = ClusterConfig::new(k, 0.0).with_seed(seed);
        let m = fit(&x, &y, &cfg).unwrap();
        let z: Vec<Vec<f64>> = m.assignment.iter().map(|&a| (0..k).map(|j| if j == a { 1.0 } else { 0.0 }).collect()).collect();
        let again = update_centroids(&x, &z).unwrap();
        for (a, b) in again.iter().zip(&m.centroids) {
            prop_assert!(sq(a, b).sqrt() <= cfg.tol);
        }
    }
}

#[test]
fn penalty_balances_clusters() {
    // Two well-separated groups, each single-class: a large R pushes toward mixed clusters.
    let x: Vec<Vec<f64>> = (0..8)
        .map(|i| vec![if i < 4 { 0.0 } else { 10.0 } + i as f64 * 0.01])
        .collect();
    let y: Vec<f64> = (0..8).map(|i| if i < 4 { 1.0 } else { -1.0 }).collect();
    let plain = fit(&x, &y, &ClusterConfig::new(2, 0.0).with_seed(1)).unwrap();
    let skew = |m: &semiparam::clustering::ClusterModel| -> f64 {
        let mut s = vec![0.0; m.k];
        for (a, yi) in m.assignment.iter().zip(&y) {
            s[*a] += yi;
        }
        s.iter().map(|v: &f64| v.abs()).sum()
    };
    let balanced = fit(&x, &y, &ClusterConfig::new(2, 100.0).with_seed(1)).unwrap();
    assert_eq!(skew(&plain), 8.0);
    assert!(skew(&balanced) < skew(&plain));
}

#[test]
fn large_instance_uses_icm_and_stays_monotone() {
    let d = semiparam::data::gen_blobs(1500, 2, 2, 2.0, RngSeed(3)).unwrap();
    let m = fit(
        &d.rows(),
        &d.signed_labels(),
        &ClusterConfig::new(20, 1.0).with_seed(2),
    )
    .unwrap();
    for w in m.objective_trace.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn json_round_trip() {
    let d = semiparam::data::gen_blobs(30, 2, 2, 2.0, RngSeed(3)).unwrap();
    let m = fit(&d.rows(), &d.signed_labels(), &ClusterConfig::new(3, 1.0)).unwrap();
    let back = semiparam::clustering::ClusterModel::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(back.centroids, m.centroids);
    assert_eq!(back.assignment, m.assignment);
    assert_eq!(back.objective_trace, m.objective_trace);
}
