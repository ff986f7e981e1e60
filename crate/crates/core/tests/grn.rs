use proptest::prelude::*;
use semiparam::clustering::{fit, ClusterConfig, ClusterModel};
use semiparam::codebook::{train_lbg, LbgConfig};
use semiparam::data::{gen_blobs, Dataset, RngSeed};
use semiparam::grn::{fit_grn, grn_scores_full, grn_scores_semi, GrnModel, Partition};
use semiparam::kernel::{KernelCounter, KernelSpec};
use semiparam::Error;

fn partition(x: &Dataset, assignment: Vec<usize>, k: usize) -> ClusterModel {
    let d = x.dim();
    let mut centroids = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (row, &a) in x.rows().iter().zip(&assignment) {
        counts[a] += 1;
        for (c, v) in centroids[a].iter_mut().zip(row.iter()) {
            *c += v;
        }
    }
    for (c, n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= (*n).max(1) as f64);
    }
    ClusterModel {
        k,
        r: 0.0,
        centroids,
        assignment,
        objective_trace: vec![],
        membership: vec![],
        slacks: vec![],
        final_objective: 0.0,
        iterations: 0,
        converged: true,
    }
}

fn probe_grid() -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for i in 0..15 {
        for j in 0..15 {
            out.push([-5.0 + i as f64 * 10.0 / 14.0, -4.0 + j as f64 * 8.0 / 14.0]);
        }
    }
    out
}

fn max_score_error(full: &GrnModel, semi: &GrnModel) -> f64 {
    let c = KernelCounter::new();
    probe_grid()
        .iter()
        .flat_map(|p| {
            let a = grn_scores_full(full, p, &c).unwrap();
            let b = grn_scores_semi(semi, p, &c).unwrap();
            a.into_iter()
                .zip(b)
                .map(|(u, v)| (u - v).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scores_positive_and_bounded(seed in any::<u64>(), sigma in 0.2..4.0f64, k in 1usize..8) {
        let d = gen_blobs(40, 2, 3, 2.0, RngSeed(seed)).unwrap();
        let kernel = KernelSpec::new(sigma).unwrap();
        let clusters = fit(&d.rows(), &d.signed_labels(), &ClusterConfig::new(k, 0.0).with_seed(seed)).unwrap();
        let full = fit_grn(&d, kernel, None).unwrap();
        let semi = fit_grn(&d, kernel, Some(Partition::Clusters(&clusters))).unwrap();
        let counts: Vec<usize> = d.class_ids().iter().map(|&id| d.labels().iter().filter(|&&l| l == id).count()).collect();
        let c = KernelCounter::new();
        for p in [[0.0, 0.0], [3.0, -1.0], [-2.0, 1.5]] {
            for scores in [grn_scores_full(&full, &p, &c).unwrap(), grn_scores_semi(&semi, &p, &c).unwrap()] {
                for (s, &n) in scores.iter().zip(&counts) {
                    prop_assert!(*s > 0.0);
                    prop_assert!(*s <= n as f64 + 1e-12);
                }
            }
        }
    }
}

#[test]
fn class_pure_split_never_increases_score_error() {
    let d = gen_blobs(120, 2, 2, 2.0, RngSeed(12)).unwrap();
    let kernel = KernelSpec::new(1.0).unwrap();
    let full = fit_grn(&d, kernel, None).unwrap();
    for k in [2, 4, 8] {
        let base = fit(
            &d.rows(),
            &d.signed_labels(),
            &ClusterConfig::new(k, 1.0).with_seed(k as u64),
        )
        .unwrap();
        let refined_assignment: Vec<usize> = base
            .assignment
            .iter()
            .zip(d.labels())
            .map(|(&a, l)| 2 * a + usize::from(l > 0))
            .collect();
        let refined = partition(&d, refined_assignment, 2 * k);
        let e0 = max_score_error(
            &full,
            &fit_grn(&d, kernel, Some(Partition::Clusters(&base))).unwrap(),
        );
        let e1 = max_score_error(
            &full,
            &fit_grn(&d, kernel, Some(Partition::Clusters(&refined))).unwrap(),
        );
        assert!(e1 <= e0 + 1e-12, "k={k}: {e0} -> {e1}");
    }
}

#[test]
fn singleton_partition_is_exact() {
    let d = gen_blobs(30, 2, 2, 2.0, RngSeed(3)).unwrap();
    let kernel = KernelSpec::new(0.7).unwrap();
    let full = fit_grn(&d, kernel, None).unwrap();
    let semi = fit_grn(
        &d,
        kernel,
        Some(Partition::Clusters(&partition(&d, (0..30).collect(), 30))),
    )
    .unwrap();
    assert!(max_score_error(&full, &semi) <= 1e-12);
}

#[test]
fn prediction_cost_is_expansion_size() {
    let d = gen_blobs(60, 2, 2, 2.0, RngSeed(3)).unwrap();
    let kernel = KernelSpec::new(1.0).unwrap();
    let cb = train_lbg(&d.rows(), &LbgConfig::new(6)).unwrap();
    let semi = fit_grn(&d, kernel, Some(Partition::Codebook(&cb))).unwrap();
    let c = KernelCounter::new();
    semi.predict(&[0.0, 0.0], &c).unwrap();
    assert_eq!(c.get() as usize, semi.expansion_size());
    let full = fit_grn(&d, kernel, None).unwrap();
    let c = KernelCounter::new();
    full.predict(&[0.0, 0.0], &c).unwrap();
    assert_eq!(c.get(), 60);
}

#[test]
fn mode_mismatch_is_an_error() {
    let d = gen_blobs(20, 2, 2, 2.0, RngSeed(1)).unwrap();
    let full = fit_grn(&d, KernelSpec::new(1.0).unwrap(), None).unwrap();
    let c = KernelCounter::new();
    assert!(matches!(
        grn_scores_semi(&full, &[0.0, 0.0], &c),
        Err(Error::Mode { .. })
    ));
}

#[test]
fn json_round_trip() {
    let d = gen_blobs(30, 2, 3, 2.0, RngSeed(2)).unwrap();
    let clusters = fit(&d.rows(), &d.signed_labels(), &ClusterConfig::new(4, 0.0)).unwrap();
    let m = fit_grn(
        &d,
        KernelSpec::new(1.3).unwrap(),
        Some(Partition::Clusters(&clusters)),
    )
    .unwrap();
    let back = GrnModel::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(back, m);
}
