use proptest::prelude::*;
use semiparam::data::{
    euclidean_distance, gen_blobs, load_csv, read_csv, save_csv, uniform_points, Dataset, RngSeed,
};
use semiparam::Error;

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, 3)
}

proptest! {
    #[test]
    fn distance_is_a_metric(a in vec3(), b in vec3(), c in vec3()) {
        let ab = euclidean_distance(&a, &b).unwrap();
        let ba = euclidean_distance(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(euclidean_distance(&a, &a).unwrap(), 0.0);
        if a != b {
            prop_assert!(ab > 0.0);
        }
        let ac = euclidean_distance(&a, &c).unwrap();
        let cb = euclidean_distance(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9 * (1.0 + ab));
    }

    #[test]
    fn csv_round_trip_is_bit_exact(
        rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 2), 1..20),
        seed in any::<u64>(),
    ) {
        let labels: Vec<i64> = (0..rows.len()).map(|i| (seed.wrapping_add(i as u64) % 3) as i64).collect();
        let d = Dataset::from_rows(rows, labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        save_csv(&d, &path).unwrap();
        let back = load_csv(&path).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn generators_are_pure(seed in any::<u64>()) {
        let a = gen_blobs(30, 3, 3, 2.0, RngSeed(seed)).unwrap();
        let b = gen_blobs(30, 3, 3, 2.0, RngSeed(seed)).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(uniform_points(10, 2, RngSeed(seed)), uniform_points(10, 2, RngSeed(seed)));
    }
}

#[test]
fn distance_dimension_mismatch() {
    assert!(matches!(
        euclidean_distance(&[1.0], &[1.0, 2.0]),
        Err(Error::DimensionMismatch {
            expected: 1,
            got: 2
        })
    ));
}

#[test]
fn parse_errors_carry_position() {
    let text = "f0,f1,label\n1.0,2.0,1\n3.0,oops,-1\n";
    match read_csv(text.as_bytes()) {
        Err(Error::Parse { row, column, .. }) => {
            assert_eq!(row, 2);
            assert_eq!(column, 1);
        }
        other => panic!("expected parse error, got {other:?}"),
    }
    assert!(matches!(
        read_csv("f0,label\n1.0,x\n".as_bytes()),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn split_partitions_the_data() {
    let d = gen_blobs(50, 2, 2, 3.0, RngSeed(4)).unwrap();
    let (train, test) = d.split(0.7, RngSeed(9)).unwrap();
    assert_eq!(train.len() + test.len(), 50);
    assert_eq!(train.len(), 35);
    let mut all: Vec<Vec<f64>> = train
        .rows()
        .iter()
        .chain(test.rows().iter())
        .map(|r| r.to_vec())
        .collect();
    let mut orig: Vec<Vec<f64>> = d.rows().iter().map(|r| r.to_vec()).collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    orig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(all, orig);
    assert!(d.split(1.0, RngSeed(0)).is_err());
}

#[test]
fn binary_requirement() {
    let multi = gen_blobs(9, 2, 3, 1.0, RngSeed(0)).unwrap();
    assert!(!multi.is_binary());
    assert!(multi.require_binary().is_err());
    assert!(gen_blobs(8, 2, 2, 1.0, RngSeed(0)).unwrap().is_binary());
}
