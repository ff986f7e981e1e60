use proptest::prelude::*;
use semiparam::codebook::{
    average_distortion, train_lbg, voronoi_grid, Bounds, Codebook, LbgConfig,
};
use semiparam::data::{uniform_points, RngSeed};

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 2), 16..120)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn trained_codebook_is_a_fixed_point(rows in rows_strategy(), n in 1usize..10, seed in any::<u64>()) {
        let cfg = LbgConfig::new(n).with_seed(seed);
        let cb = train_lbg(&rows, &cfg).unwrap();
        let trace = cb.distortion_trace();
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        let before = average_distortion(&cb, &rows).unwrap();
        // One more nearest-neighbour / centroid round.
        let cv = cb.codevectors();
        let mut sums = vec![vec![0.0; 2]; cv.len()];
        let mut counts = vec![0usize; cv.len()];
        for x in &rows {
            let (j, q) = cb.quantize(x).unwrap();
            for c in cv {
                prop_assert!(sq(x, q) <= sq(x, c));
            }
            counts[j] += 1;
            sums[j][0] += x[0];
            sums[j][1] += x[1];
        }
        let next: Vec<Vec<f64>> = sums
            .iter()
            .zip(&counts)
            .zip(cv)
            .map(|((s, &c), old)| if c == 0 { old.clone() } else { vec![s[0] / c as f64, s[1] / c as f64] })
            .collect();
        let after = average_distortion(&Codebook::new(next).unwrap(), &rows).unwrap();
        prop_assert!((before - after).abs() <= cfg.eps * before + 1e-12);
    }

    #[test]
    fn quantize_is_scale_consistent(rows in rows_strategy(), s in 0.01..100.0f64, n in 1usize..8) {
        let cb = train_lbg(&rows, &LbgConfig::new(n)).unwrap();
        let scaled = Codebook::new(cb.codevectors().iter().map(|c| c.iter().map(|v| v * s).collect()).collect()).unwrap();
        let mut ties = 0;
        for x in &rows {
            let sx: Vec<f64> = x.iter().map(|v| v * s).collect();
            let (a, _) = cb.quantize(x).unwrap();
            let (b, _) = scaled.quantize(&sx).unwrap();
            if a != b {
                // Only a rounding-level near tie may flip.
                let da = sq(x, &cb.codevectors()[a]);
                let db = sq(x, &cb.codevectors()[b]);
                prop_assert!((da - db).abs() <= 1e-9 * (1.0 + da));
                ties += 1;
            }
        }
        prop_assert!(ties <= rows.len() / 10);
    }
}

#[test]
fn line_of_four_halves() {
    let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
    let cb = train_lbg(&rows, &LbgConfig::new(2)).unwrap();
    let mut cv: Vec<f64> = cb.codevectors().iter().map(|c| c[0]).collect();
    cv.sort_by(f64::total_cmp);
    assert_eq!(cv, vec![0.5, 2.5]);
    assert_eq!(average_distortion(&cb, &rows).unwrap(), 0.25);
}

#[test]
fn codebook_as_large_as_data_is_lossless() {
    let rows = uniform_points(12, 2, RngSeed(5));
    let cb = train_lbg(&rows, &LbgConfig::new(12)).unwrap();
    assert!(average_distortion(&cb, &rows).unwrap() < 1e-20);
    assert!(train_lbg(&rows, &LbgConfig::new(13)).is_err());
}

#[test]
fn voronoi_grid_matches_quantize() {
    let rows = uniform_points(200, 2, RngSeed(1));
    let cb = train_lbg(&rows, &LbgConfig::new(5).with_seed(3)).unwrap();
    let bounds = Bounds {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
    };
    let grid = voronoi_grid(&cb, bounds, (20, 10)).unwrap();
    assert_eq!(grid.cells.len(), 200);
    for &(x, y, region) in &grid.cells {
        assert_eq!(cb.quantize(&[x, y]).unwrap().0, region);
    }
    let mut buf = Vec::new();
    grid.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("x,y,region\n"));
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn json_round_trip() {
    let rows = uniform_points(50, 3, RngSeed(2));
    let cb = train_lbg(&rows, &LbgConfig::new(4)).unwrap();
    let back = Codebook::from_json(&cb.to_json().unwrap()).unwrap();
    assert_eq!(back.codevectors(), cb.codevectors());
}
