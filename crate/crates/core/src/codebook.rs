//! LBG vector quantization.
//!
//! A codebook of `N` codevectors is grown by binary splitting from the global
//! mean. After each split the generalized Lloyd iteration alternates the two
//! optimality conditions of a quantizer:
//!
//! * nearest neighbour: every training vector belongs to the region of its
//!   closest codevector (ties go to the lowest index);
//! * centroid: every codevector is the arithmetic mean of its region.
//!
//! The quality measure is the per-component mean squared error
//! `D_ave = (1 / (M * dim)) * sum_m ||X_m - Q(X_m)||^2`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, RngSeed};
use crate::error::{check_dim, check_finite, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    codevectors: Vec<Vec<f64>>,
    distortion_trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CodebookJson {
    n: usize,
    dim: usize,
    codevectors: Vec<Vec<f64>>,
}

impl Codebook {
    pub fn new(codevectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = codevectors
            .first()
            .ok_or_else(|| Error::contract("codebook must hold at least one codevector"))?
            .len();
        if dim == 0 {
            return Err(Error::contract("codevectors must have positive dimension"));
        }
        for c in &codevectors {
            check_dim(dim, c.len())?;
            check_finite(c, "codevector")?;
        }
        Ok(Codebook {
            codevectors,
            distortion_trace: Vec::new(),
        })
    }

    pub fn codevectors(&self) -> &[Vec<f64>] {
        &self.codevectors
    }

    pub fn len(&self) -> usize {
        self.codevectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codevectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.codevectors[0].len()
    }

    /// `D_ave` after every Lloyd round, splitting stages included.
    pub fn distortion_trace(&self) -> &[f64] {
        &self.distortion_trace
    }

    /// Index and value of the nearest codevector.
    pub fn quantize(&self, x: &[f64]) -> Result<(usize, &[f64])> {
        check_dim(self.dim(), x.len())?;
        let n = nearest(&self.codevectors, x);
        Ok((n, &self.codevectors[n]))
    }

    /// Region index of every row.
    pub fn encode<X: AsRef<[f64]>>(&self, rows: &[X]) -> Result<Vec<usize>> {
        rows.iter()
            .map(|x| self.quantize(x.as_ref()).map(|(n, _)| n))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CodebookJson {
            n: self.len(),
            dim: self.dim(),
            codevectors: self.codevectors.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CodebookJson = serde_json::from_str(text)?;
        let cb = Codebook::new(raw.codevectors)?;
        if cb.len() != raw.n || cb.dim() != raw.dim {
            return Err(Error::contract(
                "codebook JSON header disagrees with its codevectors",
            ));
        }
        Ok(cb)
    }
}

fn nearest(codevectors: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(x, &codevectors[0]);
    for (n, c) in codevectors.iter().enumerate().skip(1) {
        let d = sq_dist(x, c);
        if d < best_d {
            best = n;
            best_d = d;
        }
    }
    best
}

fn total_error<X: AsRef<[f64]>>(codevectors: &[Vec<f64>], rows: &[X]) -> f64 {
    rows.iter()
        .map(|x| {
            let x = x.as_ref();
            sq_dist(x, &codevectors[nearest(codevectors, x)])
        })
        .sum()
}

pub fn average_distortion<X: AsRef<[f64]>>(cb: &Codebook, rows: &[X]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::contract(
            "distortion needs at least one training vector",
        ));
    }
    for x in rows {
        check_dim(cb.dim(), x.as_ref().len())?;
    }
    Ok(total_error(&cb.codevectors, rows) / (rows.len() * cb.dim()) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbgConfig {
    pub n: usize,
    /// Relative distortion improvement that ends an intermediate stage.
    pub eps: f64,
    pub seed: RngSeed,
    /// Cap on Lloyd rounds per stage.
    pub max_rounds: usize,
}

impl LbgConfig {
    pub fn new(n: usize) -> Self {
        LbgConfig {
            n,
            eps: 1e-4,
            seed: RngSeed(0),
            max_rounds: 10_000,
        }
    }

    pub fn with_seed(mut self, seed: impl Into<RngSeed>) -> Self {
        self.seed = seed.into();
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }
}

struct Lloyd<'a, X> {
    rows: &'a [X],
    dim: usize,
    trace: Vec<f64>,
}

impl<X: AsRef<[f64]>> Lloyd<'_, X> {
    fn d_ave(&self, codevectors: &[Vec<f64>]) -> f64 {
        total_error(codevectors, self.rows) / (self.rows.len() * self.dim) as f64
    }

    fn partition(&self, codevectors: &[Vec<f64>]) -> Vec<usize> {
        self.rows
            .iter()
            .map(|x| nearest(codevectors, x.as_ref()))
            .collect()
    }

    /// Per-region squared error against the current codevectors.
    fn region_errors(&self, codevectors: &[Vec<f64>], assignment: &[usize]) -> Vec<f64> {
        let mut errors = vec![0.0; codevectors.len()];
        for (x, &a) in self.rows.iter().zip(assignment) {
            errors[a] += sq_dist(x.as_ref(), &codevectors[a]);
        }
        errors
    }

    /// Moves each empty codevector onto the worst-fit vector of the
    /// highest-distortion region. Returns the refreshed partition.
    fn fill_empty(&self, codevectors: &mut [Vec<f64>], mut assignment: Vec<usize>) -> Vec<usize> {
        loop {
            let mut counts = vec![0usize; codevectors.len()];
            for &a in &assignment {
                counts[a] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                return assignment;
            };
            let errors = self.region_errors(codevectors, &assignment);
            let worst = argmax_lowest(&errors);
            if errors[worst] <= 0.0 {
                // Only duplicated vectors remain; no split can separate them.
                return assignment;
            }
            let far = self
                .rows
                .iter()
                .zip(&assignment)
                .enumerate()
                .filter(|(_, (_, &a))| a == worst)
                .map(|(m, (x, _))| (m, sq_dist(x.as_ref(), &codevectors[worst])))
                .fold(
                    (usize::MAX, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                )
                .0;
            codevectors[empty] = self.rows[far].as_ref().to_vec();
            assignment = self.partition(codevectors);
        }
    }

    fn centroids(&self, codevectors: &[Vec<f64>], assignment: &[usize]) -> Vec<Vec<f64>> {
        let mut sums = vec![vec![0.0; self.dim]; codevectors.len()];
        let mut counts = vec![0usize; codevectors.len()];
        for (x, &a) in self.rows.iter().zip(assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x.as_ref()) {
                *s += v;
            }
        }
        sums.into_iter()
            .zip(counts)
            .zip(codevectors)
            .map(|((s, c), old)| {
                if c == 0 {
                    old.clone()
                } else {
                    s.into_iter().map(|v| v / c as f64).collect()
                }
            })
            .collect()
    }

    /// Lloyd rounds until the partition is stable, or, when `eps` is given,
    /// until the relative improvement drops below it.
    fn run(&mut self, codevectors: &mut Vec<Vec<f64>>, eps: Option<f64>, max_rounds: usize) {
        let mut assignment = self.partition(codevectors);
        let mut previous = self.d_ave(codevectors);
        for _ in 0..max_rounds {
            assignment = self.fill_empty(codevectors, assignment);
            *codevectors = self.centroids(codevectors, &assignment);
            let current = self.d_ave(codevectors);
            self.trace.push(current);
            let next = self.partition(codevectors);
            let stable = next == assignment;
            assignment = next;
            if stable || current == 0.0 {
                break;
            }
            if let Some(eps) = eps {
                if previous - current < eps * previous {
                    break;
                }
            }
            previous = current;
        }
    }
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// Trains an `n`-vector codebook on `rows`.
///
/// Splitting keeps the parent codevector and adds a copy displaced by `1e-3`
/// of the data's RMS spread along a seeded random direction, so the codebook
/// after a split is a superset of the one before and `D_ave` cannot rise.
/// Only the `n - current` highest-distortion regions are split in the last
/// stage, which lands exactly on `n`. The last stage runs to a fixed point,
/// so the returned codebook satisfies both optimality conditions exactly.
pub fn train_lbg<X: AsRef<[f64]>>(rows: &[X], cfg: &LbgConfig) -> Result<Codebook> {
    let m = rows.len();
    if m == 0 {
        return Err(Error::contract("training sequence is empty"));
    }
    let dim = rows[0].as_ref().len();
    for x in rows {
        check_dim(dim, x.as_ref().len())?;
        check_finite(x.as_ref(), "training vector")?;
    }
    if cfg.n == 0 || cfg.n > m {
        return Err(Error::contract(format!(
            "codebook size {} must lie in 1..={m}",
            cfg.n
        )));
    }
    if !(cfg.eps > 0.0) {
        return Err(Error::contract("eps must be positive"));
    }

    let mut mean = vec![0.0; dim];
    for x in rows {
        for (s, v) in mean.iter_mut().zip(x.as_ref()) {
            *s += v;
        }
    }
    for s in &mut mean {
        *s /= m as f64;
    }
    let spread = (rows.iter().map(|x| sq_dist(x.as_ref(), &mean)).sum::<f64>() / m as f64).sqrt();
    let delta = 1e-3 * if spread > 0.0 { spread } else { 1.0 };

    let mut rng = cfg.seed.rng();
    let mut lloyd = Lloyd {
        rows,
        dim,
        trace: Vec::new(),
    };
    let mut codevectors = vec![mean];
    lloyd.trace.push(lloyd.d_ave(&codevectors));

    while codevectors.len() < cfg.n {
        let assignment = lloyd.partition(&codevectors);
        let errors = lloyd.region_errors(&codevectors, &assignment);
        let mut order: Vec<usize> = (0..codevectors.len()).collect();
        order.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]).then(a.cmp(&b)));
        let splits = codevectors.len().min(cfg.n - codevectors.len());
        for &parent in order.iter().take(splits) {
            let mut dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                dir[rng.random_range(0..dim)] = 1.0;
            } else {
                for v in &mut dir {
                    *v /= norm;
                }
            }
            let child = codevectors[parent]
                .iter()
                .zip(&dir)
                .map(|(c, u)| c + delta * u)
                .collect();
            codevectors.push(child);
        }
        let eps = (codevectors.len() < cfg.n).then_some(cfg.eps);
        lloyd.run(&mut codevectors, eps, cfg.max_rounds);
    }
    if cfg.n == 1 {
        lloyd.run(&mut codevectors, None, cfg.max_rounds);
    }

    Ok(Codebook {
        codevectors,
        distortion_trace: lloyd.trace,
    })
}

/// Axis-aligned rectangle for rasterizing Voronoi regions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoronoiGrid {
    pub nx: usize,
    pub ny: usize,
    /// Cell centres and region labels, row by row from `y_min` upward.
    pub cells: Vec<(f64, f64, usize)>,
}

impl VoronoiGrid {
    pub fn region(&self, ix: usize, iy: usize) -> usize {
        self.cells[iy * self.nx + ix].2
    }

    /// CSV with header `x,y,region`.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "x,y,region")?;
        for (x, y, r) in &self.cells {
            writeln!(out, "{x:?},{y:?},{r}")?;
        }
        Ok(())
    }
}

/// Labels each grid cell centre with its nearest codevector.
pub fn voronoi_grid(
    cb: &Codebook,
    bounds: Bounds,
    resolution: (usize, usize),
) -> Result<VoronoiGrid> {
    if cb.dim() != 2 {
        return Err(Error::contract("voronoi grid needs a 2-D codebook"));
    }
    let (nx, ny) = resolution;
    if nx == 0 || ny == 0 {
        return Err(Error::contract("grid resolution must be positive"));
    }
    if !(bounds.x_max > bounds.x_min && bounds.y_max > bounds.y_min) {
        return Err(Error::contract("grid bounds are empty"));
    }
    let dx = (bounds.x_max - bounds.x_min) / nx as f64;
    let dy = (bounds.y_max - bounds.y_min) / ny as f64;
    let mut cells = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        let y = bounds.y_min + (iy as f64 + 0.5) * dy;
        for ix in 0..nx {
            let x = bounds.x_min + (ix as f64 + 0.5) * dx;
            cells.push((x, y, nearest(&cb.codevectors, &[x, y])));
        }
    }
    Ok(VoronoiGrid { nx, ny, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Vec<Vec<f64>> {
        vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]
    }

    #[test]
    fn quantize_exact_hit_and_tie() {
        let cb = Codebook::new(vec![
            vec![-1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 5.0],
            vec![3.0, 3.0],
        ])
        .unwrap();
        assert_eq!(cb.quantize(&[3.0, 3.0]).unwrap().0, 3);
        assert_eq!(cb.quantize(&[0.0, 0.0]).unwrap().0, 0);
        assert!(cb.quantize(&[0.0]).is_err());
    }

    #[test]
    fn empty_codebook_rejected() {
        assert!(Codebook::new(vec![]).is_err());
    }

    #[test]
    fn distortion_of_line_example() {
        let cb = Codebook::new(vec![vec![0.5], vec![2.5]]).unwrap();
        // Each point is 0.5 from its codevector: 4 * 0.25 / (4 * 1).
        assert_eq!(average_distortion(&cb, &line()).unwrap(), 0.25);
    }

    #[test]
    fn distortion_zero_at_perfect_reconstruction() {
        let cb = Codebook::new(line()).unwrap();
        assert_eq!(average_distortion(&cb, &line()).unwrap(), 0.0);
    }

    #[test]
    fn lbg_line_two_codevectors() {
        let cb = train_lbg(&line(), &LbgConfig::new(2)).unwrap();
        let mut v: Vec<f64> = cb.codevectors().iter().map(|c| c[0]).collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, vec![0.5, 2.5]);
        assert_eq!(average_distortion(&cb, &line()).unwrap(), 0.25);
    }

    #[test]
    fn lbg_single_codevector_is_mean() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, -2.0], vec![5.0, 3.0]];
        let cb = train_lbg(&rows, &LbgConfig::new(1)).unwrap();
        assert_eq!(cb.codevectors()[0], vec![3.0, 1.0]);
    }

    #[test]
    fn lbg_saturation_reproduces_training_set() {
        let rows: Vec<Vec<f64>> = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.2],
            vec![5.0, 5.0],
            vec![5.1, 4.9],
            vec![-3.0, 2.0],
        ];
        let cb = train_lbg(&rows, &LbgConfig::new(5)).unwrap();
        assert_eq!(average_distortion(&cb, &rows).unwrap(), 0.0);
        let mut got = cb.codevectors().to_vec();
        let mut want = rows.clone();
        got.sort_by(|a, b| a[0].total_cmp(&b[0]));
        want.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(got, want);
    }

    #[test]
    fn lbg_rejects_oversized_codebook() {
        assert!(train_lbg(&line(), &LbgConfig::new(5)).is_err());
    }

    #[test]
    fn voronoi_bisector_and_uniform() {
        let cb = Codebook::new(vec![vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let b = Bounds {
            x_min: -2.0,
            x_max: 2.0,
            y_min: -1.0,
            y_max: 1.0,
        };
        let g = voronoi_grid(&cb, b, (8, 3)).unwrap();
        for iy in 0..3 {
            for ix in 0..8 {
                assert_eq!(g.region(ix, iy), usize::from(ix >= 4));
            }
        }
        let one = Codebook::new(vec![vec![0.3, 0.3]]).unwrap();
        let g = voronoi_grid(&one, b, (5, 5)).unwrap();
        assert!(g.cells.iter().all(|c| c.2 == 0));
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x,y,region\n"));
    }

    #[test]
    fn voronoi_needs_2d() {
        let cb = Codebook::new(vec![vec![0.0]]).unwrap();
        let b = Bounds {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        };
        assert!(voronoi_grid(&cb, b, (2, 2)).is_err());
    }

    #[test]
    fn json_fields() {
        let cb = Codebook::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let text = cb.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["dim"], 2);
        assert_eq!(
            Codebook::from_json(&text).unwrap().codevectors(),
            cb.codevectors()
        );
    }
}
