//! Class-balanced k-means.
//!
//! Minimizes cluster cohesion plus an `R`-weighted class-skew penalty,
//!
//! ```text
//! sum_j sum_i Z_ij ||X_i - C_j||^2  +  R sum_j | sum_i Z_ij y_i |
//! ```
//!
//! by alternating two exact steps. With the centroids fixed, the membership
//! matrix is the solution of a linear program in which one slack `t_j` per
//! cluster bounds the absolute skew. With the membership fixed, each centroid
//! is the membership-weighted mean of the rows. Neither step can increase the
//! objective, so the recorded trace is non-increasing.
//!
//! Small instances use the dense simplex in [`crate::lp`]; larger ones use
//! iterated conditional modes on integral assignments (move one row at a time,
//! keep only strict improvements). With `R = 0` both reduce to the
//! nearest-centroid rule and the whole procedure is Lloyd's algorithm.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, RngSeed};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::lp::LinearProgram;

/// Largest dense tableau (rows x columns) the simplex path will allocate.
pub const SIMPLEX_TABLEAU_LIMIT: usize = 4_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MembershipSolver {
    /// Simplex when the tableau fits under [`SIMPLEX_TABLEAU_LIMIT`], else ICM.
    Auto,
    Simplex,
    Icm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    pub r: f64,
    pub max_iter: usize,
    /// Relative objective decrease below which iteration stops.
    pub tol: f64,
    pub seed: RngSeed,
    pub solver: MembershipSolver,
}

impl ClusterConfig {
    pub fn new(k: usize, r: f64) -> Self {
        ClusterConfig {
            k,
            r,
            max_iter: 300,
            tol: 1e-8,
            seed: RngSeed(0),
            solver: MembershipSolver::Auto,
        }
    }

    pub fn with_seed(mut self, seed: impl Into<RngSeed>) -> Self {
        self.seed = seed.into();
        self
    }

    pub fn with_solver(mut self, solver: MembershipSolver) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Result of one membership step.
#[derive(Clone, Debug, PartialEq)]
pub struct Membership {
    /// `n x k`, rows sum to one.
    pub z: Vec<Vec<f64>>,
    /// Per-cluster slack, equal to the absolute skew at the optimum.
    pub t: Vec<f64>,
    /// `sum Z_ij d_ij + R sum t_j`.
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub r: f64,
    pub centroids: Vec<Vec<f64>>,
    /// Hard assignment after rounding the final membership.
    pub assignment: Vec<usize>,
    pub objective_trace: Vec<f64>,
    /// Membership matrix of the last alternating step, before rounding.
    #[serde(skip)]
    pub membership: Vec<Vec<f64>>,
    #[serde(skip)]
    pub slacks: Vec<f64>,
    /// Objective of the rounded assignment with its refreshed centroids.
    #[serde(skip)]
    pub final_objective: f64,
    #[serde(skip)]
    pub iterations: usize,
    #[serde(skip)]
    pub converged: bool,
}

impl ClusterModel {
    /// Number of rows assigned to each cluster.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &a in &self.assignment {
            counts[a] += 1;
        }
        counts
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut model: ClusterModel = serde_json::from_str(text)?;
        if model.centroids.len() != model.k || model.assignment.iter().any(|&a| a >= model.k) {
            return Err(Error::contract("cluster model JSON is inconsistent"));
        }
        model.membership = model
            .assignment
            .iter()
            .map(|&a| one_hot(a, model.k))
            .collect();
        model.final_objective = model.objective_trace.last().copied().unwrap_or(f64::NAN);
        model.converged = true;
        Ok(model)
    }
}

fn one_hot(index: usize, k: usize) -> Vec<f64> {
    let mut row = vec![0.0; k];
    row[index] = 1.0;
    row
}

fn validate_rows<X: AsRef<[f64]>>(x: &[X]) -> Result<usize> {
    let first = x
        .first()
        .ok_or_else(|| Error::contract("no data rows"))?
        .as_ref();
    let dim = first.len();
    for row in x {
        check_dim(dim, row.as_ref().len())?;
        check_finite(row.as_ref(), "data row")?;
    }
    Ok(dim)
}

fn distance_matrix<X: AsRef<[f64]> + Sync>(x: &[X], c: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let row = |xi: &X| c.iter().map(|cj| sq_dist(xi.as_ref(), cj)).collect();
    if x.len() * c.len() > 20_000 {
        // Per-row values are independent, so the result is identical to the serial path.
        x.par_iter().map(row).collect()
    } else {
        x.iter().map(row).collect()
    }
}

fn argmin_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = j;
        }
    }
    best
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

/// Cohesion plus skew for an arbitrary (possibly fractional) membership.
pub fn objective<X: AsRef<[f64]>>(
    x: &[X],
    y: &[f64],
    z: &[Vec<f64>],
    c: &[Vec<f64>],
    r: f64,
) -> Result<f64> {
    let dim = validate_rows(x)?;
    check_dim(x.len(), y.len())?;
    check_dim(x.len(), z.len())?;
    check_finite(y, "labels")?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::contract("R must be a finite non-negative number"));
    }
    let k = c.len();
    for cj in c {
        check_dim(dim, cj.len())?;
        check_finite(cj, "centroid")?;
    }
    for zi in z {
        check_dim(k, zi.len())?;
        check_finite(zi, "membership")?;
    }
    Ok(objective_unchecked(x, y, z, c, r))
}

fn objective_unchecked<X: AsRef<[f64]>>(
    x: &[X],
    y: &[f64],
    z: &[Vec<f64>],
    c: &[Vec<f64>],
    r: f64,
) -> f64 {
    let mut cohesion = 0.0;
    let mut skew = vec![0.0; c.len()];
    for ((xi, zi), yi) in x.iter().zip(z).zip(y) {
        for (j, cj) in c.iter().enumerate() {
            if zi[j] != 0.0 {
                cohesion += zi[j] * sq_dist(xi.as_ref(), cj);
                skew[j] += zi[j] * yi;
            }
        }
    }
    cohesion + r * skew.iter().map(|s| s.abs()).sum::<f64>()
}

fn nearest_assignment(d: &[Vec<f64>]) -> Vec<usize> {
    d.iter().map(|row| argmin_lowest(row)).collect()
}

fn column_skews(assignment: &[usize], y: &[f64], k: usize) -> Vec<f64> {
    let mut s = vec![0.0; k];
    for (&a, &yi) in assignment.iter().zip(y) {
        s[a] += yi;
    }
    s
}

fn membership_from_assignment(
    assignment: &[usize],
    d: &[Vec<f64>],
    y: &[f64],
    r: f64,
    k: usize,
) -> Membership {
    let t: Vec<f64> = column_skews(assignment, y, k)
        .into_iter()
        .map(f64::abs)
        .collect();
    let cohesion: f64 = assignment.iter().zip(d).map(|(&a, row)| row[a]).sum();
    Membership {
        z: assignment.iter().map(|&a| one_hot(a, k)).collect(),
        objective: cohesion + r * t.iter().sum::<f64>(),
        t,
    }
}

/// Builds the membership LP and solves it from the nearest-centroid basis.
///
/// Column layout: `Z_ij` at `i*k + j`, then `t_j`, then the two slack
/// families closing `+-sum_i Z_ij y_i <= t_j` into equalities.
fn simplex_membership(d: &[Vec<f64>], y: &[f64], r: f64, k: usize) -> Result<Membership> {
    let n = d.len();
    let nz = n * k;
    let cols = nz + 3 * k;
    let rows = n + 2 * k;
    let mut cost = vec![0.0; cols];
    for (i, row) in d.iter().enumerate() {
        cost[i * k..(i + 1) * k].copy_from_slice(row);
    }
    for v in &mut cost[nz..nz + k] {
        *v = r;
    }
    let mut a = vec![0.0; rows * cols];
    let mut b = vec![0.0; rows];
    for i in 0..n {
        for j in 0..k {
            a[i * cols + i * k + j] = 1.0;
            a[(n + j) * cols + i * k + j] = y[i];
            a[(n + k + j) * cols + i * k + j] = -y[i];
        }
        b[i] = 1.0;
    }
    for j in 0..k {
        a[(n + j) * cols + nz + j] = -1.0;
        a[(n + j) * cols + nz + k + j] = 1.0;
        a[(n + k + j) * cols + nz + j] = -1.0;
        a[(n + k + j) * cols + nz + 2 * k + j] = 1.0;
    }
    let lp = LinearProgram::new(cost, a, b)?;

    let start = nearest_assignment(d);
    let skews = column_skews(&start, y, k);
    let mut basis: Vec<usize> = start.iter().enumerate().map(|(i, &j)| i * k + j).collect();
    for (j, &s) in skews.iter().enumerate() {
        basis.push(nz + j);
        basis.push(if s >= 0.0 { nz + 2 * k + j } else { nz + k + j });
    }
    let solution = lp.solve_from_basis(&basis, lp.default_pivot_cap())?;

    let z: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = solution.x[i * k..(i + 1) * k].to_vec();
            let total: f64 = row.iter().sum();
            for v in &mut row {
                *v /= total;
            }
            row
        })
        .collect();
    let t: Vec<f64> = (0..k)
        .map(|j| {
            z.iter()
                .zip(y)
                .map(|(zi, yi)| zi[j] * yi)
                .sum::<f64>()
                .abs()
        })
        .collect();
    let objective = z
        .iter()
        .zip(d)
        .map(|(zi, di)| zi.iter().zip(di).map(|(a, b)| a * b).sum::<f64>())
        .sum::<f64>()
        + r * t.iter().sum::<f64>();
    Ok(Membership { z, t, objective })
}

/// Greedy single-row moves from `start`, accepting only strict decreases.
fn icm_membership(d: &[Vec<f64>], y: &[f64], r: f64, k: usize, start: Vec<usize>) -> Membership {
    let mut assignment = start;
    let mut skew = column_skews(&assignment, y, k);
    let max_sweeps = 1000;
    for _ in 0..max_sweeps {
        let mut moved = false;
        for i in 0..assignment.len() {
            let a = assignment[i];
            let leave = r * ((skew[a] - y[i]).abs() - skew[a].abs());
            let mut best: Option<(usize, f64)> = None;
            for j in 0..k {
                if j == a {
                    continue;
                }
                let delta =
                    d[i][j] - d[i][a] + leave + r * ((skew[j] + y[i]).abs() - skew[j].abs());
                if best.is_none_or(|(_, bd)| delta < bd) {
                    best = Some((j, delta));
                }
            }
            if let Some((j, delta)) = best {
                // Relative guard keeps rounding noise from producing endless swaps.
                if delta < -1e-12 * (1.0 + d[i][a].abs()) {
                    skew[a] -= y[i];
                    skew[j] += y[i];
                    assignment[i] = j;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    membership_from_assignment(&assignment, d, y, r, k)
}

fn use_simplex(solver: MembershipSolver, n: usize, k: usize) -> bool {
    match solver {
        MembershipSolver::Simplex => true,
        MembershipSolver::Icm => false,
        MembershipSolver::Auto => (n + 2 * k) * (n * k + 3 * k + 1) <= SIMPLEX_TABLEAU_LIMIT,
    }
}

/// Optimal membership for fixed centroids (exact LP on the simplex path).
pub fn solve_membership<X: AsRef<[f64]> + Sync>(
    x: &[X],
    y: &[f64],
    c: &[Vec<f64>],
    r: f64,
) -> Result<Membership> {
    solve_membership_with(x, y, c, r, MembershipSolver::Auto)
}

pub fn solve_membership_with<X: AsRef<[f64]> + Sync>(
    x: &[X],
    y: &[f64],
    c: &[Vec<f64>],
    r: f64,
    solver: MembershipSolver,
) -> Result<Membership> {
    let dim = validate_rows(x)?;
    check_dim(x.len(), y.len())?;
    check_finite(y, "labels")?;
    if c.is_empty() {
        return Err(Error::contract("at least one centroid is required"));
    }
    for cj in c {
        check_dim(dim, cj.len())?;
        check_finite(cj, "centroid")?;
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::contract("R must be a finite non-negative number"));
    }
    let d = distance_matrix(x, c);
    membership_for(&d, y, r, c.len(), solver, None)
}

fn membership_for(
    d: &[Vec<f64>],
    y: &[f64],
    r: f64,
    k: usize,
    solver: MembershipSolver,
    previous: Option<&[usize]>,
) -> Result<Membership> {
    if r == 0.0 {
        return Ok(membership_from_assignment(
            &nearest_assignment(d),
            d,
            y,
            r,
            k,
        ));
    }
    if use_simplex(solver, d.len(), k) {
        simplex_membership(d, y, r, k)
    } else {
        let start = previous
            .map(<[usize]>::to_vec)
            .unwrap_or_else(|| nearest_assignment(d));
        Ok(icm_membership(d, y, r, k, start))
    }
}

/// Membership-weighted means. A column with no mass is re-seeded at the
/// row farthest from its nearest already-placed centroid.
pub fn update_centroids<X: AsRef<[f64]>>(x: &[X], z: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let dim = validate_rows(x)?;
    check_dim(x.len(), z.len())?;
    let k = z
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::contract("empty membership"))?;
    if k == 0 {
        return Err(Error::contract("membership needs at least one column"));
    }
    for zi in z {
        check_dim(k, zi.len())?;
        check_finite(zi, "membership")?;
        if zi.iter().any(|v| *v < 0.0) {
            return Err(Error::contract("membership entries must be non-negative"));
        }
    }

    let mut sums = vec![vec![0.0; dim]; k];
    let mut mass = vec![0.0; k];
    for (xi, zi) in x.iter().zip(z) {
        for (j, &w) in zi.iter().enumerate() {
            if w != 0.0 {
                mass[j] += w;
                for (s, v) in sums[j].iter_mut().zip(xi.as_ref()) {
                    *s += w * v;
                }
            }
        }
    }
    let mut centroids: Vec<Option<Vec<f64>>> = sums
        .into_iter()
        .zip(&mass)
        .map(|(s, &m)| (m > 0.0).then(|| s.into_iter().map(|v| v / m).collect()))
        .collect();
    for j in 0..k {
        if centroids[j].is_none() {
            let placed: Vec<&Vec<f64>> = centroids.iter().flatten().collect();
            let far = if placed.is_empty() {
                0
            } else {
                let gaps: Vec<f64> = x
                    .iter()
                    .map(|xi| {
                        placed
                            .iter()
                            .map(|c| sq_dist(xi.as_ref(), c))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect();
                argmax_lowest(&gaps)
            };
            centroids[j] = Some(x[far].as_ref().to_vec());
        }
    }
    Ok(centroids.into_iter().flatten().collect())
}

/// k distinct rows chosen uniformly without replacement.
pub fn init_centroids<X: AsRef<[f64]>>(x: &[X], k: usize, seed: RngSeed) -> Result<Vec<Vec<f64>>> {
    if k == 0 || k > x.len() {
        return Err(Error::contract(format!(
            "k = {k} must lie in 1..={}",
            x.len()
        )));
    }
    let mut rng = seed.rng();
    Ok(sample(&mut rng, x.len(), k)
        .into_iter()
        .map(|i| x[i].as_ref().to_vec())
        .collect())
}

/// Runs the alternating scheme from seeded initial centroids.
pub fn fit<X: AsRef<[f64]> + Sync>(
    x: &[X],
    y: &[f64],
    cfg: &ClusterConfig,
) -> Result<ClusterModel> {
    validate_rows(x)?;
    if cfg.k > x.len() {
        return Err(Error::contract(format!(
            "k = {} exceeds the number of rows {}",
            cfg.k,
            x.len()
        )));
    }
    let init = init_centroids(x, cfg.k, cfg.seed)?;
    fit_from(x, y, init, cfg)
}

/// Runs the alternating scheme from explicit initial centroids.
pub fn fit_from<X: AsRef<[f64]> + Sync>(
    x: &[X],
    y: &[f64],
    init: Vec<Vec<f64>>,
    cfg: &ClusterConfig,
) -> Result<ClusterModel> {
    let dim = validate_rows(x)?;
    check_dim(x.len(), y.len())?;
    check_finite(y, "labels")?;
    let k = init.len();
    if k == 0 || k > x.len() {
        return Err(Error::contract(format!(
            "k = {k} must lie in 1..={}",
            x.len()
        )));
    }
    for c in &init {
        check_dim(dim, c.len())?;
        check_finite(c, "initial centroid")?;
    }
    if !(cfg.r >= 0.0 && cfg.r.is_finite()) {
        return Err(Error::contract("R must be a finite non-negative number"));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::contract("tol must be positive"));
    }

    let mut centroids = init;
    let d = distance_matrix(x, &centroids);
    let start = nearest_assignment(&d);
    let mut current = membership_from_assignment(&start, &d, y, cfg.r, k);
    let mut hard = Some(start);
    let mut trace = vec![objective_unchecked(x, y, &current.z, &centroids, cfg.r)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let prev = *trace.last().unwrap();

        let d = distance_matrix(x, &centroids);
        let candidate = membership_for(&d, y, cfg.r, k, cfg.solver, hard.as_deref())?;
        // Keep the previous membership unless the new one is strictly better.
        let current_cost = objective_unchecked(x, y, &current.z, &centroids, cfg.r);
        let candidate_cost = objective_unchecked(x, y, &candidate.z, &centroids, cfg.r);
        if candidate_cost < current_cost {
            hard = candidate
                .z
                .iter()
                .map(|row| row.iter().position(|&v| v == 1.0))
                .collect();
            current = candidate;
        }

        let updated = update_centroids(x, &current.z)?;
        let with_update = objective_unchecked(x, y, &current.z, &updated, cfg.r);
        let with_old = objective_unchecked(x, y, &current.z, &centroids, cfg.r);
        let value = if with_update <= with_old {
            centroids = updated;
            with_update
        } else {
            with_old
        };
        trace.push(value);

        if prev - value <= cfg.tol * prev.abs() || value == 0.0 {
            converged = true;
            break;
        }
    }

    let mut assignment: Vec<usize> = current.z.iter().map(|row| argmax_lowest(row)).collect();
    refill_empty_clusters(x, &mut assignment, k)?;
    let hard_z: Vec<Vec<f64>> = assignment.iter().map(|&a| one_hot(a, k)).collect();
    let final_centroids = update_centroids(x, &hard_z)?;
    let final_objective = objective_unchecked(x, y, &hard_z, &final_centroids, cfg.r);

    Ok(ClusterModel {
        k,
        r: cfg.r,
        centroids: final_centroids,
        assignment,
        objective_trace: trace,
        slacks: current.t.clone(),
        membership: current.z,
        final_objective,
        iterations,
        converged,
    })
}

/// Moves the row farthest from its own cluster mean into each empty cluster.
fn refill_empty_clusters<X: AsRef<[f64]>>(
    x: &[X],
    assignment: &mut [usize],
    k: usize,
) -> Result<()> {
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return Ok(());
        };
        let z: Vec<Vec<f64>> = assignment.iter().map(|&a| one_hot(a, k)).collect();
        let c = update_centroids(x, &z)?;
        let gaps: Vec<f64> = x
            .iter()
            .zip(assignment.iter())
            .map(|(xi, &a)| {
                if counts[a] > 1 {
                    sq_dist(xi.as_ref(), &c[a])
                } else {
                    -1.0
                }
            })
            .collect();
        let far = argmax_lowest(&gaps);
        if gaps[far] < 0.0 {
            return Err(Error::contract("cannot fill empty cluster: k exceeds rows"));
        }
        assignment[far] = empty;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_instance(seed: u64, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = RngSeed(seed).rng();
        let x = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let y = (0..n)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        (x, y)
    }

    /// Direct double loop over clusters then rows.
    fn oracle_objective(x: &[Vec<f64>], y: &[f64], z: &[Vec<f64>], c: &[Vec<f64>], r: f64) -> f64 {
        let mut total = 0.0;
        for j in 0..c.len() {
            let mut skew = 0.0;
            for i in 0..x.len() {
                let mut dd = 0.0;
                for m in 0..x[i].len() {
                    dd += (x[i][m] - c[j][m]).powi(2);
                }
                total += z[i][j] * dd;
                skew += z[i][j] * y[i];
            }
            total += r * skew.abs();
        }
        total
    }

    #[test]
    fn objective_singletons_is_r_times_n() {
        let (x, y) = random_instance(1, 5, 2);
        let z: Vec<Vec<f64>> = (0..5).map(|i| one_hot(i, 5)).collect();
        let v = objective(&x, &y, &z, &x, 2.5).unwrap();
        assert_eq!(v, 2.5 * 5.0);
    }

    #[test]
    fn objective_matches_double_loop() {
        let mut rng = RngSeed(5).rng();
        for seed in 0..10 {
            let (x, y) = random_instance(seed, 4, 2);
            let z: Vec<Vec<f64>> = (0..4)
                .map(|_| {
                    let a: f64 = rng.random();
                    vec![a, 1.0 - a]
                })
                .collect();
            let c = vec![vec![0.3, -0.2], vec![1.0, 2.0]];
            for r in [0.0, 1.7] {
                let got = objective(&x, &y, &z, &c, r).unwrap();
                let want = oracle_objective(&x, &y, &z, &c, r);
                assert!((got - want).abs() < 1e-12 * want.max(1.0));
            }
        }
    }

    #[test]
    fn objective_rejects_non_finite() {
        let x = vec![vec![f64::NAN]];
        assert!(objective(&x, &[1.0], &[vec![1.0]], &[vec![0.0]], 1.0).is_err());
    }

    #[test]
    fn membership_r0_is_nearest_with_low_index_ties() {
        let x = vec![vec![0.0], vec![1.0], vec![5.0]];
        let y = vec![1.0, -1.0, 1.0];
        // Row 1 sits exactly between the centroids.
        let c = vec![vec![0.0], vec![2.0]];
        let m = solve_membership(&x, &y, &c, 0.0).unwrap();
        assert_eq!(m.z, vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn membership_large_r_balances_clusters() {
        // Two +1 points and two -1 points, centroids equidistant from all.
        let x = vec![
            vec![0.0, 1.0],
            vec![0.0, -1.0],
            vec![0.5, 0.0],
            vec![-0.5, 0.0],
        ];
        let y = vec![1.0, 1.0, -1.0, -1.0];
        let c = vec![vec![2.0, 0.0], vec![-2.0, 0.0]];
        let m = solve_membership_with(&x, &y, &c, 1e3, MembershipSolver::Simplex).unwrap();

        // Exhaustive oracle over the 2^4 integral assignments.
        let mut best = f64::INFINITY;
        for mask in 0..16u32 {
            let z: Vec<Vec<f64>> = (0..4)
                .map(|i| one_hot(((mask >> i) & 1) as usize, 2))
                .collect();
            best = best.min(oracle_objective(&x, &y, &z, &c, 1e3));
        }
        assert!((m.objective - best).abs() < 1e-8);
        assert!(m.t.iter().all(|t| t.abs() < 1e-9));
        for j in 0..2 {
            let pos: f64 = (0..2).map(|i| m.z[i][j]).sum();
            let neg: f64 = (2..4).map(|i| m.z[i][j]).sum();
            assert!((pos - neg).abs() < 1e-9);
        }
    }

    #[test]
    fn membership_rows_sum_to_one() {
        let (x, y) = random_instance(9, 7, 2);
        let c = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![-1.0, 2.0]];
        let m = solve_membership_with(&x, &y, &c, 3.0, MembershipSolver::Simplex).unwrap();
        for row in &m.z {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
        }
    }

    #[test]
    fn icm_never_worse_than_start() {
        let (x, y) = random_instance(3, 40, 2);
        let c = init_centroids(&x, 4, RngSeed(1)).unwrap();
        let d = distance_matrix(&x, &c);
        let start = nearest_assignment(&d);
        let base = membership_from_assignment(&start, &d, &y, 2.0, 4).objective;
        let m = icm_membership(&d, &y, 2.0, 4, start);
        assert!(m.objective <= base);
    }

    #[test]
    fn update_mean_of_two_points() {
        let x = vec![vec![0.0, 0.0], vec![2.0, 2.0]];
        let z = vec![vec![1.0], vec![1.0]];
        assert_eq!(update_centroids(&x, &z).unwrap(), vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn update_singletons_is_identity() {
        let (x, _) = random_instance(2, 4, 3);
        let z: Vec<Vec<f64>> = (0..4).map(|i| one_hot(i, 4)).collect();
        assert_eq!(update_centroids(&x, &z).unwrap(), x);
    }

    #[test]
    fn update_fractional_matches_weighted_mean() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 3.0]];
        let z = vec![vec![0.25, 0.75], vec![0.5, 0.5], vec![1.0, 0.0]];
        let c = update_centroids(&x, &z).unwrap();
        for j in 0..2 {
            let w: f64 = z.iter().map(|r| r[j]).sum();
            for m in 0..2 {
                let s: f64 = (0..3).map(|i| z[i][j] * x[i][m]).sum();
                assert!((c[j][m] - s / w).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn update_reseeds_empty_column_at_farthest_row() {
        let x = vec![vec![0.0], vec![1.0], vec![10.0]];
        let z = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]];
        let c = update_centroids(&x, &z).unwrap();
        assert!((c[0][0] - 11.0 / 3.0).abs() < 1e-15);
        assert_eq!(c[1], vec![10.0]);
    }

    #[test]
    fn fit_two_points_exact() {
        let x = vec![vec![0.0], vec![10.0]];
        let y = vec![1.0, -1.0];
        let m = fit(&x, &y, &ClusterConfig::new(2, 0.0).with_seed(3)).unwrap();
        let mut cs: Vec<f64> = m.centroids.iter().map(|c| c[0]).collect();
        cs.sort_by(f64::total_cmp);
        assert_eq!(cs, vec![0.0, 10.0]);
        assert_eq!(m.final_objective, 0.0);
    }

    #[test]
    fn fit_single_cluster_is_global_mean() {
        let (x, y) = random_instance(4, 9, 2);
        let y: Vec<f64> = y.iter().take(8).copied().chain([1.0]).collect();
        let m = fit(&x, &y, &ClusterConfig::new(1, 2.0)).unwrap();
        for d in 0..2 {
            let mean = x.iter().map(|r| r[d]).sum::<f64>() / 9.0;
            assert!((m.centroids[0][d] - mean).abs() < 1e-12);
        }
        let skew: f64 = y.iter().sum();
        let cohesion: f64 = x.iter().map(|r| sq_dist(r, &m.centroids[0])).sum();
        assert!((m.final_objective - (cohesion + 2.0 * skew.abs())).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_k_above_n() {
        let x = vec![vec![0.0]];
        assert!(fit(&x, &[1.0], &ClusterConfig::new(2, 0.0)).is_err());
    }

    #[test]
    fn fit_keeps_k_live_clusters() {
        let x = vec![vec![0.0], vec![0.0], vec![0.0], vec![5.0]];
        let y = vec![1.0, -1.0, 1.0, -1.0];
        let m = fit(&x, &y, &ClusterConfig::new(3, 0.0).with_seed(1)).unwrap();
        assert!(m.counts().iter().all(|&c| c >= 1));
    }

    #[test]
    fn json_round_trip_of_interface_fields() {
        let (x, y) = random_instance(8, 12, 2);
        let m = fit(&x, &y, &ClusterConfig::new(3, 1.0)).unwrap();
        let text = m.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["k", "r", "centroids", "assignment", "objective_trace"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back = ClusterModel::from_json(&text).unwrap();
        assert_eq!(back.assignment, m.assignment);
        assert_eq!(back.centroids, m.centroids);
    }
}
