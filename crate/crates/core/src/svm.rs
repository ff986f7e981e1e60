//! Binary Gaussian-kernel SVM trained by sequential minimal optimization,
//! and its semiparametric compression.
//!
//! The dual is
//!
//! ```text
//! maximize  W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j k(x_i, x_j)
//! s.t.      0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! with `C = +inf` (the default) giving the hard-margin problem. The
//! compressed variant keeps the same `l` variables but replaces every Gram
//! entry `k(x_i, x_j)` by `k(c_a(i), c_a(j))`, where `a(i)` is the cluster of
//! sample `i`. Only `k(k+1)/2` distinct kernel values are ever computed, and
//! the trained expansion collapses to one coefficient per centroid,
//! `beta_j = sum_{a(i) = j} y_i a_i`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::data::{Dataset, RngSeed};
use crate::error::{check_dim, Error, Result};
use crate::kernel::{KernelCounter, KernelSpec};

/// Curvature below which a pair direction counts as flat.
const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    /// Box constraint; `f64::INFINITY` for hard margin.
    pub box_c: f64,
    /// KKT tolerance on `y_i f(x_i)`.
    pub tol: f64,
    /// Pair updates allowed, in units of the training-set size.
    pub max_passes: usize,
    /// Seeds the order of the first-choice scan.
    pub seed: RngSeed,
    /// Record `W(a)` after every pair update.
    pub record_trace: bool,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            box_c: f64::INFINITY,
            tol: 1e-3,
            max_passes: 1000,
            seed: RngSeed(0),
            record_trace: false,
        }
    }
}

impl SmoConfig {
    pub fn with_c(mut self, box_c: f64) -> Self {
        self.box_c = box_c;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: impl Into<RngSeed>) -> Self {
        self.seed = seed.into();
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.box_c > 0.0) {
            return Err(Error::contract("box constraint C must be positive"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::contract("tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportVector {
    pub x: Vec<f64>,
    pub y: i64,
    pub alpha: f64,
    /// Row of the training set this vector came from.
    pub index: usize,
}

/// Outcome of margin evaluation; `sign` is `+1` when `margin == 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub sign: i64,
    pub margin: f64,
}

impl Decision {
    fn from_margin(margin: f64) -> Self {
        Decision {
            sign: if margin >= 0.0 { 1 } else { -1 },
            margin,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub box_c: f64,
    pub bias: f64,
    /// One entry per training row.
    pub alphas: Vec<f64>,
    /// Rows with a positive coefficient.
    pub support: Vec<SupportVector>,
    /// Largest KKT violation measured by the solver's stopping rule.
    pub max_violation: f64,
    pub iterations: usize,
    /// `W(a)` after each accepted pair update, if requested.
    pub objective_trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SvmJson {
    sigma: f64,
    /// `null` for the hard-margin problem.
    c: Option<f64>,
    b: f64,
    /// Training rows the support indices refer to.
    #[serde(default)]
    train_len: Option<usize>,
    support: Vec<SupportVector>,
}

impl SvmModel {
    pub fn train_len(&self) -> usize {
        self.alphas.len()
    }

    /// `sum_s y_s a_s k(x, x_s) + b` over the support set.
    pub fn decision(&self, x: &[f64], counter: &KernelCounter) -> Result<Decision> {
        if let Some(sv) = self.support.first() {
            check_dim(sv.x.len(), x.len())?;
        }
        let sum: f64 = self
            .support
            .iter()
            .map(|sv| sv.y as f64 * sv.alpha * self.kernel.eval(x, &sv.x, counter))
            .sum();
        Ok(Decision::from_margin(sum + self.bias))
    }

    pub fn accuracy(&self, dataset: &Dataset, counter: &KernelCounter) -> Result<f64> {
        let mut correct = 0usize;
        for s in dataset.samples() {
            if self.decision(&s.features, counter)?.sign == s.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / dataset.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SvmJson {
            sigma: self.kernel.sigma(),
            c: self.box_c.is_finite().then_some(self.box_c),
            b: self.bias,
            train_len: Some(self.alphas.len()),
            support: self.support.clone(),
        })?)
    }

    /// Loads a model. Only the support set is stored, so `alphas` is rebuilt
    /// with zeros for every row not in it. Without `train_len` the length is
    /// inferred from the largest support index.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SvmJson = serde_json::from_str(text)?;
        let needed = raw.support.iter().map(|s| s.index + 1).max().unwrap_or(0);
        let len = raw.train_len.unwrap_or(needed);
        if len < needed {
            return Err(Error::contract("support index beyond train_len"));
        }
        let mut alphas = vec![0.0; len];
        for sv in &raw.support {
            if sv.y != 1 && sv.y != -1 {
                return Err(Error::contract("support labels must be -1 or +1"));
            }
            alphas[sv.index] = sv.alpha;
        }
        Ok(SvmModel {
            kernel: KernelSpec::new(raw.sigma)?,
            box_c: raw.c.unwrap_or(f64::INFINITY),
            bias: raw.b,
            alphas,
            support: raw.support,
            max_violation: f64::NAN,
            iterations: 0,
            objective_trace: Vec::new(),
        })
    }
}

/// Compressed expansion: one coefficient per centroid.
#[derive(Clone, Debug, PartialEq)]
pub struct SemiSvmModel {
    pub kernel: KernelSpec,
    pub bias: f64,
    pub centroids: Vec<Vec<f64>>,
    pub betas: Vec<f64>,
    /// Per-row coefficients the compression was built from.
    pub alphas: Vec<f64>,
    /// Distinct Gram entries computed during training (0 when built from a full model).
    pub gram_entries: usize,
    /// Identifies the partition the model was built from.
    pub provenance: String,
    pub max_violation: f64,
}

#[derive(Serialize, Deserialize)]
struct SemiSvmJson {
    sigma: f64,
    b: f64,
    centroids: Vec<Vec<f64>>,
    betas: Vec<f64>,
}

impl SemiSvmModel {
    /// `sum_j beta_j k(x, c_j) + b`; exactly `k` kernel evaluations.
    pub fn decision(&self, x: &[f64], counter: &KernelCounter) -> Result<Decision> {
        if let Some(c) = self.centroids.first() {
            check_dim(c.len(), x.len())?;
        }
        let sum: f64 = self
            .centroids
            .iter()
            .zip(&self.betas)
            .map(|(c, b)| b * self.kernel.eval(x, c, counter))
            .sum();
        Ok(Decision::from_margin(sum + self.bias))
    }

    pub fn accuracy(&self, dataset: &Dataset, counter: &KernelCounter) -> Result<f64> {
        let mut correct = 0usize;
        for s in dataset.samples() {
            if self.decision(&s.features, counter)?.sign == s.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / dataset.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SemiSvmJson {
            sigma: self.kernel.sigma(),
            b: self.bias,
            centroids: self.centroids.clone(),
            betas: self.betas.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SemiSvmJson = serde_json::from_str(text)?;
        check_dim(raw.centroids.len(), raw.betas.len())?;
        Ok(SemiSvmModel {
            kernel: KernelSpec::new(raw.sigma)?,
            bias: raw.b,
            centroids: raw.centroids,
            betas: raw.betas,
            alphas: Vec::new(),
            gram_entries: 0,
            provenance: String::from("json"),
            max_violation: f64::NAN,
        })
    }
}

/// Symmetric kernel matrix accessor used by the solver.
pub trait Gram {
    fn len(&self) -> usize;
    fn get(&self, i: usize, j: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dense `l x l` Gram matrix; building it costs `l(l+1)/2` evaluations.
pub struct DenseGram {
    n: usize,
    values: Vec<f64>,
}

impl DenseGram {
    pub fn new<X: AsRef<[f64]>>(rows: &[X], kernel: &KernelSpec, counter: &KernelCounter) -> Self {
        let n = rows.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(rows[i].as_ref(), rows[j].as_ref(), counter);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        DenseGram { n, values }
    }
}

impl Gram for DenseGram {
    fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Gram matrix over cluster centroids, indexed through the sample-to-cluster map.
pub struct CompressedGram {
    k: usize,
    table: Vec<f64>,
    assignment: Vec<usize>,
}

impl CompressedGram {
    /// Computes the `k(k+1)/2` distinct centroid-pair kernel values once.
    pub fn new(
        centroids: &[Vec<f64>],
        assignment: Vec<usize>,
        kernel: &KernelSpec,
        counter: &KernelCounter,
    ) -> Result<Self> {
        let k = centroids.len();
        if assignment.iter().any(|&a| a >= k) {
            return Err(Error::contract("assignment refers to a missing centroid"));
        }
        let mut table = vec![0.0; k * k];
        for a in 0..k {
            for b in a..k {
                let v = kernel.eval(&centroids[a], &centroids[b], counter);
                table[a * k + b] = v;
                table[b * k + a] = v;
            }
        }
        Ok(CompressedGram {
            k,
            table,
            assignment,
        })
    }

    pub fn distinct_entries(&self) -> usize {
        self.k * (self.k + 1) / 2
    }
}

impl Gram for CompressedGram {
    fn len(&self) -> usize {
        self.assignment.len()
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.table[self.assignment[i] * self.k + self.assignment[j]]
    }
}

/// Raw solver output.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// `max_{I_up} v - min_{I_low} v` at exit.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

struct Solver<'a, G: Gram> {
    gram: &'a G,
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    /// Gradient of `1/2 a^T Q a - e^T a`, `Q_ij = y_i y_j K_ij`.
    grad: Vec<f64>,
}

impl<G: Gram> Solver<'_, G> {
    fn in_up(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] < self.c) || (self.y[t] < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low(&self, t: usize) -> bool {
        (self.y[t] < 0.0 && self.alpha[t] < self.c) || (self.y[t] > 0.0 && self.alpha[t] > 0.0)
    }

    /// `-y_t G_t`, which equals `b - E_t` for the error `E_t = f(x_t) - y_t`.
    fn v(&self, t: usize) -> f64 {
        -self.y[t] * self.grad[t]
    }

    /// (argmax over I_up of v, argmin over I_low of v), lowest index on ties.
    fn extremes(&self) -> (Option<usize>, Option<usize>) {
        let mut up: Option<usize> = None;
        let mut low: Option<usize> = None;
        for t in 0..self.alpha.len() {
            let v = self.v(t);
            if self.in_up(t) && up.is_none_or(|u| v > self.v(u)) {
                up = Some(t);
            }
            if self.in_low(t) && low.is_none_or(|l| v < self.v(l)) {
                low = Some(t);
            }
        }
        (up, low)
    }

    fn dual_objective(&self) -> f64 {
        // W = -f = sum a - 1/2 sum a (G + 1)
        self.alpha
            .iter()
            .zip(&self.grad)
            .map(|(a, g)| a - 0.5 * a * (g + 1.0))
            .sum()
    }

    /// Analytic two-variable step on the pair `i in I_up`, `j in I_low`.
    fn update_pair(&mut self, i: usize, j: usize) -> Result<()> {
        let (kii, kjj, kij) = (
            self.gram.get(i, i),
            self.gram.get(j, j),
            self.gram.get(i, j),
        );
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let c = self.c;
        let mut quad = kii + kjj - 2.0 * kij;
        if quad <= TAU {
            if c.is_infinite() {
                return Err(Error::Unbounded);
            }
            quad = TAU;
        }
        let (mut ai, mut aj);
        if self.y[i] != self.y[j] {
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = old_i - old_j;
            ai = old_i + delta;
            aj = old_j + delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if c.is_finite() {
                if diff > 0.0 {
                    if ai > c {
                        ai = c;
                        aj = c - diff;
                    }
                } else if aj > c {
                    aj = c;
                    ai = c + diff;
                }
            }
        } else {
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = old_i + old_j;
            ai = old_i - delta;
            aj = old_j + delta;
            if c.is_finite() && sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if c.is_finite() && sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        let (yi, yj) = (self.y[i], self.y[j]);
        for t in 0..self.grad.len() {
            let yt = self.y[t];
            self.grad[t] += yt * (yi * self.gram.get(t, i) * di + yj * self.gram.get(t, j) * dj);
        }
        Ok(())
    }

    /// Mean of `v` over free vectors, or the midpoint of the violation bracket.
    fn bias(&self) -> f64 {
        let free: Vec<f64> = (0..self.alpha.len())
            .filter(|&t| self.alpha[t] > 0.0 && self.alpha[t] < self.c)
            .map(|t| self.v(t))
            .collect();
        if free.is_empty() {
            let (up, low) = self.extremes();
            match (up, low) {
                (Some(u), Some(l)) => 0.5 * (self.v(u) + self.v(l)),
                (Some(u), None) => self.v(u),
                (None, Some(l)) => self.v(l),
                (None, None) => 0.0,
            }
        } else {
            free.iter().sum::<f64>() / free.len() as f64
        }
    }
}

/// Runs SMO on an arbitrary Gram matrix.
///
/// The first index of each pair is the first KKT violator in a seeded
/// cyclic scan; its partner is the opposite-side vector that maximizes
/// `|E_1 - E_2|`. Iteration stops once the largest violating gap is at most
/// `tol`, at which point every KKT condition holds within `tol`.
pub fn smo<G: Gram>(gram: &G, y: &[f64], cfg: &SmoConfig) -> Result<SmoSolution> {
    cfg.validate()?;
    let n = gram.len();
    check_dim(n, y.len())?;
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::contract("SMO requires labels in {-1, +1}"));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::contract("SMO requires both classes"));
    }
    let mut solver = Solver {
        gram,
        y,
        c: cfg.box_c,
        alpha: vec![0.0; n],
        grad: vec![-1.0; n],
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut cfg.seed.rng());

    let max_iter = cfg.max_passes.saturating_mul(n.max(1));
    let mut trace = Vec::new();
    let mut cursor = 0usize;
    let mut iterations = 0usize;
    let mut gap;
    loop {
        let (up, low) = solver.extremes();
        let (Some(up), Some(low)) = (up, low) else {
            gap = 0.0;
            break;
        };
        let (m_up, m_low) = (solver.v(up), solver.v(low));
        gap = m_up - m_low;
        if gap <= cfg.tol || iterations >= max_iter {
            break;
        }
        let mut pair = None;
        for step in 0..n {
            let t = order[(cursor + step) % n];
            let v = solver.v(t);
            if solver.in_up(t) && v > m_low + cfg.tol {
                pair = Some((t, low));
            } else if solver.in_low(t) && v < m_up - cfg.tol {
                pair = Some((up, t));
            }
            if pair.is_some() {
                cursor = (cursor + step + 1) % n;
                break;
            }
        }
        let (i, j) = pair.expect("a violating pair exists while the gap exceeds tol");
        solver.update_pair(i, j)?;
        iterations += 1;
        if cfg.record_trace {
            trace.push(solver.dual_objective());
        }
    }
    Ok(SmoSolution {
        bias: solver.bias(),
        alphas: solver.alpha,
        gap,
        iterations,
        converged: gap <= cfg.tol,
        objective_trace: trace,
    })
}

/// `sum a_i - 1/2 sum_ij a_i a_j y_i y_j k(x_i, x_j)`.
pub fn dual_objective(alphas: &[f64], dataset: &Dataset, kernel: &KernelSpec) -> Result<f64> {
    check_dim(dataset.len(), alphas.len())?;
    if alphas.iter().any(|&a| !(a >= 0.0)) {
        return Err(Error::contract("dual coefficients must be non-negative"));
    }
    let rows = dataset.rows();
    let y = dataset.signed_labels();
    let mut quad = 0.0;
    for i in 0..rows.len() {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..rows.len() {
            if alphas[j] == 0.0 {
                continue;
            }
            quad += alphas[i] * alphas[j] * y[i] * y[j] * kernel.eval_unchecked(rows[i], rows[j]);
        }
    }
    Ok(alphas.iter().sum::<f64>() - 0.5 * quad)
}

fn model_from_solution(
    dataset: &Dataset,
    kernel: KernelSpec,
    cfg: &SmoConfig,
    sol: SmoSolution,
) -> SvmModel {
    let support = dataset
        .samples()
        .iter()
        .zip(&sol.alphas)
        .enumerate()
        .filter(|(_, (_, &a))| a > 0.0)
        .map(|(index, (s, &alpha))| SupportVector {
            x: s.features.clone(),
            y: s.label,
            alpha,
            index,
        })
        .collect();
    SvmModel {
        kernel,
        box_c: cfg.box_c,
        bias: sol.bias,
        alphas: sol.alphas,
        support,
        max_violation: sol.gap.max(0.0),
        iterations: sol.iterations,
        objective_trace: sol.objective_trace,
    }
}

/// Trains a full SVM. The dense Gram build is charged to `counter`.
pub fn train_smo(
    dataset: &Dataset,
    kernel: KernelSpec,
    cfg: &SmoConfig,
    counter: &KernelCounter,
) -> Result<SvmModel> {
    dataset.require_binary()?;
    cfg.validate()?;
    let gram = DenseGram::new(&dataset.rows(), &kernel, counter);
    let sol = smo(&gram, &dataset.signed_labels(), cfg)?;
    let converged = sol.converged;
    let model = model_from_solution(dataset, kernel, cfg, sol);
    if !converged {
        let max_violation = model.max_violation;
        return Err(Error::SvmNotConverged {
            model: Box::new(model),
            max_violation,
        });
    }
    Ok(model)
}

fn aggregate(alphas: &[f64], y: &[f64], assignment: &[usize], k: usize) -> Vec<f64> {
    let mut betas = vec![0.0; k];
    for ((&a, &yi), &j) in alphas.iter().zip(y).zip(assignment) {
        betas[j] += yi * a;
    }
    betas
}

fn provenance(clusters: &ClusterModel) -> String {
    format!("k={},r={}", clusters.k, clusters.r)
}

/// Replaces every training vector in a trained expansion by its centroid.
pub fn semiparameterize(model: &SvmModel, clusters: &ClusterModel) -> Result<SemiSvmModel> {
    check_dim(model.train_len(), clusters.assignment.len())?;
    let mut betas = vec![0.0; clusters.k];
    for sv in &model.support {
        betas[clusters.assignment[sv.index]] += sv.y as f64 * sv.alpha;
    }
    Ok(SemiSvmModel {
        kernel: model.kernel,
        bias: model.bias,
        centroids: clusters.centroids.clone(),
        betas,
        alphas: model.alphas.clone(),
        gram_entries: 0,
        provenance: provenance(clusters),
        max_violation: model.max_violation,
    })
}

/// Trains on the compressed Gram matrix and aggregates to per-centroid betas.
pub fn train_semi(
    dataset: &Dataset,
    clusters: &ClusterModel,
    kernel: KernelSpec,
    cfg: &SmoConfig,
    counter: &KernelCounter,
) -> Result<SemiSvmModel> {
    dataset.require_binary()?;
    cfg.validate()?;
    check_dim(dataset.len(), clusters.assignment.len())?;
    let gram = CompressedGram::new(
        &clusters.centroids,
        clusters.assignment.clone(),
        &kernel,
        counter,
    )?;
    let y = dataset.signed_labels();
    let sol = smo(&gram, &y, cfg)?;
    let betas = aggregate(&sol.alphas, &y, &clusters.assignment, clusters.k);
    let semi = SemiSvmModel {
        kernel,
        bias: sol.bias,
        centroids: clusters.centroids.clone(),
        betas,
        gram_entries: gram.distinct_entries(),
        provenance: provenance(clusters),
        max_violation: sol.gap.max(0.0),
        alphas: sol.alphas,
    };
    if !sol.converged {
        // Surface the best-so-far expansion through the full-model error shape.
        let full = model_from_solution(
            dataset,
            kernel,
            cfg,
            SmoSolution {
                alphas: semi.alphas.clone(),
                bias: semi.bias,
                gap: semi.max_violation,
                iterations: sol.iterations,
                converged: false,
                objective_trace: Vec::new(),
            },
        );
        return Err(Error::SvmNotConverged {
            model: Box::new(full),
            max_violation: semi.max_violation,
        });
    }
    Ok(semi)
}

/// Largest KKT violation of a trained model, measured on `y_i f(x_i)`.
pub fn kkt_violation(model: &SvmModel, dataset: &Dataset) -> Result<f64> {
    check_dim(model.train_len(), dataset.len())?;
    let counter = KernelCounter::new();
    let mut worst: f64 = 0.0;
    for (s, &a) in dataset.samples().iter().zip(&model.alphas) {
        let m = s.label as f64 * model.decision(&s.features, &counter)?.margin;
        let v = if a == 0.0 {
            (1.0 - m).max(0.0)
        } else if a < model.box_c {
            (m - 1.0).abs()
        } else {
            (m - 1.0).max(0.0)
        };
        worst = worst.max(v);
    }
    Ok(worst)
}
