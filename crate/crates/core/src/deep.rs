//! Small feed-forward network with a softmax readout, trained by plain
//! backpropagation, plus the centroid approximation of the softmax.
//!
//! Hidden layers use `tanh`; the output layer produces logits `x_j` that the
//! softmax turns into class probabilities `P_j = exp(x_j) / sum_k exp(x_k)`.
//! The loss is the cross-entropy `-sum_j d_j log P_j`, whose gradient with
//! respect to the logits is simply `P - d`.

use std::io::Write;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clustering::{fit, ClusterConfig};
use crate::data::{Dataset, RngSeed};
use crate::error::{check_dim, check_finite, Error, Result};

/// Probabilities are clamped to this floor inside `log`.
pub const P_FLOOR: f64 = 1e-15;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::contract("softmax needs at least one logit"));
    }
    check_finite(logits, "logits")?;
    Ok(softmax_unchecked(logits))
}

fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-sum_j d_j ln p_j`, with `p_j` clamped at [`P_FLOOR`].
pub fn cross_entropy(target: &[f64], probs: &[f64]) -> Result<f64> {
    check_dim(target.len(), probs.len())?;
    check_finite(target, "target")?;
    check_finite(probs, "probabilities")?;
    if target.iter().chain(probs).any(|v| *v < 0.0) {
        return Err(Error::contract("probabilities must be non-negative"));
    }
    Ok(cross_entropy_unchecked(target, probs))
}

fn cross_entropy_unchecked(target: &[f64], probs: &[f64]) -> f64 {
    let loss: f64 = target
        .iter()
        .zip(probs)
        .filter(|(d, _)| **d > 0.0)
        .map(|(d, p)| -d * p.max(P_FLOOR).ln())
        .sum();
    loss.max(0.0)
}

/// `d CE(d, softmax(x)) / dx = softmax(x) - d`.
pub fn softmax_cross_entropy_grad(logits: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check_dim(logits.len(), target.len())?;
    let p = softmax(logits)?;
    Ok(p.iter().zip(target).map(|(p, d)| p - d).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub sizes: Vec<usize>,
    pub layers: Vec<Layer>,
    /// Class id of each output unit.
    pub classes: Vec<i64>,
}

struct Forward {
    /// Activations per layer, input first.
    activations: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl MlpModel {
    /// Weights drawn from `N(0, 1) / sqrt(fan_in)`, biases zero.
    pub fn new(sizes: &[usize], classes: Vec<i64>, seed: RngSeed) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::contract(
                "need at least input and output layers, all non-empty",
            ));
        }
        check_dim(*sizes.last().unwrap(), classes.len())?;
        let mut rng = seed.rng();
        let layers = sizes
            .windows(2)
            .map(|w| {
                let scale = 1.0 / (w[0] as f64).sqrt();
                Layer {
                    weights: (0..w[0] * w[1])
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            scale * z
                        })
                        .collect(),
                    bias: vec![0.0; w[1]],
                }
            })
            .collect();
        Ok(MlpModel {
            sizes: sizes.to_vec(),
            layers,
            classes,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_dim(self.param_count(), params.len())?;
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().unwrap();
            }
        }
        Ok(())
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let mut activations = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let input = activations.last().unwrap();
            let n_in = input.len();
            let out: Vec<f64> = layer
                .bias
                .iter()
                .enumerate()
                .map(|(o, b)| {
                    let row = &layer.weights[o * n_in..(o + 1) * n_in];
                    let z = b + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
                    if li == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            activations.push(out);
        }
        let probs = softmax_unchecked(activations.last().unwrap());
        Forward { activations, probs }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.sizes[0], x.len())?;
        Ok(self.forward(x).activations.pop().unwrap())
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.sizes[0], x.len())?;
        Ok(self.forward(x).probs)
    }

    pub fn predict(&self, x: &[f64]) -> Result<i64> {
        let p = self.predict_proba(x)?;
        let mut best = 0;
        for (i, &v) in p.iter().enumerate().skip(1) {
            if v > p[best] {
                best = i;
            }
        }
        Ok(self.classes[best])
    }

    fn target(&self, label: i64) -> Result<Vec<f64>> {
        let idx = self
            .classes
            .iter()
            .position(|&c| c == label)
            .ok_or_else(|| Error::contract(format!("label {label} has no output unit")))?;
        let mut d = vec![0.0; self.classes.len()];
        d[idx] = 1.0;
        Ok(d)
    }

    /// Mean cross-entropy over `samples` and its gradient, flattened like [`params`](Self::params).
    pub fn loss_and_grad(&self, dataset: &Dataset, indices: &[usize]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.sizes[0], dataset.dim())?;
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer {
                weights: vec![0.0; l.weights.len()],
                bias: vec![0.0; l.bias.len()],
            })
            .collect();
        let mut loss = 0.0;
        let scale = 1.0 / indices.len() as f64;
        for &i in indices {
            let s = &dataset.samples()[i];
            let d = self.target(s.label)?;
            let fwd = self.forward(&s.features);
            loss += cross_entropy_unchecked(&d, &fwd.probs);
            let mut delta: Vec<f64> = fwd
                .probs
                .iter()
                .zip(&d)
                .map(|(p, t)| (p - t) * scale)
                .collect();
            for li in (0..self.layers.len()).rev() {
                let input = &fwd.activations[li];
                let n_in = input.len();
                let g = &mut grads[li];
                for (o, &dl) in delta.iter().enumerate() {
                    g.bias[o] += dl;
                    for (w, a) in g.weights[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *w += dl * a;
                    }
                }
                if li > 0 {
                    let layer = &self.layers[li];
                    delta = (0..n_in)
                        .map(|k| {
                            let back: f64 = delta
                                .iter()
                                .enumerate()
                                .map(|(o, dl)| dl * layer.weights[o * n_in + k])
                                .sum();
                            back * (1.0 - input[k] * input[k])
                        })
                        .collect();
                }
            }
        }
        let flat = grads
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect();
        Ok((loss * scale, flat))
    }

    pub fn loss(&self, dataset: &Dataset) -> Result<f64> {
        let all: Vec<usize> = (0..dataset.len()).collect();
        let mut total = 0.0;
        for &i in &all {
            let s = &dataset.samples()[i];
            total +=
                cross_entropy_unchecked(&self.target(s.label)?, &self.forward(&s.features).probs);
        }
        Ok(total / all.len() as f64)
    }

    pub fn accuracy(&self, dataset: &Dataset) -> Result<f64> {
        let mut correct = 0usize;
        for s in dataset.samples() {
            if self.predict(&s.features)? == s.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / dataset.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MlpModel = serde_json::from_str(text)?;
        if m.layers.len() + 1 != m.sizes.len() {
            return Err(Error::contract("layer count disagrees with sizes"));
        }
        for (l, w) in m.layers.iter().zip(m.sizes.windows(2)) {
            check_dim(w[0] * w[1], l.weights.len())?;
            check_dim(w[1], l.bias.len())?;
        }
        check_dim(*m.sizes.last().unwrap(), m.classes.len())?;
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    /// Mini-batch size; 0 means full batch.
    pub batch_size: usize,
    pub seed: RngSeed,
}

impl MlpConfig {
    pub fn new(hidden: Vec<usize>, lr: f64, epochs: usize) -> Self {
        MlpConfig {
            hidden,
            lr,
            epochs,
            batch_size: 0,
            seed: RngSeed(0),
        }
    }

    pub fn with_seed(mut self, seed: impl Into<RngSeed>) -> Self {
        self.seed = seed.into();
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Writes the training curve as `epoch,loss,accuracy`.
pub fn write_curve_csv(curve: &[EpochStats], out: &mut impl Write) -> Result<()> {
    writeln!(out, "epoch,loss,accuracy")?;
    for e in curve {
        writeln!(out, "{},{:?},{:?}", e.epoch, e.loss, e.accuracy)?;
    }
    Ok(())
}

/// Mini-batch gradient descent on mean cross-entropy.
pub fn train_mlp(dataset: &Dataset, cfg: &MlpConfig) -> Result<(MlpModel, Vec<EpochStats>)> {
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(Error::contract(
            "learning rate must be finite and non-negative",
        ));
    }
    let mut sizes = vec![dataset.dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(dataset.class_ids().len());
    let mut rng = cfg.seed.rng();
    let mut model = MlpModel::new(&sizes, dataset.class_ids().to_vec(), cfg.seed.derive(0))?;
    let batch = if cfg.batch_size == 0 {
        dataset.len()
    } else {
        cfg.batch_size.min(dataset.len())
    };
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        if batch < dataset.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let (loss, grad) = model.loss_and_grad(dataset, chunk)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            if cfg.lr != 0.0 {
                let params: Vec<f64> = model
                    .params()
                    .iter()
                    .zip(&grad)
                    .map(|(p, g)| p - cfg.lr * g)
                    .collect();
                model.set_params(&params)?;
            }
        }
        let loss = model.loss(dataset)?;
        if !loss.is_finite() || model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        curve.push(EpochStats {
            epoch,
            loss,
            accuracy: model.accuracy(dataset)?,
        });
    }
    Ok((model, curve))
}

/// Relative error with a floor on the denominator, so gradients below the
/// floor are compared in absolute terms.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRADCHECK_FLOOR)
}

pub const GRADCHECK_FLOOR: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_relative_error: f64,
}

/// Backprop gradient against central differences with step `h`.
pub fn gradcheck(model: &MlpModel, dataset: &Dataset, h: f64) -> Result<GradCheck> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    let (_, analytic) = model.loss_and_grad(dataset, &all)?;
    let base = model.params();
    let mut probe = model.clone();
    let mut numeric = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params(&p)?;
        let up = probe.loss(dataset)?;
        p[i] = base[i] - h;
        probe.set_params(&p)?;
        let down = probe.loss(dataset)?;
        numeric.push((up - down) / (2.0 * h));
    }
    let max_relative_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| relative_error(*a, *n))
        .fold(0.0, f64::max);
    Ok(GradCheck {
        analytic,
        numeric,
        max_relative_error,
    })
}

/// Cluster centres in logit space with their sizes and the example map.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitCentroids {
    pub centroids: Vec<Vec<f64>>,
    pub multiplicities: Vec<usize>,
    pub assignment: Vec<usize>,
}

impl LogitCentroids {
    /// Plain k-means (no skew penalty) on per-example logit vectors.
    pub fn from_logits(logits: &[Vec<f64>], k: usize, seed: RngSeed) -> Result<Self> {
        let labels = vec![1.0; logits.len()];
        let model = fit(logits, &labels, &ClusterConfig::new(k, 0.0).with_seed(seed))?;
        Ok(LogitCentroids {
            multiplicities: model.counts(),
            centroids: model.centroids,
            assignment: model.assignment,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CentroidSoftmaxReport {
    /// Softmax of each example's centroid.
    pub approx: Vec<Vec<f64>>,
    /// Total-variation distance to the exact softmax, per example.
    pub distances: Vec<f64>,
    pub max_tv: f64,
    pub mean_tv: f64,
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Substitutes each example's centroid logits into the softmax and reports
/// how far the result lands from the exact class probabilities.
pub fn centroid_softmax(
    logits: &[Vec<f64>],
    cents: &LogitCentroids,
) -> Result<CentroidSoftmaxReport> {
    if cents.centroids.is_empty() {
        return Err(Error::contract("no logit centroids"));
    }
    if logits.is_empty() {
        return Err(Error::contract("no logits"));
    }
    check_dim(logits.len(), cents.assignment.len())?;
    check_dim(cents.centroids.len(), cents.multiplicities.len())?;
    let centroid_probs = cents
        .centroids
        .iter()
        .map(|c| softmax(c))
        .collect::<Result<Vec<_>>>()?;
    let mut approx = Vec::with_capacity(logits.len());
    let mut distances = Vec::with_capacity(logits.len());
    for (x, &a) in logits.iter().zip(&cents.assignment) {
        let exact = softmax(x)?;
        let q = centroid_probs
            .get(a)
            .ok_or_else(|| Error::contract("assignment refers to a missing centroid"))?;
        check_dim(exact.len(), q.len())?;
        distances.push(total_variation(&exact, q));
        approx.push(q.clone());
    }
    let max_tv = distances.iter().copied().fold(0.0, f64::max);
    let mean_tv = distances.iter().sum::<f64>() / distances.len() as f64;
    Ok(CentroidSoftmaxReport {
        approx,
        distances,
        max_tv,
        mean_tv,
    })
}
