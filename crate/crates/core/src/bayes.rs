//! Bayes-optimal ensemble over a finite space of decision stumps.
//!
//! The ensemble predicts
//!
//! ```text
//! argmax_c  sum_h  P(c | h) P(T | h) P(h)
//! ```
//!
//! where stumps are deterministic, so `P(c | h)` is an indicator, and the
//! likelihood of the training set is an i.i.d. label-noise model with flip
//! probability `noise_eps`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};

/// Predicts `+1` when `polarity * (x[feature] - threshold) > 0`, else `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: i8,
}

impl Stump {
    pub fn predict(&self, x: &[f64]) -> i64 {
        let above = x[self.feature] > self.threshold;
        if above == (self.polarity > 0) {
            1
        } else {
            -1
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisSpace {
    hypotheses: Vec<Stump>,
    priors: Vec<f64>,
}

impl HypothesisSpace {
    /// Priors are normalized to sum to one.
    pub fn new(hypotheses: Vec<Stump>, priors: Vec<f64>) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::contract("hypothesis space is empty"));
        }
        check_dim(hypotheses.len(), priors.len())?;
        if priors.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::contract("priors must be finite and non-negative"));
        }
        if hypotheses
            .iter()
            .any(|h| h.polarity != 1 && h.polarity != -1)
        {
            return Err(Error::contract("stump polarity must be +1 or -1"));
        }
        let total: f64 = priors.iter().sum();
        if !(total > 0.0) {
            return Err(Error::contract("priors must not all be zero"));
        }
        let priors = priors.into_iter().map(|p| p / total).collect();
        Ok(HypothesisSpace { hypotheses, priors })
    }

    pub fn uniform(hypotheses: Vec<Stump>) -> Result<Self> {
        let n = hypotheses.len();
        HypothesisSpace::new(hypotheses, vec![1.0; n])
    }

    pub fn hypotheses(&self) -> &[Stump] {
        &self.hypotheses
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }
}

/// `P(T|h) P(h)` per hypothesis and its total.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorTable {
    pub weights: Vec<f64>,
    pub normalizer: f64,
}

impl PosteriorTable {
    pub fn normalized(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w / self.normalizer).collect()
    }
}

fn check_noise(noise_eps: f64) -> Result<()> {
    if noise_eps > 0.0 && noise_eps < 0.5 {
        Ok(())
    } else {
        Err(Error::contract("noise_eps must lie in (0, 0.5)"))
    }
}

fn check_features(dataset: &Dataset, h: &Stump) -> Result<()> {
    if h.feature >= dataset.dim() {
        return Err(Error::DimensionMismatch {
            expected: dataset.dim(),
            got: h.feature + 1,
        });
    }
    Ok(())
}

/// `prod_i (1 - eps)` over correctly labeled points times `eps` over the rest.
///
/// The product is taken directly, so it underflows to zero for training
/// sets of a few thousand points.
pub fn likelihood(h: &Stump, dataset: &Dataset, noise_eps: f64) -> Result<f64> {
    check_noise(noise_eps)?;
    check_features(dataset, h)?;
    Ok(dataset
        .samples()
        .iter()
        .map(|s| {
            if h.predict(&s.features) == s.label {
                1.0 - noise_eps
            } else {
                noise_eps
            }
        })
        .product())
}

pub fn posterior(
    space: &HypothesisSpace,
    dataset: &Dataset,
    noise_eps: f64,
) -> Result<PosteriorTable> {
    let weights = space
        .hypotheses
        .iter()
        .zip(&space.priors)
        .map(|(h, p)| likelihood(h, dataset, noise_eps).map(|l| l * p))
        .collect::<Result<Vec<f64>>>()?;
    let normalizer = weights.iter().sum();
    Ok(PosteriorTable {
        weights,
        normalizer,
    })
}

/// Weighted vote with precomputed posterior weights.
pub fn vote(
    space: &HypothesisSpace,
    table: &PosteriorTable,
    x: &[f64],
    classes: &[i64],
) -> Result<i64> {
    if classes.is_empty() {
        return Err(Error::contract("class list is empty"));
    }
    check_dim(space.len(), table.weights.len())?;
    let mut sorted = classes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut scores = vec![0.0; sorted.len()];
    for (h, w) in space.hypotheses.iter().zip(&table.weights) {
        if h.feature >= x.len() {
            return Err(Error::DimensionMismatch {
                expected: h.feature + 1,
                got: x.len(),
            });
        }
        let predicted = h.predict(x);
        if let Ok(ci) = sorted.binary_search(&predicted) {
            scores[ci] += w;
        }
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(sorted[best])
}

/// Bayes-optimal class at `x`; ties go to the lowest class id.
pub fn bayes_predict(
    space: &HypothesisSpace,
    dataset: &Dataset,
    x: &[f64],
    classes: &[i64],
    noise_eps: f64,
) -> Result<i64> {
    let table = posterior(space, dataset, noise_eps)?;
    vote(space, &table, x, classes)
}

/// Stumps at midpoints between sorted distinct values of every feature,
/// both polarities, uniform priors.
///
/// When a feature has more midpoints than `thresholds_per_feature`, an
/// evenly spaced subset is kept. Constant features contribute nothing.
pub fn enumerate_stumps(
    dataset: &Dataset,
    thresholds_per_feature: usize,
) -> Result<HypothesisSpace> {
    if thresholds_per_feature == 0 {
        return Err(Error::contract("need at least one threshold per feature"));
    }
    let mut stumps = Vec::new();
    for feature in 0..dataset.dim() {
        let mut values: Vec<f64> = dataset
            .samples()
            .iter()
            .map(|s| s.features[feature])
            .collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mids: Vec<f64> = values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let chosen: Vec<f64> = if mids.len() <= thresholds_per_feature {
            mids
        } else if thresholds_per_feature == 1 {
            vec![mids[mids.len() / 2]]
        } else {
            (0..thresholds_per_feature)
                .map(|i| {
                    let pos = i * (mids.len() - 1) / (thresholds_per_feature - 1);
                    mids[pos]
                })
                .collect()
        };
        for threshold in chosen {
            for polarity in [1, -1] {
                stumps.push(Stump {
                    feature,
                    threshold,
                    polarity,
                });
            }
        }
    }
    HypothesisSpace::uniform(stumps)
}
