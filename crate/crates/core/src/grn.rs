//! General regression network classifier.
//!
//! The full model scores class `i` at `x` by summing a Gaussian bump over
//! every training vector of that class. The semiparametric model replaces
//! each group of nearby same-class vectors by its centre `c` and member
//! count `Z`, so the group contributes `Z * exp(-||x - c||^2 / (2 sigma^2))`
//! instead of `Z` separate terms.

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::codebook::Codebook;
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::kernel::{KernelCounter, KernelSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrnMode {
    Full,
    Semiparametric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrnClass {
    pub id: i64,
    pub centroids: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrnModel {
    mode: GrnMode,
    kernel: KernelSpec,
    classes: Vec<GrnClass>,
}

#[derive(Serialize, Deserialize)]
struct GrnJson {
    mode: GrnMode,
    sigma: f64,
    classes: Vec<GrnClass>,
}

/// Source of a hard partition of the training set.
#[derive(Clone, Copy, Debug)]
pub enum Partition<'a> {
    Clusters(&'a ClusterModel),
    Codebook(&'a Codebook),
}

impl Partition<'_> {
    pub fn len(&self) -> usize {
        match self {
            Partition::Clusters(c) => c.k,
            Partition::Codebook(cb) => cb.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cluster index of every training row.
    pub fn assignment(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        match self {
            Partition::Clusters(c) => {
                check_dim(dataset.len(), c.assignment.len())?;
                Ok(c.assignment.clone())
            }
            Partition::Codebook(cb) => cb.encode(&dataset.rows()),
        }
    }
}

impl GrnModel {
    pub fn mode(&self) -> GrnMode {
        self.mode
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn classes(&self) -> &[GrnClass] {
        &self.classes
    }

    pub fn class_ids(&self) -> Vec<i64> {
        self.classes.iter().map(|c| c.id).collect()
    }

    /// Kernel terms evaluated per prediction.
    pub fn expansion_size(&self) -> usize {
        self.classes.iter().map(|c| c.centroids.len()).sum()
    }

    fn dim(&self) -> usize {
        self.classes
            .iter()
            .find_map(|c| c.centroids.first())
            .map_or(0, Vec::len)
    }

    fn scores(&self, x: &[f64], counter: &KernelCounter) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self
            .classes
            .iter()
            .map(|class| {
                class
                    .centroids
                    .iter()
                    .zip(&class.counts)
                    .map(|(c, &z)| z as f64 * self.kernel.eval(x, c, counter))
                    .sum()
            })
            .collect())
    }

    /// Class with the highest score; ties go to the lowest class id.
    pub fn predict(&self, x: &[f64], counter: &KernelCounter) -> Result<i64> {
        let scores = self.scores(x, counter)?;
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        Ok(self.classes[best].id)
    }

    pub fn accuracy(&self, dataset: &Dataset, counter: &KernelCounter) -> Result<f64> {
        let mut correct = 0usize;
        for s in dataset.samples() {
            if self.predict(&s.features, counter)? == s.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / dataset.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GrnJson {
            mode: self.mode,
            sigma: self.kernel.sigma(),
            classes: self.classes.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: GrnJson = serde_json::from_str(text)?;
        let model = GrnModel {
            mode: raw.mode,
            kernel: KernelSpec::new(raw.sigma)?,
            classes: raw.classes,
        };
        let dim = model.dim();
        for class in &model.classes {
            check_dim(class.centroids.len(), class.counts.len())?;
            if class.counts.contains(&0) {
                return Err(Error::contract("GRN counts must be at least one"));
            }
            for c in &class.centroids {
                check_dim(dim, c.len())?;
            }
        }
        Ok(model)
    }
}

/// Per-class sums of kernel values over every stored training vector.
pub fn grn_scores_full(model: &GrnModel, x: &[f64], counter: &KernelCounter) -> Result<Vec<f64>> {
    if model.mode != GrnMode::Full {
        return Err(Error::Mode { expected: "full" });
    }
    model.scores(x, counter)
}

/// Per-class sums of `count * kernel(x, centroid)`.
pub fn grn_scores_semi(model: &GrnModel, x: &[f64], counter: &KernelCounter) -> Result<Vec<f64>> {
    if model.mode != GrnMode::Semiparametric {
        return Err(Error::Mode {
            expected: "semiparametric",
        });
    }
    model.scores(x, counter)
}

/// Builds a full model, or with a partition, a semiparametric one whose
/// centres are the per-class means inside each cluster.
pub fn fit_grn(
    dataset: &Dataset,
    kernel: KernelSpec,
    partition: Option<Partition<'_>>,
) -> Result<GrnModel> {
    let Some(partition) = partition else {
        let classes = dataset
            .class_ids()
            .iter()
            .map(|&id| {
                let centroids: Vec<Vec<f64>> = dataset
                    .samples()
                    .iter()
                    .filter(|s| s.label == id)
                    .map(|s| s.features.clone())
                    .collect();
                GrnClass {
                    id,
                    counts: vec![1; centroids.len()],
                    centroids,
                }
            })
            .collect();
        return Ok(GrnModel {
            mode: GrnMode::Full,
            kernel,
            classes,
        });
    };

    let assignment = partition.assignment(dataset)?;
    let k = partition.len();
    let dim = dataset.dim();
    let classes = dataset
        .class_ids()
        .iter()
        .map(|&id| {
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (s, &a) in dataset.samples().iter().zip(&assignment) {
                if s.label == id {
                    counts[a] += 1;
                    for (acc, v) in sums[a].iter_mut().zip(&s.features) {
                        *acc += v;
                    }
                }
            }
            let (centroids, counts): (Vec<Vec<f64>>, Vec<usize>) = sums
                .into_iter()
                .zip(counts)
                .filter(|(_, c)| *c > 0)
                .map(|(s, c)| (s.into_iter().map(|v| v / c as f64).collect(), c))
                .unzip();
            GrnClass {
                id,
                centroids,
                counts,
            }
        })
        .collect();
    Ok(GrnModel {
        mode: GrnMode::Semiparametric,
        kernel,
        classes,
    })
}
