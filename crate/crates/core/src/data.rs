//! Labeled datasets, seeded generators, CSV I/O and the Euclidean distance.
//!
//! Every generator is a pure function of its [`RngSeed`]; the CSV writer uses
//! the shortest decimal that parses back to the same `f64`, so
//! `load_csv(save_csv(d)) == d` holds bit for bit.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

/// Seed for every stochastic routine in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed for stream `index` (splitmix64 finalizer).
    pub fn derive(self, index: u64) -> RngSeed {
        let mut z = self
            .0
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        RngSeed(seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: i64,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: i64) -> Self {
        Sample { features, label }
    }
}

/// A non-empty, dimension-consistent list of labeled samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
    class_ids: Vec<i64>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::contract("dataset must contain at least one sample"))?;
        let dim = first.features.len();
        if dim == 0 {
            return Err(Error::contract("dataset dimension must be positive"));
        }
        for s in &samples {
            check_dim(dim, s.features.len())?;
            check_finite(&s.features, "sample features")?;
        }
        let class_ids = samples
            .iter()
            .map(|s| s.label)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Dataset {
            samples,
            dim,
            class_ids,
        })
    }

    /// Builds a dataset from parallel feature rows and labels.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<i64>) -> Result<Self> {
        check_dim(rows.len(), labels.len())?;
        Dataset::new(
            rows.into_iter()
                .zip(labels)
                .map(|(f, l)| Sample::new(f, l))
                .collect(),
        )
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_ids(&self) -> &[i64] {
        &self.class_ids
    }

    pub fn rows(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.features.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<i64> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Labels as `f64`, the form the skew penalty and the SVM dual consume.
    pub fn signed_labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.label as f64).collect()
    }

    pub fn is_binary(&self) -> bool {
        self.class_ids == [-1, 1]
    }

    /// Rejects anything whose class set is not exactly {-1, +1}.
    pub fn require_binary(&self) -> Result<()> {
        if self.is_binary() {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "binary model requires labels {{-1, +1}}, found {:?}",
                self.class_ids
            )))
        }
    }

    /// Subset in the given index order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(indices.iter().map(|&i| self.samples[i].clone()).collect())
    }

    /// Seeded shuffle followed by a train/test cut at `train_fraction`.
    pub fn split(&self, train_fraction: f64, seed: RngSeed) -> Result<(Dataset, Dataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::contract("train fraction must lie in (0, 1)"));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut seed.rng());
        let cut = ((self.len() as f64) * train_fraction).round() as usize;
        if cut == 0 || cut == self.len() {
            return Err(Error::contract("split leaves an empty partition"));
        }
        Ok((self.subset(&order[..cut])?, self.subset(&order[cut..])?))
    }
}

/// Squared Euclidean distance without shape checks; callers guarantee equal lengths.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

pub fn squared_distance(x: &[f64], c: &[f64]) -> Result<f64> {
    check_dim(x.len(), c.len())?;
    check_finite(x, "x")?;
    check_finite(c, "c")?;
    Ok(sq_dist(x, c))
}

/// `sqrt(sum_j (x_j - c_j)^2)`.
pub fn euclidean_distance(x: &[f64], c: &[f64]) -> Result<f64> {
    squared_distance(x, c).map(f64::sqrt)
}

/// Isotropic unit-variance Gaussian blobs, one per class.
///
/// Class means sit on the first axis, `separation` apart from their
/// neighbours and centred on the origin. Samples are assigned to classes
/// round-robin. Two classes are labeled -1/+1, more classes 0..classes.
pub fn gen_blobs(
    n: usize,
    d: usize,
    classes: usize,
    separation: f64,
    seed: RngSeed,
) -> Result<Dataset> {
    if d == 0 {
        return Err(Error::contract("dimension must be positive"));
    }
    if classes < 2 || n < classes {
        return Err(Error::contract("need n >= classes >= 2"));
    }
    if !separation.is_finite() {
        return Err(Error::contract("separation must be finite"));
    }
    let mut rng = seed.rng();
    let centre = (classes as f64 - 1.0) / 2.0;
    let samples = (0..n)
        .map(|i| {
            let class = i % classes;
            let offset = (class as f64 - centre) * separation;
            let features = (0..d)
                .map(|j| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if j == 0 {
                        z + offset
                    } else {
                        z
                    }
                })
                .collect();
            let label = if classes == 2 {
                if class == 0 {
                    -1
                } else {
                    1
                }
            } else {
                class as i64
            };
            Sample::new(features, label)
        })
        .collect();
    Dataset::new(samples)
}

/// `m` points drawn uniformly from the unit cube `[0, 1)^d`.
pub fn uniform_points(m: usize, d: usize, seed: RngSeed) -> Vec<Vec<f64>> {
    let mut rng = seed.rng();
    (0..m)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect()
}

/// The four XOR points with -1/+1 labels.
pub fn xor_dataset() -> Dataset {
    Dataset::from_rows(
        vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ],
        vec![-1, 1, 1, -1],
    )
    .expect("static dataset is well formed")
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_csv(dataset, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_csv(dataset: &Dataset, out: &mut impl Write) -> Result<()> {
    let header: Vec<String> = (0..dataset.dim())
        .map(|j| format!("f{j}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for s in dataset.samples() {
        for v in &s.features {
            // Debug formatting of f64 is the shortest round-trip decimal.
            write!(out, "{v:?},")?;
        }
        writeln!(out, "{}", s.label)?;
    }
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    read_csv(File::open(path)?)
}

pub fn read_csv(input: impl std::io::Read) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    let width = header.len();
    if width < 2 {
        return Err(Error::Parse {
            row: 0,
            column: 0,
            message: "header needs at least one feature column and a label column".into(),
        });
    }
    for (j, name) in header.iter().enumerate() {
        let expected = if j + 1 == width {
            "label".to_string()
        } else {
            format!("f{j}")
        };
        if name != expected {
            return Err(Error::Parse {
                row: 0,
                column: j,
                message: format!("expected header `{expected}`, found `{name}`"),
            });
        }
    }

    let mut samples = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record?;
        if record.len() != width {
            return Err(Error::Parse {
                row,
                column: record.len().min(width),
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let mut features = Vec::with_capacity(width - 1);
        for (j, field) in record.iter().take(width - 1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                column: j,
                message: format!("non-numeric feature `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: j,
                    message: format!("non-finite feature `{field}`"),
                });
            }
            features.push(v);
        }
        let field = &record[width - 1];
        let label: i64 = field.trim().parse().map_err(|_| Error::Parse {
            row,
            column: width - 1,
            message: format!("label `{field}` is not an integer"),
        })?;
        samples.push(Sample::new(features, label));
    }
    if samples.is_empty() {
        return Err(Error::Parse {
            row: 1,
            column: 0,
            message: "no data rows".into(),
        });
    }
    Dataset::new(samples)
}
