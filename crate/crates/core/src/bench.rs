//! Full-versus-semiparametric comparison harness.
//!
//! A [`BenchConfig`] names a dataset, a held-out split and a model grid.
//! [`run_bench`] trains every grid point, scores it on both splits and counts
//! kernel evaluations. Everything except wall time is a pure function of the
//! config, so two runs produce byte-identical reports.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{fit, ClusterConfig, ClusterModel};
use crate::codebook::{train_lbg, LbgConfig};
use crate::data::{gen_blobs, load_csv, Dataset, RngSeed};
use crate::error::{Error, Result};
use crate::grn::{fit_grn, GrnModel, Partition};
use crate::kernel::{KernelCounter, KernelSpec};
use crate::svm::{semiparameterize, train_semi, train_smo, SmoConfig, SvmModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    Blobs {
        n: usize,
        d: usize,
        classes: usize,
        separation: f64,
    },
    Csv {
        path: PathBuf,
    },
}

/// Missing fields in JSON take their [`Default`] values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub dataset: DatasetSpec,
    pub train_fraction: f64,
    pub test_fraction: f64,
    /// `None` picks the median heuristic on the training split.
    pub sigma: Option<f64>,
    pub box_c: f64,
    pub k: Vec<usize>,
    pub r: Vec<f64>,
    pub codebook_n: Vec<usize>,
    pub seed: RngSeed,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            dataset: DatasetSpec::Blobs {
                n: 300,
                d: 2,
                classes: 2,
                separation: 3.0,
            },
            train_fraction: 0.7,
            test_fraction: 0.3,
            sigma: None,
            box_c: 10.0,
            k: vec![8, 32],
            r: vec![0.0, 1.0],
            codebook_n: vec![8],
            seed: RngSeed(0),
        }
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: BenchConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.train_fraction, self.test_fraction);
        if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0 && (a + b - 1.0).abs() < 1e-9) {
            return Err(Error::contract(
                "split fractions must lie in (0, 1) and sum to 1",
            ));
        }
        if let Some(s) = self.sigma {
            KernelSpec::new(s)?;
        }
        if !(self.box_c > 0.0) {
            return Err(Error::contract("box_c must be positive"));
        }
        if self.k.contains(&0) || self.codebook_n.contains(&0) {
            return Err(Error::contract(
                "cluster and codebook sizes must be positive",
            ));
        }
        if self.r.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::contract("R values must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    FullSvm,
    FullGrn,
    /// SMO on the compressed Gram matrix.
    SemiSvm,
    /// Full SMO solution with vectors replaced by centroids afterwards.
    SemiparameterizedSvm,
    SemiGrnClusters,
    SemiGrnCodebook,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::FullSvm => "full_svm",
            ModelKind::FullGrn => "full_grn",
            ModelKind::SemiSvm => "semi_svm",
            ModelKind::SemiparameterizedSvm => "semiparameterized_svm",
            ModelKind::SemiGrnClusters => "semi_grn_clusters",
            ModelKind::SemiGrnCodebook => "semi_grn_codebook",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub index: usize,
    pub kind: ModelKind,
    pub k: Option<usize>,
    pub r: Option<f64>,
    pub codebook_n: Option<usize>,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub kernel_evals_per_prediction: Option<u64>,
    pub train_kernel_evals: Option<u64>,
    pub gram_entries: Option<usize>,
    /// Stored expansion vectors (support vectors, centroids or class centres).
    pub expansion_size: Option<usize>,
    pub error: Option<String>,
    /// Milliseconds spent training; never part of the written report.
    #[serde(skip)]
    pub train_ms: f64,
}

impl ReportRow {
    fn new(index: usize, kind: ModelKind) -> Self {
        ReportRow {
            index,
            kind,
            k: None,
            r: None,
            codebook_n: None,
            train_accuracy: None,
            test_accuracy: None,
            kernel_evals_per_prediction: None,
            train_kernel_evals: None,
            gram_entries: None,
            expansion_size: None,
            error: None,
            train_ms: 0.0,
        }
    }

    fn fail(mut self, err: &Error) -> Self {
        self.error = Some(err.code().to_string());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: BenchConfig,
    pub sigma: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub rows: Vec<ReportRow>,
}

const CSV_HEADER: &str = "index,kind,k,r,codebook_n,train_accuracy,test_accuracy,\
kernel_evals_per_prediction,train_kernel_evals,gram_entries,expansion_size,error";

fn cell<T: std::fmt::Debug>(v: &Option<T>) -> String {
    v.as_ref().map(|v| format!("{v:?}")).unwrap_or_default()
}

impl Report {
    pub fn row(&self, kind: ModelKind) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.kind == kind)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.index,
                r.kind.as_str(),
                cell(&r.k),
                cell(&r.r),
                cell(&r.codebook_n),
                cell(&r.train_accuracy),
                cell(&r.test_accuracy),
                cell(&r.kernel_evals_per_prediction),
                cell(&r.train_kernel_evals),
                cell(&r.gram_entries),
                cell(&r.expansion_size),
                r.error.as_deref().unwrap_or(""),
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_timings(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "index,kind,train_ms")?;
        for r in &self.rows {
            writeln!(out, "{},{},{:.3}", r.index, r.kind.as_str(), r.train_ms)?;
        }
        Ok(())
    }

    /// Writes `<stem>.csv`, `<stem>.json` and `<stem>.timings.csv`.
    pub fn write_files(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        let with = |ext: &str| {
            let mut p = stem.as_os_str().to_owned();
            p.push(ext);
            PathBuf::from(p)
        };
        let mut csv = Vec::new();
        self.write_csv(&mut csv)?;
        std::fs::write(with(".csv"), csv)?;
        std::fs::write(with(".json"), self.to_json()? + "\n")?;
        let mut t = Vec::new();
        self.write_timings(&mut t)?;
        std::fs::write(with(".timings.csv"), t)?;
        Ok(())
    }
}

fn load_dataset(spec: &DatasetSpec, seed: RngSeed) -> Result<Dataset> {
    match spec {
        DatasetSpec::Blobs {
            n,
            d,
            classes,
            separation,
        } => gen_blobs(*n, *d, *classes, *separation, seed),
        DatasetSpec::Csv { path } => load_csv(path),
    }
}

enum Job {
    Grn,
    Clusters { k: usize, r: f64 },
    Codebook { n: usize },
}

struct Ctx<'a> {
    train: &'a Dataset,
    test: &'a Dataset,
    kernel: KernelSpec,
    smo: SmoConfig,
    full_svm: &'a Result<SvmModel>,
}

/// Evaluations per prediction over a whole split; the count must divide evenly.
fn per_prediction(total: u64, n: usize) -> Option<u64> {
    let n = n as u64;
    (n > 0 && total.is_multiple_of(n)).then(|| total / n)
}

fn score_svm(
    mut row: ReportRow,
    ctx: &Ctx<'_>,
    decide: impl Fn(&[f64], &KernelCounter) -> Result<i64>,
) -> ReportRow {
    let eval = |d: &Dataset, counter: &KernelCounter| -> Result<f64> {
        let mut correct = 0usize;
        for s in d.samples() {
            if decide(&s.features, counter)? == s.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / d.len() as f64)
    };
    let scratch = KernelCounter::new();
    let counter = KernelCounter::new();
    match (eval(ctx.train, &scratch), eval(ctx.test, &counter)) {
        (Ok(tr), Ok(te)) => {
            row.train_accuracy = Some(tr);
            row.test_accuracy = Some(te);
            row.kernel_evals_per_prediction = per_prediction(counter.get(), ctx.test.len());
            row
        }
        (Err(e), _) | (_, Err(e)) => row.fail(&e),
    }
}

fn grn_row(mut row: ReportRow, ctx: &Ctx<'_>, model: Result<GrnModel>) -> ReportRow {
    match model {
        Ok(m) => {
            row.expansion_size = Some(m.expansion_size());
            score_svm(row, ctx, |x, c| m.predict(x, c))
        }
        Err(e) => row.fail(&e),
    }
}

fn full_svm_row(index: usize, ctx: &Ctx<'_>, train_kernel_evals: u64, ms: f64) -> ReportRow {
    let mut row = ReportRow::new(index, ModelKind::FullSvm);
    row.train_ms = ms;
    match ctx.full_svm {
        Ok(m) => {
            row.train_kernel_evals = Some(train_kernel_evals);
            row.expansion_size = Some(m.support.len());
            score_svm(row, ctx, |x, c| m.decision(x, c).map(|d| d.sign))
        }
        Err(e) => row.fail(e),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

fn cluster_rows(first: usize, k: usize, r: f64, seed: RngSeed, ctx: &Ctx<'_>) -> Vec<ReportRow> {
    let kinds = [
        ModelKind::SemiSvm,
        ModelKind::SemiparameterizedSvm,
        ModelKind::SemiGrnClusters,
    ];
    let mut rows: Vec<ReportRow> = kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let mut row = ReportRow::new(first + i, kind);
            row.k = Some(k);
            row.r = Some(r);
            row
        })
        .collect();
    let cfg = ClusterConfig::new(k, r).with_seed(seed);
    let (clusters, cluster_ms) = timed(|| -> Result<ClusterModel> {
        if k > ctx.train.len() {
            return Err(Error::contract("k exceeds the training size"));
        }
        fit(&ctx.train.rows(), &ctx.train.signed_labels(), &cfg)
    });
    let clusters = match clusters {
        Ok(c) => c,
        Err(e) => return rows.into_iter().map(|row| row.fail(&e)).collect(),
    };
    let mut it = rows.drain(..);
    let mut out = Vec::with_capacity(3);

    let mut row = it.next().unwrap();
    let counter = KernelCounter::new();
    let (semi, ms) = timed(|| train_semi(ctx.train, &clusters, ctx.kernel, &ctx.smo, &counter));
    row.train_ms = cluster_ms + ms;
    out.push(match semi {
        Ok(m) => {
            row.train_kernel_evals = Some(counter.get());
            row.gram_entries = Some(m.gram_entries);
            row.expansion_size = Some(m.centroids.len());
            score_svm(row, ctx, |x, c| m.decision(x, c).map(|d| d.sign))
        }
        Err(e) => row.fail(&e),
    });

    let mut row = it.next().unwrap();
    row.train_ms = cluster_ms;
    out.push(match ctx.full_svm {
        Ok(full) => match semiparameterize(full, &clusters) {
            Ok(m) => {
                row.expansion_size = Some(m.centroids.len());
                score_svm(row, ctx, |x, c| m.decision(x, c).map(|d| d.sign))
            }
            Err(e) => row.fail(&e),
        },
        Err(e) => row.fail(e),
    });

    let mut row = it.next().unwrap();
    let (grn, ms) = timed(|| fit_grn(ctx.train, ctx.kernel, Some(Partition::Clusters(&clusters))));
    row.train_ms = cluster_ms + ms;
    out.push(grn_row(row, ctx, grn));
    out
}

/// Trains and scores every grid point. Sub-model failures become error rows.
///
/// Row layout: full SVM, full GRN, then three rows per `(k, R)` pair and one
/// per codebook size. Each clustering or codebook draws its seed from the
/// master seed and the index of its first row.
pub fn run_bench(config: &BenchConfig) -> Result<Report> {
    config.validate()?;
    let data = load_dataset(&config.dataset, config.seed.derive(u64::MAX))?;
    let (train, test) = data.split(config.train_fraction, config.seed.derive(u64::MAX - 1))?;
    let kernel = match config.sigma {
        Some(s) => KernelSpec::new(s)?,
        None => KernelSpec::median_heuristic(&train)?,
    };
    let smo = SmoConfig::default()
        .with_c(config.box_c)
        .with_seed(config.seed.derive(0));

    let train_counter = KernelCounter::new();
    let (full_svm, full_ms) = timed(|| train_smo(&train, kernel, &smo, &train_counter));
    let ctx = Ctx {
        train: &train,
        test: &test,
        kernel,
        smo,
        full_svm: &full_svm,
    };

    let mut jobs = vec![(1, Job::Grn)];
    let mut next = 2;
    for &k in &config.k {
        for &r in &config.r {
            jobs.push((next, Job::Clusters { k, r }));
            next += 3;
        }
    }
    for &n in &config.codebook_n {
        jobs.push((next, Job::Codebook { n }));
        next += 1;
    }

    let mut rows: Vec<ReportRow> = jobs
        .par_iter()
        .flat_map_iter(|(first, job)| {
            let seed = config.seed.derive(*first as u64);
            match job {
                Job::Grn => {
                    let (m, ms) = timed(|| fit_grn(&train, kernel, None));
                    let mut row = ReportRow::new(*first, ModelKind::FullGrn);
                    row.train_ms = ms;
                    vec![grn_row(row, &ctx, m)]
                }
                Job::Clusters { k, r } => cluster_rows(*first, *k, *r, seed, &ctx),
                Job::Codebook { n } => {
                    let mut row = ReportRow::new(*first, ModelKind::SemiGrnCodebook);
                    row.codebook_n = Some(*n);
                    let (m, ms) = timed(|| {
                        let cb = train_lbg(&train.rows(), &LbgConfig::new(*n).with_seed(seed))?;
                        fit_grn(&train, kernel, Some(Partition::Codebook(&cb)))
                    });
                    row.train_ms = ms;
                    vec![grn_row(row, &ctx, m)]
                }
            }
        })
        .collect();
    rows.push(full_svm_row(0, &ctx, train_counter.get(), full_ms));
    rows.sort_by_key(|r| r.index);

    Ok(Report {
        config: config.clone(),
        sigma: kernel.sigma(),
        train_size: train.len(),
        test_size: test.len(),
        rows,
    })
}
