//! Gaussian kernel and the kernel-evaluation counter.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, Dataset};
use crate::error::{check_dim, Error, Result};

/// Smoothing parameter of the Gaussian kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    sigma: f64,
}

impl KernelSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(KernelSpec { sigma })
        } else {
            Err(Error::contract(format!(
                "sigma must be positive, got {sigma}"
            )))
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Median pairwise distance over the first 1000 samples.
    pub fn median_heuristic(dataset: &Dataset) -> Result<Self> {
        let rows = dataset.rows();
        let m = rows.len().min(1000);
        let mut dists = Vec::with_capacity(m * (m.saturating_sub(1)) / 2);
        for i in 0..m {
            for j in (i + 1)..m {
                dists.push(sq_dist(rows[i], rows[j]).sqrt());
            }
        }
        dists.retain(|d| *d > 0.0);
        if dists.is_empty() {
            return KernelSpec::new(1.0);
        }
        dists.sort_by(|a, b| a.total_cmp(b));
        let mid = dists.len() / 2;
        let median = if dists.len() % 2 == 0 {
            0.5 * (dists[mid - 1] + dists[mid])
        } else {
            dists[mid]
        };
        KernelSpec::new(median)
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        (-sq_dist(x, y) / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// Counted kernel application.
    #[inline]
    pub(crate) fn eval(&self, x: &[f64], y: &[f64], counter: &KernelCounter) -> f64 {
        counter.bump(1);
        self.eval_unchecked(x, y)
    }
}

/// `exp(-||x - y||^2 / (2 sigma^2))`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], spec: &KernelSpec) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    Ok(spec.eval_unchecked(x, y))
}

/// Counts Gaussian kernel applications.
///
/// Every routine that evaluates the kernel takes one of these by reference;
/// counting never touches the numeric path. The counter is `Sync`, so a
/// single instance may be shared by concurrent predictions.
#[derive(Debug, Default)]
pub struct KernelCounter {
    count: AtomicU64,
}

impl KernelCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn reset(&self) -> u64 {
        self.count.swap(0, Ordering::Relaxed)
    }

    #[inline]
    pub(crate) fn bump(&self, n: u64) {
        self.count.fetch_add(n, Ordering::Relaxed);
    }

    /// Runs `f` and returns its result with the number of evaluations it made.
    pub fn measure<T>(&self, f: impl FnOnce() -> T) -> (T, u64) {
        let before = self.get();
        let out = f();
        (out, self.get() - before)
    }
}
