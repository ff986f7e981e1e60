//! Kernel classifiers and their semiparametric (cluster-compressed) forms.
//!
//! The crate trains nonparametric kernel models (an SVM solved by SMO and a
//! Gaussian kernel-density classifier) and compresses them by replacing
//! training vectors with cluster centroids. Partitions come from a k-means
//! variant that penalises class imbalance inside each cluster, or from an
//! LBG vector quantizer. Every Gaussian kernel application can be counted,
//! which makes the compression measurable.
//!
//! ```
//! use semiparam::data::{gen_blobs, RngSeed};
//! use semiparam::kernel::{KernelCounter, KernelSpec};
//! use semiparam::svm::{train_smo, SmoConfig};
//!
//! let data = gen_blobs(60, 2, 2, 4.0, RngSeed(1)).unwrap();
//! let counter = KernelCounter::new();
//! let model = train_smo(&data, KernelSpec::new(1.0).unwrap(), &SmoConfig::default().with_c(10.0), &counter).unwrap();
//! assert!(model.accuracy(&data, &counter).unwrap() > 0.9);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod bench;
pub mod clustering;
pub mod codebook;
pub mod data;
pub mod deep;
mod error;
pub mod grn;
pub mod kernel;
pub mod lp;
pub mod svm;

#[cfg(doctest)]
mod book;

pub use error::{Error, Result};
