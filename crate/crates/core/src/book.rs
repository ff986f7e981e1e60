// Book chapters compiled as doctests so their snippets stay in sync with the API.

#[doc = include_str!("../../../book/src/intro.md")]
mod intro {}
#[doc = include_str!("../../../book/src/data.md")]
mod data {}
#[doc = include_str!("../../../book/src/clustering.md")]
mod clustering {}
#[doc = include_str!("../../../book/src/codebook.md")]
mod codebook {}
#[doc = include_str!("../../../book/src/grn.md")]
mod grn {}
#[doc = include_str!("../../../book/src/svm.md")]
mod svm {}
#[doc = include_str!("../../../book/src/bayes.md")]
mod bayes {}
#[doc = include_str!("../../../book/src/deep.md")]
mod deep {}
#[doc = include_str!("../../../book/src/bench.md")]
mod bench {}
