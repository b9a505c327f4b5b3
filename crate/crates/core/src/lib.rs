//! Radiology report labeling without the standard library.
//!
//! This crate holds everything that is pure computation: the 14-condition
//! label schema, corpus preparation, a BERT-style encoder with 14
//! classification heads and hand-written gradients, Adam, the rad / auto /
//! hybrid training strategies, backtranslation bookkeeping and the
//! weighted-F1 / bootstrap evaluation suite. File formats, the CLI and
//! thread-parallel execution live in the `reportlabel` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod augment;
pub mod corpus;
pub mod eval;
pub mod model;
pub mod optim;
pub mod schema;
pub mod synthetic;
pub mod training;

pub use corpus::{Dataset, LabeledReport, Provenance, Report, Split};
pub use model::{EncoderAdapter, FreezeMode, HeadInputMode, MultiHeadClassifier};
pub use schema::{Condition, LabelClass, LabelVector};
