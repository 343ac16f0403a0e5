//! Supervised prevalence estimation ("quantification").
//!
//! A quantifier is trained on labelled data and, given an unlabelled sample,
//! returns one vector of category prevalence values for the whole sample
//! instead of one label per item. This crate bundles:
//!
//! - [`data`]: labelled collections, prevalence-controlled sampling, splits,
//!   file loaders and a synthetic generator;
//! - [`classify`]: a deterministic multinomial logistic regression learner;
//! - [`aggregative`]: CC, ACC, PCC, PACC, the threshold variants
//!   (T50, X, MAX, MS, MS2), SLD/EMQ and HDy;
//! - [`meta`]: ensembles and the one-vs-all wrapper;
//! - [`eval`]: error measures, the natural/artificial prevalence protocols,
//!   grid combinatorics, reports and paired significance tests;
//! - [`modelsel`]: quantification-oriented grid search;
//! - [`plots`]: diagonal, error-by-shift and bias-box plot data with SVG output;
//! - [`cli`]: the `qk` command line front end.

pub mod aggregative;
pub mod classify;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod math;
pub mod meta;
pub mod modelsel;
pub mod plots;
pub mod quantifier;

pub use data::{Dataset, FeatureVec, LabelledCollection, PrevalenceVector};
pub use error::{Error, Result};
pub use quantifier::{Aggregative, ParamMap, ParamValue, Quantifier};
