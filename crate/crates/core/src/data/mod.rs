//! Labelled data, prevalence vectors and prevalence-controlled sampling.

mod collection;
pub mod io;
mod prevalence;
pub mod synth;

pub use collection::{Dataset, FeatureVec, LabelledCollection};
pub use io::{load_dense_csv, load_sparse, parse_dense_csv, parse_sparse, CsvOptions, LabelColumn, SparseOptions};
pub use prevalence::PrevalenceVector;
pub use synth::synth_gaussian;
