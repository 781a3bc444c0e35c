//! Floor and building classification from Wi-Fi RSS fingerprints with a
//! fixed random 1-D convolutional front end and an extreme learning machine
//! head, plus a 1-NN baseline and a benchmark harness.

pub mod dataset;
pub mod elm;
pub mod error;
pub mod eval;
pub mod featurizer;
pub mod knn;
pub mod linalg;
pub mod pipeline;
pub mod preprocess;
pub mod synthetic;

pub use dataset::{load_csv, registry_lookup, DatasetDescriptor, Label, Manifest, RadioMap};
pub use elm::{sweep_hidden, ElmModel, SweepResult};
pub use error::{Error, Result};
pub use eval::{hit_rate, normalize, run_benchmark, BenchmarkConfig, EvalReport, Field};
pub use featurizer::{featurize, init_featurizer, FeaturizerSpec};
pub use knn::KnnIndex;
pub use linalg::DenseMatrix;
pub use pipeline::{sweep, Approach, TrainConfig, TrainedModel};
pub use preprocess::{NormMode, PreprocessParams};
