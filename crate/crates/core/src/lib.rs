//! Classical simulator for quantum semi-supervised learning.
//!
//! Quantum subroutines are modelled as noisy oracles with an attached cost
//! ledger, so the per-step complexity of the quantum learners can be counted
//! and their outputs compared against exact classical baselines.

pub mod cli;
pub mod cost;
pub mod data;
pub mod error;
pub mod estimators;
pub mod learners;
pub mod qram;
pub mod rng;

pub use cost::{fit_scaling, Backend, CostKind, CostLedger, LedgerSnapshot, Meter, ScalingReport};
pub use data::{
    generate_blobs, inner_product, load_dataset, save_dataset, save_report, squared_euclidean, BlobSpec, Blobs,
    Dataset, FeatureVector, Label, LabelColumn,
};
pub use error::{Error, Result};
pub use estimators::{
    centroid_distance_map, estimate_distance_sq, estimate_distances_batch, estimate_inner_product,
    estimate_matrix_product, EstimationParams, NoisyEstimate, OracleMode,
};
pub use qram::QramStore;
