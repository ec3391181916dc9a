//! Desk-scale federated-learning simulation.
//!
//! [`data`] builds the corpus and splits it (long-tail transform, held-out
//! evaluation set, Dirichlet client shards), [`model`] trains the small
//! local classifiers, and [`round`] runs the server loop that ties
//! selection, valuation and aggregation together.

pub mod data;
pub mod model;
pub mod round;

pub use data::{
    dirichlet_partition, longtail_class_targets, longtail_subsample, split_eval_set,
    synthetic_blobs, DataError, Dataset,
};
pub use model::{finite_difference_gradient, local_train, LocalFit, ModelArch};
pub use round::{
    prepare_context, run_experiment, run_round, run_single_seed, DataSpec, ExperimentReport,
    ModelSpec, RoundContext, RoundRecord, SeedRun, ServerState, SimConfig, SimError,
};
