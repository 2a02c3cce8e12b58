//! Learns sparse, temporally smooth community decompositions of daily taxon
//! counts and scores them by how well a plain ridge regressor can predict the
//! community mixtures from environment variables.
//!
//! The pipeline is:
//!
//! 1. [`preprocessing`] turns count and environment CSVs into an
//!    [`ObservationCorpus`] and a standardized [`EnvironmentTable`].
//! 2. [`model::train`] runs a collapsed Gibbs sampler with neighbourhood-pooled
//!    day mixtures and a capped new-community move, returning a
//!    [`CommunityModel`] (day-community `theta`, community-taxon `phi`).
//! 3. [`regression`] fits ridge models from features to community mixtures
//!    under a leave-one-year-out protocol.
//! 4. [`baselines`] provides the direct and PCA comparison pipelines.
//! 5. [`evaluation`] scores predictions by KL divergence, summarizes them per
//!    year, and runs hyperparameter sweeps.

// `!(x >= 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod model;
pub mod preprocessing;
pub mod regression;
pub mod seed;

pub use corpus::ObservationCorpus;
pub use error::{Error, Result};
pub use model::{CommunityModel, Hyperparameters, SamplerState};
pub use preprocessing::{EnvironmentTable, FeatureConfig};
pub use regression::{FoldPlan, RidgeRegressor};
