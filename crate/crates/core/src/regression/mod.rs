//! Ridge regression from environment features to community mixtures, and the
//! leave-one-year-out evaluation protocol.

mod folds;
mod protocol;
mod ridge;

pub use folds::{align, year_folds, Alignment, Fold, FoldPlan};
pub(crate) use protocol::run_direct;
pub use protocol::{
    mix_communities, predict_communities, predict_taxa, project_to_simplex, run_fold_protocol,
    AlignedData, Decoder, FoldOutcome, FoldTargets, PreparedFold, Protocol, ProtocolOutput,
};
pub use ridge::{
    default_lambda_grid, loo_residuals, loocv_errors, loocv_select_lambda, ridge_fit,
    RidgeRegressor, REGRESSOR_FORMAT_VERSION,
};
