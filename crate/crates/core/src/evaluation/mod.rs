//! Held-out scoring, method comparison, the hyperparameter sweep and the
//! synthetic seasonal corpus used to test all of them.

mod compare;
mod kl;
mod report;
mod sweep;
pub mod synthetic;

pub use compare::{
    community_pipeline, compare_methods, pca_components_for, Method, MethodComparison,
};
pub use kl::{kl_divergence, DEFAULT_EPSILON};
pub use report::{quantile, score_predictions, BoxStats, DayScore, EvaluationReport};
pub use sweep::{
    hyperparameter_sweep, leaderboard_csv, mean_row_change, thread_cap_from_env, LeaderboardEntry,
    SeedPolicy, SweepConfig, SweepResult, THREADS_ENV,
};
pub use synthetic::{matched_cosines, synthetic_corpus, SyntheticConfig, SyntheticData};
