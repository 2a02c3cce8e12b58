use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compare::community_pipeline;
use super::report::score_predictions;
use crate::corpus::ObservationCorpus;
use crate::error::{Error, Result};
use crate::io;
use crate::model::{train, CommunityModel, Hyperparameters, ACTIVE_THRESHOLD};
use crate::preprocessing::EnvironmentTable;
use crate::regression::{default_lambda_grid, AlignedData, FoldOutcome};
use crate::seed;

pub const THREADS_ENV: &str = "ECOTOPICS_THREADS";

/// How each grid point's sampler seed is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Every grid point uses the base seed.
    #[default]
    Shared,
    /// Grid point `i` uses a seed derived from the base seed and `i`.
    PerPoint,
}

fn default_alpha() -> Vec<f64> {
    vec![Hyperparameters::default().alpha]
}

fn default_beta() -> Vec<f64> {
    vec![Hyperparameters::default().beta]
}

fn default_gamma() -> Vec<f64> {
    vec![Hyperparameters::default().gamma]
}

fn default_g() -> Vec<u32> {
    vec![Hyperparameters::default().g_radius]
}

fn default_sweeps() -> usize {
    Hyperparameters::default().n_sweeps
}

fn default_max_communities() -> usize {
    Hyperparameters::default().max_communities
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    #[serde(default = "default_beta")]
    pub beta: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: Vec<f64>,
    #[serde(default = "default_g")]
    pub g_radius: Vec<u32>,
    #[serde(default = "default_sweeps")]
    pub n_sweeps: usize,
    #[serde(default = "default_max_communities")]
    pub max_communities: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub seed_policy: SeedPolicy,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    /// Worker thread cap; `ECOTOPICS_THREADS` lowers it further.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            beta: default_beta(),
            gamma: default_gamma(),
            g_radius: default_g(),
            n_sweeps: default_sweeps(),
            max_communities: default_max_communities(),
            seed: 0,
            seed_policy: SeedPolicy::Shared,
            lambda_grid: default_lambda_grid(),
            threads: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty()
            || self.beta.is_empty()
            || self.gamma.is_empty()
            || self.g_radius.is_empty()
        {
            return Err(Error::InvalidInput(
                "every sweep grid must be non-empty".into(),
            ));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::InvalidInput("lambda grid must be non-empty".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidInput("threads must be at least 1".into()));
        }
        for h in self.grid() {
            h.validate()?;
        }
        Ok(())
    }

    /// Grid points in alpha-major, then beta, gamma, g order.
    pub fn grid(&self) -> Vec<Hyperparameters> {
        let mut out = Vec::new();
        for &alpha in &self.alpha {
            for &beta in &self.beta {
                for &gamma in &self.gamma {
                    for &g_radius in &self.g_radius {
                        let seed = match self.seed_policy {
                            SeedPolicy::Shared => self.seed,
                            SeedPolicy::PerPoint => seed::derive(self.seed, out.len() as u64),
                        };
                        out.push(Hyperparameters {
                            alpha,
                            beta,
                            gamma,
                            g_radius,
                            max_communities: self.max_communities,
                            n_sweeps: self.n_sweeps,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Thread cap from `ECOTOPICS_THREADS`, if set to a positive integer.
pub fn thread_cap_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub grid_index: usize,
    pub hyper: Hyperparameters,
    pub n_communities: usize,
    pub active_communities: usize,
    pub mean_kl: Option<f64>,
    pub median_kl: Option<f64>,
    pub status: String,
}

impl LeaderboardEntry {
    pub fn succeeded(&self) -> bool {
        self.mean_kl.is_some()
    }
}

pub struct SweepResult {
    pub best: CommunityModel,
    pub best_folds: Vec<FoldOutcome>,
    /// Successful points by ascending mean KL, then failed points.
    pub leaderboard: Vec<LeaderboardEntry>,
}

struct PointResult {
    entry: LeaderboardEntry,
    fitted: Option<(CommunityModel, Vec<FoldOutcome>)>,
}

fn evaluate_point(
    corpus: &ObservationCorpus,
    data: &AlignedData,
    grid_index: usize,
    hyper: Hyperparameters,
) -> PointResult {
    let run = || -> Result<(CommunityModel, Vec<FoldOutcome>, f64, f64)> {
        let model = train(corpus, &hyper)?;
        let out = community_pipeline(data, &model)?;
        let report = score_predictions(&data.alignment.dates, &out.predictions, &data.observed)?;
        Ok((model, out.folds, report.overall_mean, report.median()))
    };
    match run() {
        Ok((model, folds, mean, median)) => PointResult {
            entry: LeaderboardEntry {
                rank: 0,
                grid_index,
                hyper,
                n_communities: model.n_communities(),
                active_communities: model.active_communities(ACTIVE_THRESHOLD),
                mean_kl: Some(mean),
                median_kl: Some(median),
                status: "ok".into(),
            },
            fitted: Some((model, folds)),
        },
        Err(e) => {
            log::warn!("grid point {grid_index} failed: {e}");
            PointResult {
                entry: LeaderboardEntry {
                    rank: 0,
                    grid_index,
                    hyper,
                    n_communities: 0,
                    active_communities: 0,
                    mean_kl: None,
                    median_kl: None,
                    status: format!("failed: {e}"),
                },
                fitted: None,
            }
        }
    }
}

/// Successful points by mean KL, fewer active communities, smaller radius
/// and grid order; failed points after them in grid order.
fn rank_points(results: &mut [PointResult]) {
    results.sort_by(|a, b| {
        let (ea, eb) = (&a.entry, &b.entry);
        match (ea.mean_kl, eb.mean_kl) {
            (Some(x), Some(y)) => x
                .total_cmp(&y)
                .then(ea.active_communities.cmp(&eb.active_communities))
                .then(ea.hyper.g_radius.cmp(&eb.hyper.g_radius))
                .then(ea.grid_index.cmp(&eb.grid_index)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => ea.grid_index.cmp(&eb.grid_index),
        }
    });
    for (rank, r) in results.iter_mut().enumerate() {
        r.entry.rank = rank + 1;
    }
}

/// Trains one model per grid point, scores it through the held-out
/// regression protocol and keeps the lowest mean KL. Ties go to fewer active
/// communities, then the smaller smoothing radius.
pub fn hyperparameter_sweep(
    corpus: &ObservationCorpus,
    env: &EnvironmentTable,
    config: &SweepConfig,
) -> Result<SweepResult> {
    config.validate()?;
    let data = AlignedData::new(corpus, env, config.lambda_grid.clone())?;
    let grid = config.grid();
    let threads = match (config.threads, thread_cap_from_env()) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let mut results: Vec<PointResult> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, h)| evaluate_point(corpus, &data, i, *h))
            .collect()
    });

    rank_points(&mut results);
    let leaderboard: Vec<LeaderboardEntry> = results.iter().map(|r| r.entry.clone()).collect();
    let (best, best_folds) = results
        .into_iter()
        .next()
        .and_then(|r| r.fitted)
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "every grid point failed; first error: {}",
                leaderboard.first().map_or("none", |e| e.status.as_str())
            ))
        })?;
    Ok(SweepResult {
        best,
        best_folds,
        leaderboard,
    })
}

/// One CSV row per grid point.
pub fn leaderboard_csv(entries: &[LeaderboardEntry]) -> Result<Vec<u8>> {
    let header = [
        "rank",
        "grid_index",
        "alpha",
        "beta",
        "gamma",
        "g_radius",
        "seed",
        "n_sweeps",
        "max_communities",
        "n_communities",
        "active_communities",
        "mean_kl",
        "median_kl",
        "status",
    ];
    let opt = |x: Option<f64>| x.map(io::fmt_f64).unwrap_or_default();
    let rows = entries.iter().map(|e| {
        vec![
            e.rank.to_string(),
            e.grid_index.to_string(),
            io::fmt_f64(e.hyper.alpha),
            io::fmt_f64(e.hyper.beta),
            io::fmt_f64(e.hyper.gamma),
            e.hyper.g_radius.to_string(),
            e.hyper.seed.to_string(),
            e.hyper.n_sweeps.to_string(),
            e.hyper.max_communities.to_string(),
            e.n_communities.to_string(),
            e.active_communities.to_string(),
            opt(e.mean_kl),
            opt(e.median_kl),
            e.status.clone(),
        ]
    });
    io::csv_bytes(header, rows)
}

/// Mean L1 distance between consecutive rows.
pub fn mean_row_change(theta: &DMatrix<f64>) -> f64 {
    if theta.nrows() < 2 {
        return 0.0;
    }
    let total: f64 = (1..theta.nrows())
        .map(|t| (theta.row(t) - theta.row(t - 1)).abs().sum())
        .sum();
    total / (theta.nrows() - 1) as f64
}
