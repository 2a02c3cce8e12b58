//! The community model: a topic model whose documents are days and whose
//! words are individual taxon observations.

mod community;
mod hyper;
mod sampler;

pub use community::{ml_taxon_distribution, CommunityModel, MODEL_FORMAT_VERSION};
pub use hyper::Hyperparameters;
pub use sampler::{collapsed_conditional, SamplerState};

use serde::{Deserialize, Serialize};

use crate::corpus::ObservationCorpus;
use crate::error::Result;

/// Default share of observations a community needs to count as active.
pub const ACTIVE_THRESHOLD: f64 = 0.01;

/// Per-sweep training diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub log_likelihood: Vec<f64>,
    pub k_active: Vec<usize>,
}

/// Trains a model and discards the diagnostics.
pub fn train(corpus: &ObservationCorpus, hyper: &Hyperparameters) -> Result<CommunityModel> {
    train_with_trace(corpus, hyper).map(|(model, _)| model)
}

/// Runs `n_sweeps` Gibbs sweeps from a random start and returns the model
/// with empty communities dropped, plus one trace entry per sweep.
pub fn train_with_trace(
    corpus: &ObservationCorpus,
    hyper: &Hyperparameters,
) -> Result<(CommunityModel, TrainingTrace)> {
    hyper.validate()?;
    let mut state = SamplerState::initialize(corpus, hyper)?;
    let mut trace = TrainingTrace::default();
    for sweep in 0..hyper.n_sweeps {
        state.gibbs_sweep(hyper)?;
        trace.log_likelihood.push(state.log_likelihood(hyper));
        trace.k_active.push(state.k_active());
        if (sweep + 1) % 50 == 0 {
            log::debug!(
                "sweep {}/{}: k_active {}, log-likelihood {:.3}",
                sweep + 1,
                hyper.n_sweeps,
                state.k_active(),
                trace.log_likelihood[sweep]
            );
        }
    }
    let model = finalize(&state, corpus, hyper)?;
    Ok((model, trace))
}

/// Builds the model from a sampler state, keeping only occupied communities.
pub fn finalize(
    state: &SamplerState,
    corpus: &ObservationCorpus,
    hyper: &Hyperparameters,
) -> Result<CommunityModel> {
    let occupied = state.occupied_communities();
    CommunityModel::new(
        state.theta_for(&occupied, hyper),
        state.phi_for(&occupied, hyper),
        *hyper,
        corpus.dates().to_vec(),
        corpus.taxon_names().to_vec(),
        corpus.day_totals(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn toy() -> ObservationCorpus {
        let start: NaiveDate = "2011-06-01".parse().unwrap();
        let rows: Vec<Vec<u32>> = (0..12)
            .map(|t| {
                if t % 3 == 0 {
                    vec![6, 1, 0, 0]
                } else {
                    vec![0, 0, 3, 5]
                }
            })
            .collect();
        ObservationCorpus::new(
            (0..12).map(|i| start + chrono::Days::new(i)).collect(),
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            rows,
        )
        .unwrap()
    }

    #[test]
    fn zero_sweeps_rejected() {
        let h = Hyperparameters {
            n_sweeps: 0,
            ..Default::default()
        };
        assert!(train(&toy(), &h).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let h = Hyperparameters {
            n_sweeps: 30,
            seed: 99,
            ..Default::default()
        };
        let (a, ta) = train_with_trace(&toy(), &h).unwrap();
        let (b, tb) = train_with_trace(&toy(), &h).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(ta.log_likelihood.len(), 30);
    }

    #[test]
    fn compaction_drops_empty_communities() {
        let h = Hyperparameters {
            n_sweeps: 40,
            gamma: 5.0,
            seed: 3,
            ..Default::default()
        };
        let corpus = toy();
        let mut state = SamplerState::initialize(&corpus, &h).unwrap();
        for _ in 0..40 {
            state.gibbs_sweep(&h).unwrap();
        }
        let model = finalize(&state, &corpus, &h).unwrap();
        assert_eq!(model.n_communities(), state.occupied_communities().len());
        assert!(model.n_communities() <= state.k_active());
    }
}
