use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Priors and run settings for the community sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Dirichlet concentration on each day's community mixture.
    pub alpha: f64,
    /// Dirichlet concentration on each community's taxon distribution.
    pub beta: f64,
    /// Propensity to open a new community.
    pub gamma: f64,
    /// Half-width, in calendar days, of the window whose assignments are
    /// pooled into a day's mixture prior. Zero means no pooling.
    pub g_radius: u32,
    /// Hard cap on the number of communities.
    pub max_communities: usize,
    pub n_sweeps: usize,
    pub seed: u64,
}

/// The new-community weight competes with pooled counts, so opening rates
/// grow with corpus size; small `gamma` keeps a few-hundred-per-day corpus
/// from fragmenting. Large `beta` makes fresh singleton communities
/// unattractive until they gather support.
impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 2.0,
            gamma: 3e-4,
            g_radius: 3,
            max_communities: 20,
            n_sweeps: 300,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidHyperparameters(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive and finite");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive and finite");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be non-negative and finite");
        }
        if self.max_communities == 0 {
            return bad("max_communities must be at least 1");
        }
        if self.max_communities > u16::MAX as usize {
            return bad("max_communities must fit in 16 bits");
        }
        if self.n_sweeps == 0 {
            return bad("n_sweeps must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Hyperparameters::default().validate().is_ok());
        let h = Hyperparameters::default();
        assert!(Hyperparameters { alpha: 0.0, ..h }.validate().is_err());
        assert!(Hyperparameters { beta: -1.0, ..h }.validate().is_err());
        assert!(Hyperparameters { gamma: -0.1, ..h }.validate().is_err());
        assert!(Hyperparameters { gamma: 0.0, ..h }.validate().is_ok());
        assert!(Hyperparameters {
            max_communities: 0,
            ..h
        }
        .validate()
        .is_err());
        assert!(Hyperparameters { n_sweeps: 0, ..h }.validate().is_err());
        assert!(Hyperparameters { g_radius: 0, ..h }.validate().is_ok());
    }
}
