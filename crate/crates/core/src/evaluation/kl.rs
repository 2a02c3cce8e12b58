use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-10;

const SUM_TOLERANCE: f64 = 1e-6;

fn floored(p: &[f64], epsilon: f64) -> Vec<f64> {
    let f: Vec<f64> = p.iter().map(|&x| x.max(epsilon)).collect();
    let total: f64 = f.iter().sum();
    f.into_iter().map(|x| x / total).collect()
}

/// `KL(estimated ‖ observed)` in nats, after flooring both distributions at
/// `epsilon` and renormalizing so that support mismatches stay finite.
pub fn kl_divergence(estimated: &[f64], observed: &[f64], epsilon: f64) -> Result<f64> {
    if estimated.len() != observed.len() {
        return Err(Error::DimensionMismatch(format!(
            "distributions have lengths {} and {}",
            estimated.len(),
            observed.len()
        )));
    }
    if estimated.is_empty() {
        return Err(Error::InvalidInput("empty distributions".into()));
    }
    for (name, d) in [("estimated", estimated), ("observed", observed)] {
        let s: f64 = d.iter().sum();
        if (s - 1.0).abs() > SUM_TOLERANCE || d.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "{name} distribution is not stochastic (sum {s})"
            )));
        }
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    let p = floored(estimated, epsilon);
    let q = floored(observed, epsilon);
    let kl: f64 = p
        .iter()
        .zip(&q)
        .filter(|(&pv, _)| pv > 0.0)
        .map(|(&pv, &qv)| pv * (pv / qv).ln())
        .sum();
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_distributions_score_zero() {
        let p = [0.2, 0.5, 0.3];
        assert_eq!(kl_divergence(&p, &p, DEFAULT_EPSILON).unwrap(), 0.0);
        let q = [0.0, 1.0, 0.0];
        assert!(kl_divergence(&q, &q, DEFAULT_EPSILON).unwrap() <= 1e-12);
    }

    #[test]
    fn point_mass_against_uniform() {
        let kl = kl_divergence(&[1.0, 0.0], &[0.5, 0.5], 1e-10).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-4);
    }

    #[test]
    fn direction_is_estimated_over_observed() {
        // The estimate puts mass where nothing was observed: large penalty.
        let forward = kl_divergence(&[0.5, 0.5], &[1.0, 0.0], 1e-10).unwrap();
        let backward = kl_divergence(&[1.0, 0.0], &[0.5, 0.5], 1e-10).unwrap();
        assert!(forward > 10.0 && backward < 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            kl_divergence(&[1.0], &[0.5, 0.5], 1e-10),
            Err(Error::DimensionMismatch(_))
        ));
    }

    fn stochastic(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, len).prop_filter_map("zero mass", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn non_negative((p, q) in (2usize..12).prop_flat_map(|n| (stochastic(n), stochastic(n)))) {
            let kl = kl_divergence(&p, &q, DEFAULT_EPSILON).unwrap();
            prop_assert!(kl >= 0.0);
            prop_assert!(kl_divergence(&p, &p, DEFAULT_EPSILON).unwrap() <= 1e-12);
        }
    }
}
