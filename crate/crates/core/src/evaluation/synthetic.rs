use chrono::{Datelike, Days, NaiveDate};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, StandardNormal};

use crate::corpus::ObservationCorpus;
use crate::error::{Error, Result};
use crate::preprocessing::{
    day_of_year_columns, ColumnKind, EnvironmentTable, RawColumn, DEFAULT_MAD_CUTOFF,
};
use crate::seed;

/// Parameters of the seasonal test corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub k_true: usize,
    pub n_days: usize,
    pub n_taxa: usize,
    pub obs_per_day: u32,
    pub season_period: f64,
    pub seed: u64,
    pub n_distractors: usize,
    pub start: NaiveDate,
    /// Logit amplitude of the seasonal sinusoids.
    pub amplitude: f64,
    /// Symmetric Dirichlet concentration of each community's taxa.
    pub phi_concentration: f64,
}

impl SyntheticConfig {
    pub fn new(
        k_true: usize,
        n_days: usize,
        n_taxa: usize,
        obs_per_day: u32,
        season_period: f64,
        seed: u64,
    ) -> Self {
        Self {
            k_true,
            n_days,
            n_taxa,
            obs_per_day,
            season_period,
            seed,
            n_distractors: 10,
            start: NaiveDate::from_ymd_opt(2009, 1, 1).expect("valid date"),
            amplitude: 2.0,
            phi_concentration: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k_true == 0 || self.n_days == 0 || self.n_taxa == 0 || self.obs_per_day == 0 {
            return Err(Error::InvalidInput(
                "synthetic corpus sizes must be positive".into(),
            ));
        }
        if !(self.season_period > 0.0 && self.amplitude >= 0.0 && self.phi_concentration > 0.0) {
            return Err(Error::InvalidInput(
                "season period and concentration must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Generated corpus with its environment and ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: ObservationCorpus,
    pub env: EnvironmentTable,
    /// `T × K` true day mixtures.
    pub theta: DMatrix<f64>,
    /// `K × V` true community distributions.
    pub phi: DMatrix<f64>,
}

const STREAM_PHI: u64 = 1;
const STREAM_COUNTS: u64 = 2;
const STREAM_ENV: u64 = 3;

fn sparse_dirichlet(rng: &mut ChaCha8Rng, len: usize, concentration: f64) -> Result<Vec<f64>> {
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::InvalidInput(format!("dirichlet concentration: {e}")))?;
    loop {
        let draw: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draw.iter().sum();
        if total > 0.0 && total.is_finite() {
            return Ok(draw.into_iter().map(|x| x / total).collect());
        }
    }
}

fn multinomial(rng: &mut ChaCha8Rng, n: u32, p: &[f64]) -> Result<Vec<u32>> {
    let mut out = vec![0u32; p.len()];
    let mut remaining = u64::from(n);
    let mut mass_left = 1.0f64;
    for (v, &pv) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if v + 1 == p.len() {
            out[v] = remaining as u32;
            break;
        }
        let q = if mass_left > 0.0 {
            (pv / mass_left).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::InvalidInput(format!("binomial: {e}")))?
            .sample(rng);
        out[v] = draw as u32;
        remaining -= draw;
        mass_left -= pv;
    }
    Ok(out)
}

/// Seasonal community mixture: softmax over `K` phase-shifted sinusoids.
fn seasonal_mixture(date: NaiveDate, cfg: &SyntheticConfig) -> Vec<f64> {
    let phase = std::f64::consts::TAU * f64::from(date.ordinal0()) / cfg.season_period;
    let k = cfg.k_true as f64;
    let logits: Vec<f64> = (0..cfg.k_true)
        .map(|j| cfg.amplitude * (phase - std::f64::consts::TAU * j as f64 / k).cos())
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Daily counts drawn from seasonal community mixtures, with an environment
/// table holding the day-of-year encoding and Gaussian distractor columns.
pub fn synthetic_corpus(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let (k, t_len, v_len) = (cfg.k_true, cfg.n_days, cfg.n_taxa);

    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, STREAM_PHI));
    let mut phi = DMatrix::zeros(k, v_len);
    for j in 0..k {
        let row = sparse_dirichlet(&mut rng, v_len, cfg.phi_concentration)?;
        phi.row_mut(j)
            .iter_mut()
            .zip(&row)
            .for_each(|(d, s)| *d = *s);
    }

    let dates: Vec<NaiveDate> = (0..t_len as u64)
        .map(|i| cfg.start + Days::new(i))
        .collect();
    let mut theta = DMatrix::zeros(t_len, k);
    for (t, &d) in dates.iter().enumerate() {
        let m = seasonal_mixture(d, cfg);
        theta
            .row_mut(t)
            .iter_mut()
            .zip(&m)
            .for_each(|(d, s)| *d = *s);
    }
    let truth = &theta * &phi;

    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, STREAM_COUNTS));
    let rows = (0..t_len)
        .map(|t| {
            let p: Vec<f64> = truth.row(t).iter().copied().collect();
            multinomial(&mut rng, cfg.obs_per_day, &p)
        })
        .collect::<Result<Vec<_>>>()?;
    let names = (0..v_len).map(|v| format!("taxon_{v:02}")).collect();
    let corpus = ObservationCorpus::new(dates.clone(), names, rows)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, STREAM_ENV));
    let mut raw: Vec<RawColumn> = (0..cfg.n_distractors)
        .map(|i| {
            let name = format!("distractor_{i:02}");
            RawColumn {
                kind: ColumnKind::Linear {
                    source: name.clone(),
                },
                name,
                values: (0..t_len)
                    .map(|_| Some(rng.sample(StandardNormal)))
                    .collect(),
                outlier_screen: true,
            }
        })
        .collect();
    raw.extend(day_of_year_columns(&dates));
    let env = EnvironmentTable::assemble(dates, raw, DEFAULT_MAD_CUTOFF)?;

    Ok(SyntheticData {
        corpus,
        env,
        theta,
        phi,
    })
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Cosine similarity of each true row to its estimated partner under the
/// one-to-one matching that maximizes the total. True rows left without a
/// partner score 0.
pub fn matched_cosines(estimated: &DMatrix<f64>, truth: &DMatrix<f64>) -> Vec<f64> {
    let row = |m: &DMatrix<f64>, i: usize| -> Vec<f64> { m.row(i).iter().copied().collect() };
    let sims: Vec<Vec<f64>> = (0..truth.nrows())
        .map(|i| {
            (0..estimated.nrows())
                .map(|j| cosine(&row(truth, i), &row(estimated, j)))
                .collect()
        })
        .collect();

    fn search(
        i: usize,
        sims: &[Vec<f64>],
        used: &mut Vec<bool>,
        cur: &mut Vec<f64>,
        best: &mut (f64, Vec<f64>),
    ) {
        if i == sims.len() {
            let total: f64 = cur.iter().sum();
            if total > best.0 {
                *best = (total, cur.clone());
            }
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(sims[i][j]);
                search(i + 1, sims, used, cur, best);
                cur.pop();
                used[j] = false;
            }
        }
        cur.push(0.0);
        search(i + 1, sims, used, cur, best);
        cur.pop();
    }

    let mut best = (f64::NEG_INFINITY, vec![0.0; truth.nrows()]);
    search(
        0,
        &sims,
        &mut vec![false; estimated.nrows()],
        &mut Vec::new(),
        &mut best,
    );
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_samples_follow_the_truth() {
        // Expected per-day L1 error is about sum_v sqrt(2 p_v / (pi n)) ~ 0.004.
        let mut cfg = SyntheticConfig::new(3, 10, 4, 100_000, 365.25, 4);
        cfg.n_distractors = 2;
        let data = synthetic_corpus(&cfg).unwrap();
        let truth = &data.theta * &data.phi;
        let empirical = data.corpus.distributions();
        for t in 0..10 {
            let l1: f64 = (0..4)
                .map(|v| (truth[(t, v)] - empirical[(t, v)]).abs())
                .sum();
            assert!(l1 < 0.01, "day {t}: {l1}");
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let cfg = SyntheticConfig::new(3, 30, 6, 50, 365.25, 9);
        let a = synthetic_corpus(&cfg).unwrap();
        let b = synthetic_corpus(&cfg).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.env, b.env);
        let c = synthetic_corpus(&SyntheticConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.corpus, c.corpus);
    }

    #[test]
    fn single_community_is_constant() {
        let data = synthetic_corpus(&SyntheticConfig::new(1, 10, 5, 20, 365.25, 1)).unwrap();
        assert!(data.theta.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn environment_layout() {
        let data = synthetic_corpus(&SyntheticConfig::new(2, 40, 5, 20, 365.25, 2)).unwrap();
        let names = data.env.feature_names();
        assert_eq!(names.len(), 12);
        assert_eq!(names[10], "day_of_year_cos");
        assert_eq!(data.env.dates(), data.corpus.dates());
    }

    #[test]
    fn matching_handles_permutations_and_missing_rows() {
        let truth = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let est = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(matched_cosines(&est, &truth), vec![1.0, 1.0, 1.0]);
        let short = est.rows(0, 2).into_owned();
        let mut c = matched_cosines(&short, &truth);
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 1.0, 1.0]);
    }
}
