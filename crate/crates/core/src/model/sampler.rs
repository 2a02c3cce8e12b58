//! Collapsed Gibbs sampler over per-observation community labels.
//!
//! Each observation `i` on day `t` carries a label `z`. The conditional for a
//! label, with the observation itself excluded from every count, is
//!
//! ```text
//! p(z = k) ∝ (m[t,k] + alpha) * (n_kv[k,v] + beta) / (n_k[k] + V * beta)   for k < k_active
//! p(z = new) ∝ gamma / V                                                   if k_active < cap
//! ```
//!
//! where `m[t,·]` sums `n_tk` over every day within `g_radius` calendar days
//! of `t`.

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Hyperparameters;
use crate::corpus::ObservationCorpus;
use crate::error::{Error, Result};

/// Full sampler state: labels, the three count tables, and the RNG.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    day_numbers: Vec<i64>,
    n_taxa: usize,
    capacity: usize,
    /// Taxon of each observation, day-major then taxon-major.
    tokens: Vec<u32>,
    /// `day_offsets[t]..day_offsets[t + 1]` indexes day `t`'s observations.
    day_offsets: Vec<usize>,
    assignments: Vec<u16>,
    /// Row-major `T × capacity`.
    n_tk: Vec<u32>,
    /// Row-major `capacity × V`.
    n_kv: Vec<u32>,
    n_k: Vec<u32>,
    k_active: usize,
    rng: ChaCha8Rng,
}

fn day_number(d: NaiveDate) -> i64 {
    i64::from(d.num_days_from_ce())
}

/// Normalized collapsed conditional from explicit count vectors.
///
/// `pooled[k]` is the neighbourhood count for community `k`, `taxon_counts[k]`
/// is `n_kv[k, v]` for the taxon being resampled and `community_totals[k]` is
/// `n_k[k]`, all with the resampled observation excluded. The trailing
/// new-community entry is present only when `allow_new` is set.
pub fn collapsed_conditional(
    pooled: &[u64],
    taxon_counts: &[u32],
    community_totals: &[u32],
    n_taxa: usize,
    hyper: &Hyperparameters,
    allow_new: bool,
) -> Result<Vec<f64>> {
    let k = pooled.len();
    if taxon_counts.len() != k || community_totals.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "conditional inputs have lengths {}, {}, {}",
            k,
            taxon_counts.len(),
            community_totals.len()
        )));
    }
    let mut weights = Vec::with_capacity(k + 1);
    let vb = n_taxa as f64 * hyper.beta;
    for j in 0..k {
        if taxon_counts[j] > community_totals[j] {
            return Err(Error::InvariantViolation(format!(
                "community {j} holds {} of one taxon but only {} in total",
                taxon_counts[j], community_totals[j]
            )));
        }
        weights.push(
            (pooled[j] as f64 + hyper.alpha) * (f64::from(taxon_counts[j]) + hyper.beta)
                / (f64::from(community_totals[j]) + vb),
        );
    }
    if allow_new {
        weights.push(hyper.gamma / n_taxa as f64);
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvariantViolation(format!(
            "conditional has non-positive total weight {total}"
        )));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(weights)
}

impl SamplerState {
    /// Assigns every observation uniformly at random to one of the first
    /// `min(2, max_communities)` communities.
    pub fn initialize(corpus: &ObservationCorpus, hyper: &Hyperparameters) -> Result<Self> {
        hyper.validate()?;
        if corpus.n_days() == 0 || corpus.total_observations() == 0 {
            return Err(Error::EmptyCorpus(
                "cannot initialize a sampler without observations".into(),
            ));
        }
        let t_days = corpus.n_days();
        let n_taxa = corpus.n_taxa();
        let capacity = hyper.max_communities;
        let k_init = capacity.min(2);

        let mut tokens = Vec::with_capacity(corpus.total_observations() as usize);
        let mut day_offsets = Vec::with_capacity(t_days + 1);
        day_offsets.push(0);
        for t in 0..t_days {
            for (v, &c) in corpus.row(t).iter().enumerate() {
                tokens.extend(std::iter::repeat_n(v as u32, c as usize));
            }
            day_offsets.push(tokens.len());
        }

        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let mut state = Self {
            day_numbers: corpus.dates().iter().copied().map(day_number).collect(),
            n_taxa,
            capacity,
            assignments: vec![0; tokens.len()],
            tokens,
            day_offsets,
            n_tk: vec![0; t_days * capacity],
            n_kv: vec![0; capacity * n_taxa],
            n_k: vec![0; capacity],
            k_active: k_init,
            rng: ChaCha8Rng::seed_from_u64(0),
        };
        for t in 0..t_days {
            for i in state.day_offsets[t]..state.day_offsets[t + 1] {
                let k = rng.random_range(0..k_init);
                state.assignments[i] = k as u16;
                state.add(t, i, k);
            }
        }
        state.rng = rng;
        Ok(state)
    }

    pub fn n_days(&self) -> usize {
        self.day_numbers.len()
    }

    pub fn n_taxa(&self) -> usize {
        self.n_taxa
    }

    pub fn k_active(&self) -> usize {
        self.k_active
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn n_tk(&self, t: usize, k: usize) -> u32 {
        self.n_tk[t * self.capacity + k]
    }

    pub fn n_kv(&self, k: usize, v: usize) -> u32 {
        self.n_kv[k * self.n_taxa + v]
    }

    pub fn n_k(&self, k: usize) -> u32 {
        self.n_k[k]
    }

    pub fn day_total(&self, t: usize) -> usize {
        self.day_offsets[t + 1] - self.day_offsets[t]
    }

    /// Taxa of day `t`'s observations, in sweep order.
    pub fn day_tokens(&self, t: usize) -> &[u32] {
        &self.tokens[self.day_offsets[t]..self.day_offsets[t + 1]]
    }

    /// Community labels of day `t`'s observations, aligned with
    /// [`day_tokens`](Self::day_tokens).
    pub fn day_assignments(&self, t: usize) -> &[u16] {
        &self.assignments[self.day_offsets[t]..self.day_offsets[t + 1]]
    }

    fn add(&mut self, t: usize, i: usize, k: usize) {
        let v = self.tokens[i] as usize;
        self.n_tk[t * self.capacity + k] += 1;
        self.n_kv[k * self.n_taxa + v] += 1;
        self.n_k[k] += 1;
    }

    fn remove(&mut self, t: usize, i: usize, k: usize) -> Result<()> {
        let v = self.tokens[i] as usize;
        let cap = self.capacity;
        let nt = self.n_taxa;
        let underflow = |what: &str| {
            Error::InvariantViolation(format!(
                "{what} would go negative removing observation {i} of day {t} from community {k}"
            ))
        };
        self.n_tk[t * cap + k] = self.n_tk[t * cap + k]
            .checked_sub(1)
            .ok_or_else(|| underflow("n_tk"))?;
        self.n_kv[k * nt + v] = self.n_kv[k * nt + v]
            .checked_sub(1)
            .ok_or_else(|| underflow("n_kv"))?;
        self.n_k[k] = self.n_k[k].checked_sub(1).ok_or_else(|| underflow("n_k"))?;
        Ok(())
    }

    /// Removes the `j`-th observation of day `t` from every count table and
    /// returns its taxon and former label. The label slot keeps its old value
    /// until [`insert_observation`](Self::insert_observation) is called.
    pub fn remove_observation(&mut self, t: usize, j: usize) -> Result<(usize, usize)> {
        let i = self.day_offsets[t] + j;
        let k = self.assignments[i] as usize;
        self.remove(t, i, k)?;
        Ok((self.tokens[i] as usize, k))
    }

    /// Re-inserts the `j`-th observation of day `t` with label `k`.
    pub fn insert_observation(&mut self, t: usize, j: usize, k: usize) -> Result<()> {
        if k >= self.capacity {
            return Err(Error::InvariantViolation(format!(
                "label {k} exceeds community cap {}",
                self.capacity
            )));
        }
        let i = self.day_offsets[t] + j;
        self.assignments[i] = k as u16;
        self.k_active = self.k_active.max(k + 1);
        self.add(t, i, k);
        Ok(())
    }

    /// Day indices whose dates lie within `g_radius` calendar days of day `t`.
    fn window(&self, t: usize, g_radius: u32) -> std::ops::Range<usize> {
        let centre = self.day_numbers[t];
        let g = i64::from(g_radius);
        let lo = self.day_numbers.partition_point(|&d| d < centre - g);
        let hi = self.day_numbers.partition_point(|&d| d <= centre + g);
        lo..hi
    }

    /// Sum of `n_tk` rows over days within `g_radius` calendar days of day
    /// `t`, for the first `k_active` communities.
    pub fn neighborhood_counts(&self, t: usize, g_radius: u32) -> Vec<u64> {
        let mut pooled = vec![0u64; self.k_active];
        self.pool_into(t, g_radius, &mut pooled);
        pooled
    }

    fn pool_into(&self, t: usize, g_radius: u32, pooled: &mut [u64]) {
        pooled.iter_mut().for_each(|p| *p = 0);
        let width = pooled.len();
        for s in self.window(t, g_radius) {
            let row = &self.n_tk[s * self.capacity..s * self.capacity + width];
            for (p, &c) in pooled.iter_mut().zip(row) {
                *p += u64::from(c);
            }
        }
    }

    /// Collapsed conditional for a taxon-`v` observation on day `t`.
    ///
    /// The observation being resampled must already have been removed with
    /// [`remove_observation`](Self::remove_observation).
    pub fn conditional_distribution(
        &self,
        t: usize,
        v: usize,
        hyper: &Hyperparameters,
    ) -> Result<Vec<f64>> {
        let k = self.k_active;
        let pooled = self.neighborhood_counts(t, hyper.g_radius);
        let taxon_counts: Vec<u32> = (0..k).map(|j| self.n_kv(j, v)).collect();
        collapsed_conditional(
            &pooled,
            &taxon_counts,
            &self.n_k[..k],
            self.n_taxa,
            hyper,
            k < self.capacity,
        )
    }

    /// Resamples every observation once, day-major then taxon-major.
    pub fn gibbs_sweep(&mut self, hyper: &Hyperparameters) -> Result<()> {
        let cap = self.capacity;
        let vb = self.n_taxa as f64 * hyper.beta;
        let new_weight = hyper.gamma / self.n_taxa as f64;
        let mut pooled = vec![0u64; cap];
        let mut cumulative = vec![0f64; cap + 1];

        for t in 0..self.n_days() {
            // Only day t's counts change while its observations are resampled,
            // so the pooled window is built once and kept in step.
            self.pool_into(t, hyper.g_radius, &mut pooled);
            for i in self.day_offsets[t]..self.day_offsets[t + 1] {
                let v = self.tokens[i] as usize;
                let old = self.assignments[i] as usize;
                self.remove(t, i, old)?;
                pooled[old] = pooled[old].checked_sub(1).ok_or_else(|| {
                    Error::InvariantViolation(format!("pooled count underflow on day {t}"))
                })?;

                let k_active = self.k_active;
                let mut acc = 0.0;
                for k in 0..k_active {
                    acc += (pooled[k] as f64 + hyper.alpha)
                        * (f64::from(self.n_kv[k * self.n_taxa + v]) + hyper.beta)
                        / (f64::from(self.n_k[k]) + vb);
                    cumulative[k] = acc;
                }
                let n_choices = if k_active < cap {
                    acc += new_weight;
                    cumulative[k_active] = acc;
                    k_active + 1
                } else {
                    k_active
                };
                if !(acc > 0.0 && acc.is_finite()) {
                    return Err(Error::InvariantViolation(format!(
                        "conditional on day {t} has total weight {acc}"
                    )));
                }
                let u = self.rng.random::<f64>() * acc;
                let new = cumulative[..n_choices]
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(n_choices - 1);

                if new == k_active {
                    self.k_active += 1;
                }
                self.assignments[i] = new as u16;
                self.add(t, i, new);
                pooled[new] += 1;
            }
        }
        Ok(())
    }

    /// Checks the three count identities and the assignment tally against
    /// `corpus`.
    pub fn check_invariants(&self, corpus: &ObservationCorpus) -> Result<()> {
        let fail = |m: String| Err(Error::InvariantViolation(m));
        if self.k_active > self.capacity {
            return fail(format!(
                "k_active {} exceeds cap {}",
                self.k_active, self.capacity
            ));
        }
        let mut n_tk = vec![0u32; self.n_tk.len()];
        let mut n_kv = vec![0u32; self.n_kv.len()];
        let mut n_k = vec![0u32; self.capacity];
        for t in 0..self.n_days() {
            let mut day_taxa = vec![0u32; self.n_taxa];
            for i in self.day_offsets[t]..self.day_offsets[t + 1] {
                let k = self.assignments[i] as usize;
                let v = self.tokens[i] as usize;
                if k >= self.k_active {
                    return fail(format!("label {k} beyond k_active {}", self.k_active));
                }
                n_tk[t * self.capacity + k] += 1;
                n_kv[k * self.n_taxa + v] += 1;
                n_k[k] += 1;
                day_taxa[v] += 1;
            }
            if day_taxa != corpus.row(t) {
                return fail(format!("day {t} observations disagree with the corpus"));
            }
            let row_sum: u64 = (0..self.capacity).map(|k| u64::from(self.n_tk(t, k))).sum();
            if row_sum != corpus.day_total(t) {
                return fail(format!("n_tk row {t} sums to {row_sum}"));
            }
        }
        if n_tk != self.n_tk || n_kv != self.n_kv || n_k != self.n_k {
            return fail("count tables disagree with assignments".into());
        }
        for k in 0..self.capacity {
            let by_taxon: u64 = (0..self.n_taxa).map(|v| u64::from(self.n_kv(k, v))).sum();
            let by_day: u64 = (0..self.n_days()).map(|t| u64::from(self.n_tk(t, k))).sum();
            if by_taxon != u64::from(self.n_k[k]) || by_day != u64::from(self.n_k[k]) {
                return fail(format!("community {k} totals are inconsistent"));
            }
        }
        Ok(())
    }

    /// Smoothed day-community estimate over the first `k_active` communities.
    pub fn estimate_theta(&self, hyper: &Hyperparameters) -> DMatrix<f64> {
        let communities: Vec<usize> = (0..self.k_active).collect();
        self.theta_for(&communities, hyper)
    }

    /// Smoothed community-taxon estimate over the first `k_active`
    /// communities. Empty communities come out uniform.
    pub fn estimate_phi(&self, hyper: &Hyperparameters) -> DMatrix<f64> {
        let communities: Vec<usize> = (0..self.k_active).collect();
        self.phi_for(&communities, hyper)
    }

    /// Indices of communities that currently hold at least one observation.
    pub fn occupied_communities(&self) -> Vec<usize> {
        (0..self.k_active).filter(|&k| self.n_k[k] > 0).collect()
    }

    pub(crate) fn theta_for(&self, communities: &[usize], hyper: &Hyperparameters) -> DMatrix<f64> {
        let k = communities.len() as f64;
        DMatrix::from_fn(self.n_days(), communities.len(), |t, j| {
            (f64::from(self.n_tk(t, communities[j])) + hyper.alpha)
                / (self.day_total(t) as f64 + k * hyper.alpha)
        })
    }

    pub(crate) fn phi_for(&self, communities: &[usize], hyper: &Hyperparameters) -> DMatrix<f64> {
        let vb = self.n_taxa as f64 * hyper.beta;
        DMatrix::from_fn(communities.len(), self.n_taxa, |j, v| {
            let k = communities[j];
            (f64::from(self.n_kv(k, v)) + hyper.beta) / (f64::from(self.n_k[k]) + vb)
        })
    }

    /// Training log-likelihood `Σ_t Σ_v c[t,v] ln (θ φ)[t,v]` under the
    /// current point estimates.
    pub fn log_likelihood(&self, hyper: &Hyperparameters) -> f64 {
        let theta = self.estimate_theta(hyper);
        let phi = self.estimate_phi(hyper);
        let mut ll = 0.0;
        let mut day_counts = vec![0u32; self.n_taxa];
        for t in 0..self.n_days() {
            day_counts.iter_mut().for_each(|c| *c = 0);
            for &v in self.day_tokens(t) {
                day_counts[v as usize] += 1;
            }
            for (v, &c) in day_counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let p: f64 = (0..self.k_active)
                    .map(|k| theta[(t, k)] * phi[(k, v)])
                    .sum();
                ll += f64::from(c) * p.ln();
            }
        }
        ll
    }

    #[cfg(test)]
    pub(crate) fn from_parts(
        day_numbers: Vec<i64>,
        n_taxa: usize,
        capacity: usize,
        n_tk: Vec<u32>,
        n_kv: Vec<u32>,
        n_k: Vec<u32>,
        k_active: usize,
    ) -> Self {
        Self {
            day_numbers,
            n_taxa,
            capacity,
            tokens: vec![],
            day_offsets: vec![0],
            assignments: vec![],
            n_tk,
            n_kv,
            n_k,
            k_active,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn corpus(dates: &[&str], rows: Vec<Vec<u32>>) -> ObservationCorpus {
        let v = rows[0].len();
        ObservationCorpus::new(
            dates.iter().map(|s| d(s)).collect(),
            (0..v).map(|i| format!("taxon{i}")).collect(),
            rows,
        )
        .unwrap()
    }

    fn hyper(max_communities: usize, gamma: f64, g_radius: u32) -> Hyperparameters {
        Hyperparameters {
            alpha: 1.0,
            beta: 1.0,
            gamma,
            g_radius,
            max_communities,
            n_sweeps: 1,
            seed: 11,
        }
    }

    #[test]
    fn single_community_initialization() {
        let c = corpus(&["2009-01-01"], vec![vec![3, 0]]);
        let s = SamplerState::initialize(&c, &hyper(1, 1.0, 0)).unwrap();
        assert_eq!(s.k_active(), 1);
        assert_eq!(s.day_assignments(0), &[0, 0, 0]);
        assert_eq!(s.n_tk(0, 0), 3);
    }

    #[test]
    fn initialization_conserves_counts() {
        let c = corpus(&["2009-01-01", "2009-01-02"], vec![vec![2, 1], vec![0, 4]]);
        let s = SamplerState::initialize(&c, &hyper(5, 1.0, 0)).unwrap();
        s.check_invariants(&c).unwrap();
        let row_sums: Vec<u32> = (0..2).map(|t| (0..5).map(|k| s.n_tk(t, k)).sum()).collect();
        assert_eq!(row_sums, vec![3, 4]);
        assert_eq!((0..5).map(|k| s.n_k(k)).sum::<u32>(), 7);
        assert!(s
            .day_assignments(0)
            .iter()
            .chain(s.day_assignments(1))
            .all(|&z| z < 2));
        assert_eq!(s, SamplerState::initialize(&c, &hyper(5, 1.0, 0)).unwrap());
    }

    #[test]
    fn neighborhood_uses_calendar_days() {
        // Day indices 0, 1, 2 are consecutive dates; day 3 is after a gap.
        let c = corpus(
            &["2009-01-01", "2009-01-02", "2009-01-03", "2009-01-10"],
            vec![vec![2, 1], vec![1, 1], vec![3, 0], vec![0, 5]],
        );
        let mut s = SamplerState::initialize(&c, &hyper(3, 1.0, 1)).unwrap();
        for _ in 0..3 {
            s.gibbs_sweep(&hyper(3, 1.0, 1)).unwrap();
        }
        let k = s.k_active();
        let row = |t: usize| (0..k).map(|j| u64::from(s.n_tk(t, j))).collect::<Vec<_>>();

        assert_eq!(s.neighborhood_counts(1, 0), row(1));
        let explicit: Vec<u64> = (0..k).map(|j| row(0)[j] + row(1)[j] + row(2)[j]).collect();
        assert_eq!(s.neighborhood_counts(1, 1), explicit);
        // The gap keeps day 3 out of day 2's one-day window.
        let without_gap: Vec<u64> = (0..k).map(|j| row(1)[j] + row(2)[j]).collect();
        assert_eq!(s.neighborhood_counts(2, 1), without_gap);
        let all: Vec<u64> = (0..k).map(|j| u64::from(s.n_k(j))).collect();
        assert_eq!(s.neighborhood_counts(0, 10_000), all);
    }

    #[test]
    fn conditional_matches_hand_evaluation() {
        // m_tk = [1, 0], n_kv[., v] = [1, 0], n_k = [2, 1], V = 2.
        let s =
            SamplerState::from_parts(vec![0], 2, 2, vec![1, 0], vec![1, 1, 0, 1], vec![2, 1], 2);
        let p = s.conditional_distribution(0, 0, &hyper(2, 0.0, 0)).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p[0] - 0.75).abs() < 1e-12);
        assert!((p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn conditional_single_community_without_gamma() {
        let p = collapsed_conditional(&[4], &[2], &[5], 3, &hyper(1, 0.0, 0), false).unwrap();
        assert_eq!(p, vec![1.0]);
    }

    #[test]
    fn conditional_includes_new_entry_below_cap() {
        let h = hyper(3, 2.0, 0);
        let p = collapsed_conditional(&[1, 0], &[1, 0], &[2, 1], 2, &h, true).unwrap();
        // unnormalized [1.0, 1/3, gamma / V = 1.0]
        let z = 1.0 + 1.0 / 3.0 + 1.0;
        assert!((p[0] - 1.0 / z).abs() < 1e-12);
        assert!((p[1] - (1.0 / 3.0) / z).abs() < 1e-12);
        assert!((p[2] - 1.0 / z).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_counts_are_rejected() {
        let err = collapsed_conditional(&[1], &[3], &[2], 2, &hyper(1, 0.0, 0), false);
        assert!(matches!(err, Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn double_removal_is_an_invariant_violation() {
        let c = corpus(&["2009-01-01"], vec![vec![1, 0]]);
        let mut s = SamplerState::initialize(&c, &hyper(1, 0.0, 0)).unwrap();
        s.remove_observation(0, 0).unwrap();
        assert!(matches!(
            s.remove_observation(0, 0),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn single_community_absorbs_everything() {
        let c = corpus(&["2009-01-01", "2009-01-02"], vec![vec![2, 1], vec![0, 4]]);
        let h = hyper(1, 0.0, 0);
        let mut s = SamplerState::initialize(&c, &h).unwrap();
        let before = s.clone();
        s.gibbs_sweep(&h).unwrap();
        assert_eq!(s.k_active(), 1);
        assert_eq!(s.assignments, before.assignments);
        assert_eq!(s.n_tk, before.n_tk);
        assert_ne!(s.rng, before.rng);
    }

    #[test]
    fn zero_gamma_never_opens_a_second_community() {
        let c = corpus(&["2009-01-01", "2009-01-02"], vec![vec![5, 1], vec![0, 4]]);
        let h = Hyperparameters {
            max_communities: 1,
            gamma: 0.0,
            ..hyper(1, 0.0, 2)
        };
        let mut s = SamplerState::initialize(&c, &h).unwrap();
        // Lift the cap after initialization so only gamma keeps k at 1.
        s.capacity = 4;
        s.n_tk = (0..2)
            .flat_map(|t| {
                let mut row = vec![0; 4];
                row[0] = c.day_total(t) as u32;
                row
            })
            .collect();
        s.n_kv = [s.n_kv.clone(), vec![0; 6]].concat();
        s.n_k = vec![s.n_k[0], 0, 0, 0];
        for _ in 0..50 {
            s.gibbs_sweep(&h).unwrap();
            assert_eq!(s.k_active(), 1);
        }
    }

    #[test]
    fn sweeps_are_deterministic_and_conserve_counts() {
        let c = corpus(
            &["2009-01-01", "2009-01-02", "2009-01-05"],
            vec![vec![4, 0, 1], vec![1, 3, 2], vec![0, 2, 6]],
        );
        let h = hyper(6, 0.5, 2);
        let mut a = SamplerState::initialize(&c, &h).unwrap();
        let mut b = SamplerState::initialize(&c, &h).unwrap();
        for _ in 0..25 {
            a.gibbs_sweep(&h).unwrap();
            b.gibbs_sweep(&h).unwrap();
            a.check_invariants(&c).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn estimates_follow_the_formulas() {
        // n_tk = [[3, 0]], alpha = 1 -> [[4/5, 1/5]]
        let s = SamplerState {
            tokens: vec![0, 0, 0],
            day_offsets: vec![0, 3],
            assignments: vec![0, 0, 0],
            ..SamplerState::from_parts(vec![0], 2, 2, vec![3, 0], vec![3, 0, 0, 0], vec![3, 0], 2)
        };
        let h = hyper(2, 1.0, 0);
        let theta = s.estimate_theta(&h);
        assert!((theta[(0, 0)] - 0.8).abs() < 1e-15);
        assert!((theta[(0, 1)] - 0.2).abs() < 1e-15);

        // community 1 is empty -> uniform
        let phi = s.estimate_phi(&h);
        assert!((phi[(0, 0)] - 4.0 / 5.0).abs() < 1e-15);
        assert_eq!(phi[(1, 0)], 0.5);
        assert_eq!(phi[(1, 1)], 0.5);
    }

    #[test]
    fn phi_example() {
        // n_kv = [[1, 0]], beta = 1, V = 2 -> [[2/3, 1/3]]
        let s = SamplerState::from_parts(vec![0], 2, 1, vec![1], vec![1, 0], vec![1], 1);
        let phi = s.estimate_phi(&hyper(1, 0.0, 0));
        assert!((phi[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((phi[(0, 1)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_theta() {
        let s = SamplerState {
            tokens: vec![0; 4],
            day_offsets: vec![0, 4],
            assignments: vec![0, 0, 1, 1],
            ..SamplerState::from_parts(vec![0], 1, 2, vec![2, 2], vec![2, 2], vec![2, 2], 2)
        };
        for alpha in [0.01, 1.0, 50.0] {
            let theta = s.estimate_theta(&Hyperparameters {
                alpha,
                ..hyper(2, 0.0, 0)
            });
            assert_eq!(theta[(0, 0)], 0.5);
            assert_eq!(theta[(0, 1)], 0.5);
        }
    }
}
