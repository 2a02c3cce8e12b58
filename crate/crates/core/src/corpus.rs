use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Daily taxon counts: one row per observed day, one column per taxon.
///
/// Days without observations are absent rows rather than zero rows, so the
/// dates may have gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationCorpus {
    dates: Vec<NaiveDate>,
    taxon_names: Vec<String>,
    /// Row-major `dates.len() × taxon_names.len()`.
    counts: Vec<u32>,
}

impl ObservationCorpus {
    /// Builds a corpus from per-day count rows.
    ///
    /// Dates must be strictly increasing and every row must contain at least
    /// one observation.
    pub fn new(
        dates: Vec<NaiveDate>,
        taxon_names: Vec<String>,
        rows: Vec<Vec<u32>>,
    ) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::EmptyCorpus("no days".into()));
        }
        if taxon_names.is_empty() {
            return Err(Error::EmptyCorpus("no taxa".into()));
        }
        if rows.len() != dates.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} dates but {} count rows",
                dates.len(),
                rows.len()
            )));
        }
        for w in dates.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidInput(format!(
                    "dates must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let v = taxon_names.len();
        let mut counts = Vec::with_capacity(dates.len() * v);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != v {
                return Err(Error::DimensionMismatch(format!(
                    "row {t} has {} counts for {v} taxa",
                    row.len()
                )));
            }
            if row.iter().all(|&c| c == 0) {
                return Err(Error::InvalidInput(format!(
                    "day {} has no observations",
                    dates[t]
                )));
            }
            counts.extend(row);
        }
        Ok(Self {
            dates,
            taxon_names,
            counts,
        })
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_taxa(&self) -> usize {
        self.taxon_names.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn taxon_names(&self) -> &[String] {
        &self.taxon_names
    }

    pub fn row(&self, t: usize) -> &[u32] {
        let v = self.n_taxa();
        &self.counts[t * v..(t + 1) * v]
    }

    pub fn count(&self, t: usize, v: usize) -> u32 {
        self.counts[t * self.n_taxa() + v]
    }

    pub fn day_total(&self, t: usize) -> u64 {
        self.row(t).iter().map(|&c| u64::from(c)).sum()
    }

    pub fn day_totals(&self) -> Vec<u64> {
        (0..self.n_days()).map(|t| self.day_total(t)).collect()
    }

    pub fn total_observations(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Observed taxon distribution of day `t`.
    pub fn distribution(&self, t: usize) -> Vec<f64> {
        let total = self.day_total(t) as f64;
        self.row(t).iter().map(|&c| f64::from(c) / total).collect()
    }

    /// All observed day distributions as a `T × V` matrix.
    pub fn distributions(&self) -> DMatrix<f64> {
        let (t, v) = (self.n_days(), self.n_taxa());
        DMatrix::from_fn(t, v, |i, j| {
            f64::from(self.count(i, j)) / self.day_total(i) as f64
        })
    }

    /// Restricts the corpus to the given day indices (in the given order).
    pub fn select_days(&self, days: &[usize]) -> Result<Self> {
        Self::new(
            days.iter().map(|&t| self.dates[t]).collect(),
            self.taxon_names.clone(),
            days.iter().map(|&t| self.row(t).to_vec()).collect(),
        )
    }
}
