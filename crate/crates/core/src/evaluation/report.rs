use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::kl::{kl_divergence, DEFAULT_EPSILON};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayScore {
    pub date: NaiveDate,
    pub kl: f64,
}

/// Box-plot summary of one year's daily scores. Quartiles use linear
/// interpolation; whiskers sit 1.5 IQR beyond the quartiles, clamped to the
/// data range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub n_days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_day: Vec<DayScore>,
    pub per_year: BTreeMap<i32, BoxStats>,
    pub overall_mean: f64,
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q1 = quantile(&v, 0.25);
        let q3 = quantile(&v, 0.75);
        let iqr = q3 - q1;
        Some(Self {
            median: quantile(&v, 0.5),
            q1,
            q3,
            whisker_lo: (q1 - 1.5 * iqr).max(v[0]),
            whisker_hi: (q3 + 1.5 * iqr).min(v[v.len() - 1]),
            n_days: v.len(),
        })
    }
}

impl EvaluationReport {
    pub fn from_scores(per_day: Vec<DayScore>) -> Result<Self> {
        if per_day.is_empty() {
            return Err(Error::InvalidInput("no days to score".into()));
        }
        let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
        for s in &per_day {
            by_year.entry(s.date.year()).or_default().push(s.kl);
        }
        let per_year = by_year
            .into_iter()
            .filter_map(|(y, v)| BoxStats::from_values(&v).map(|b| (y, b)))
            .collect();
        let overall_mean = per_day.iter().map(|s| s.kl).sum::<f64>() / per_day.len() as f64;
        Ok(Self {
            per_day,
            per_year,
            overall_mean,
        })
    }

    pub fn median(&self) -> f64 {
        let v: Vec<f64> = self.per_day.iter().map(|s| s.kl).collect();
        BoxStats::from_values(&v).map_or(f64::NAN, |b| b.median)
    }
}

/// Scores each predicted row against the observed row of the same day.
pub fn score_predictions(
    dates: &[NaiveDate],
    predicted: &DMatrix<f64>,
    observed: &DMatrix<f64>,
) -> Result<EvaluationReport> {
    if predicted.shape() != observed.shape() || dates.len() != predicted.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "predicted {:?}, observed {:?}, {} dates",
            predicted.shape(),
            observed.shape(),
            dates.len()
        )));
    }
    let per_day = dates
        .iter()
        .enumerate()
        .map(|(t, &date)| {
            let p: Vec<f64> = predicted.row(t).iter().copied().collect();
            let q: Vec<f64> = observed.row(t).iter().copied().collect();
            kl_divergence(&p, &q, DEFAULT_EPSILON).map(|kl| DayScore { date, kl })
        })
        .collect::<Result<Vec<_>>>()?;
    EvaluationReport::from_scores(per_day)
}
