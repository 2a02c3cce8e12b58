use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and population standard deviation used to standardize one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: f64,
    pub stddev: f64,
}

impl ColumnScaling {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.stddev
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.stddev + self.mean
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted_present(series: &[Option<f64>]) -> Vec<f64> {
    let mut v: Vec<f64> = series.iter().flatten().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Flags values farther than `cutoff` median absolute deviations from the
/// median. With a zero MAD every value different from the median is flagged.
/// Missing entries are never flagged.
pub fn mad_outlier_mask(series: &[Option<f64>], cutoff: f64) -> Result<Vec<bool>> {
    let present = sorted_present(series);
    if present.is_empty() {
        return Err(Error::InvalidInput(
            "cannot compute a MAD mask for an all-missing series".into(),
        ));
    }
    if !(cutoff > 0.0) {
        return Err(Error::InvalidInput(format!(
            "MAD cutoff must be positive, got {cutoff}"
        )));
    }
    let med = median(&present);
    let mut deviations: Vec<f64> = present.iter().map(|x| (x - med).abs()).collect();
    deviations.sort_by(f64::total_cmp);
    let mad = median(&deviations);
    Ok(series
        .iter()
        .map(|x| match x {
            None => false,
            Some(x) if mad == 0.0 => *x != med,
            Some(x) => (x - med).abs() > cutoff * mad,
        })
        .collect())
}

pub(crate) fn standardize_named(
    name: &str,
    series: &[Option<f64>],
    mask: &[bool],
) -> Result<(Vec<f64>, ColumnScaling)> {
    if mask.len() != series.len() {
        return Err(Error::DimensionMismatch(format!(
            "series has {} values but mask has {}",
            series.len(),
            mask.len()
        )));
    }
    let kept: Vec<f64> = series
        .iter()
        .zip(mask)
        .filter_map(|(x, &m)| if m { None } else { *x })
        .collect();
    if kept.len() < 2 {
        return Err(Error::InsufficientData {
            name: name.to_string(),
        });
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let var = kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let stddev = var.sqrt();
    if !(stddev > f64::EPSILON * mean.abs().max(1.0)) {
        return Err(Error::ZeroVariance {
            name: name.to_string(),
        });
    }
    let scaling = ColumnScaling { mean, stddev };
    let out = series
        .iter()
        .zip(mask)
        .map(|(x, &m)| match x {
            Some(x) if !m => scaling.apply(*x),
            _ => 0.0,
        })
        .collect();
    Ok((out, scaling))
}

/// Centres and scales the unmasked, present entries to mean 0 and population
/// standard deviation 1. Masked or missing entries become exactly 0.0.
pub fn standardize(series: &[Option<f64>], mask: &[bool]) -> Result<(Vec<f64>, ColumnScaling)> {
    standardize_named("series", series, mask)
}

/// Maps a cyclic value onto the unit circle: `(cos 2πx/P, sin 2πx/P)`.
pub fn encode_cyclic(value: f64, period: f64) -> (f64, f64) {
    let angle = std::f64::consts::TAU * value / period;
    (angle.cos(), angle.sin())
}
