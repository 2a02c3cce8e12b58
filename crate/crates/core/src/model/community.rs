use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Hyperparameters;
use crate::error::{Error, Result};
use crate::io;

pub const MODEL_FORMAT_VERSION: u32 = 1;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// A trained decomposition: `theta` gives each day's community mixture and
/// `phi` each community's taxon distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityModel {
    theta: DMatrix<f64>,
    phi: DMatrix<f64>,
    hyper: Hyperparameters,
    dates: Vec<NaiveDate>,
    taxon_names: Vec<String>,
    day_totals: Vec<u64>,
}

pub(crate) fn check_stochastic_rows(name: &str, m: &DMatrix<f64>) -> Result<()> {
    for (i, row) in m.row_iter().enumerate() {
        if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{name} row {i} has a negative or non-finite entry"
            )));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!("{name} row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// `theta · phi`: the model's taxon distribution for each day.
pub fn ml_taxon_distribution(theta: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if theta.ncols() != phi.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} communities but phi has {}",
            theta.ncols(),
            phi.nrows()
        )));
    }
    Ok(theta * phi)
}

impl CommunityModel {
    pub fn new(
        theta: DMatrix<f64>,
        phi: DMatrix<f64>,
        hyper: Hyperparameters,
        dates: Vec<NaiveDate>,
        taxon_names: Vec<String>,
        day_totals: Vec<u64>,
    ) -> Result<Self> {
        if theta.ncols() != phi.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "theta has {} columns, phi has {} rows",
                theta.ncols(),
                phi.nrows()
            )));
        }
        if theta.ncols() == 0 {
            return Err(Error::InvalidInput("model has no communities".into()));
        }
        if theta.nrows() != dates.len() || day_totals.len() != dates.len() {
            return Err(Error::DimensionMismatch(format!(
                "theta has {} rows for {} dates and {} day totals",
                theta.nrows(),
                dates.len(),
                day_totals.len()
            )));
        }
        if phi.ncols() != taxon_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "phi has {} columns for {} taxa",
                phi.ncols(),
                taxon_names.len()
            )));
        }
        check_stochastic_rows("theta", &theta)?;
        check_stochastic_rows("phi", &phi)?;
        Ok(Self {
            theta,
            phi,
            hyper,
            dates,
            taxon_names,
            day_totals,
        })
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn taxon_names(&self) -> &[String] {
        &self.taxon_names
    }

    pub fn day_totals(&self) -> &[u64] {
        &self.day_totals
    }

    pub fn n_communities(&self) -> usize {
        self.phi.nrows()
    }

    pub fn ml_taxon_distribution(&self) -> Result<DMatrix<f64>> {
        ml_taxon_distribution(&self.theta, &self.phi)
    }

    /// Share of all observations attributed to each community,
    /// `Σ_t N_t θ[t,k] / Σ_t N_t`.
    pub fn mass_shares(&self) -> Vec<f64> {
        let total: f64 = self.day_totals.iter().map(|&n| n as f64).sum();
        (0..self.n_communities())
            .map(|k| {
                self.day_totals
                    .iter()
                    .enumerate()
                    .map(|(t, &n)| n as f64 * self.theta[(t, k)])
                    .sum::<f64>()
                    / total
            })
            .collect()
    }

    /// Number of communities whose observation share exceeds `threshold`.
    pub fn active_communities(&self, threshold: f64) -> usize {
        self.mass_shares()
            .iter()
            .filter(|&&s| s > threshold)
            .count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.into_model()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&io::read_to_string(path)?)
    }
}

/// On-disk layout of a [`CommunityModel`].
#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    taxon_names: Vec<String>,
    dates: Vec<NaiveDate>,
    day_totals: Vec<u64>,
    hyper: Hyperparameters,
    theta: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
}

impl From<&CommunityModel> for ModelDocument {
    fn from(m: &CommunityModel) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            taxon_names: m.taxon_names.clone(),
            dates: m.dates.clone(),
            day_totals: m.day_totals.clone(),
            hyper: m.hyper,
            theta: io::matrix_rows(&m.theta),
            phi: io::matrix_rows(&m.phi),
        }
    }
}

impl ModelDocument {
    fn into_model(self) -> Result<CommunityModel> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        CommunityModel::new(
            io::matrix_from_rows(&self.theta, self.phi.len())?,
            io::matrix_from_rows(&self.phi, self.taxon_names.len())?,
            self.hyper,
            self.dates,
            self.taxon_names,
            self.day_totals,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(theta: DMatrix<f64>, phi: DMatrix<f64>, totals: Vec<u64>) -> CommunityModel {
        let t = theta.nrows();
        let v = phi.ncols();
        let start: NaiveDate = "2010-03-01".parse().unwrap();
        CommunityModel::new(
            theta,
            phi,
            Hyperparameters::default(),
            (0..t)
                .map(|i| start + chrono::Days::new(i as u64))
                .collect(),
            (0..v).map(|i| format!("t{i}")).collect(),
            totals,
        )
        .unwrap()
    }

    #[test]
    fn single_community_reproduces_phi() {
        let phi = DMatrix::from_row_slice(1, 3, &[0.2, 0.3, 0.5]);
        let m = model(DMatrix::from_element(4, 1, 1.0), phi.clone(), vec![5; 4]);
        let y = m.ml_taxon_distribution().unwrap();
        for t in 0..4 {
            assert_eq!(y.row(t), phi.row(0));
        }
        assert_eq!(m.active_communities(0.0), 1);
        assert_eq!(m.active_communities(0.99), 1);
    }

    #[test]
    fn one_hot_rows_select_phi_rows() {
        let theta = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let phi = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.25, 0.75]);
        let m = model(theta, phi.clone(), vec![1, 2, 3]);
        let y = m.ml_taxon_distribution().unwrap();
        assert_eq!(y.row(0), phi.row(0));
        assert_eq!(y.row(1), phi.row(1));
        assert_eq!(y.row(2), phi.row(0));
    }

    #[test]
    fn mismatched_product_is_an_error() {
        let theta = DMatrix::from_element(2, 3, 1.0 / 3.0);
        let phi = DMatrix::from_element(2, 4, 0.25);
        assert!(matches!(
            ml_taxon_distribution(&theta, &phi),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn concentrated_mass_counts_one_community() {
        let mut theta = DMatrix::zeros(3, 5);
        theta.column_mut(0).fill(1.0);
        let phi = DMatrix::from_element(5, 2, 0.5);
        let m = model(theta, phi, vec![10, 20, 30]);
        assert_eq!(m.active_communities(0.01), 1);
    }

    #[test]
    fn threshold_counts_shares() {
        // One day carrying all the mass with these shares.
        let shares = [0.5, 0.3, 0.15, 0.04, 0.009, 0.001];
        let theta = DMatrix::from_row_slice(1, 6, &shares);
        let phi = DMatrix::from_element(6, 2, 0.5);
        let m = model(theta, phi, vec![1000]);
        assert_eq!(m.active_communities(0.01), 4);
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let theta = DMatrix::from_row_slice(1, 2, &[0.6, 0.6]);
        let phi = DMatrix::from_element(2, 2, 0.5);
        assert!(CommunityModel::new(
            theta,
            phi,
            Hyperparameters::default(),
            vec!["2010-01-01".parse().unwrap()],
            vec!["a".into(), "b".into()],
            vec![1]
        )
        .is_err());
    }

    #[test]
    fn json_round_trip() {
        let theta = DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 1.0 / 3.0, 2.0 / 3.0]);
        let phi = DMatrix::from_row_slice(2, 3, &[0.2, 0.3, 0.5, 1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0]);
        let m = model(theta, phi, vec![4, 6]);
        let text = m.to_json().unwrap();
        assert!(text.contains("\"format_version\": 1"));
        assert!(text.contains("2010-03-01"));
        assert_eq!(CommunityModel::from_json(&text).unwrap(), m);
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(
            CommunityModel::from_json(&bumped),
            Err(Error::FormatVersion { found: 2, .. })
        ));
    }
}
