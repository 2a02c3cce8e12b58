use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const PCA_FORMAT_VERSION: u32 = 1;

/// Principal components of a set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: DVector<f64>,
    /// `K × V`, orthonormal rows, decreasing variance.
    components: DMatrix<f64>,
    /// Population variance along each component.
    explained_variance: Vec<f64>,
}

/// Fits the top `k` principal components of `y` (rows are samples).
///
/// Each component's largest-magnitude entry is made positive so that fits
/// are reproducible.
pub fn pca_fit(y: &DMatrix<f64>, k: usize) -> Result<PcaModel> {
    let (n, v) = y.shape();
    if k == 0 || k > n.min(v) {
        return Err(Error::InvalidInput(format!(
            "cannot take {k} components of a {n}x{v} matrix"
        )));
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in PCA input".into()));
    }
    let mean = DVector::from_iterator(v, y.column_iter().map(|c| c.mean()));
    let mut centered = y.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::InvalidInput("SVD did not return right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut components = DMatrix::zeros(k, v);
    let mut explained_variance = Vec::with_capacity(k);
    for (row, &idx) in order.iter().take(k).enumerate() {
        let mut c: Vec<f64> = v_t.row(idx).iter().copied().collect();
        let pivot = c.iter().enumerate().fold(
            0,
            |best, (j, x)| if x.abs() > c[best].abs() { j } else { best },
        );
        if c[pivot] < 0.0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
        components
            .row_mut(row)
            .iter_mut()
            .zip(&c)
            .for_each(|(d, s)| *d = *s);
        let s = svd.singular_values[idx];
        explained_variance.push(s * s / n as f64);
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

impl PcaModel {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    /// `(Y − mean) · componentsᵀ`
    pub fn transform(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns, PCA was fit on {}",
                y.ncols(),
                self.mean.len()
            )));
        }
        let mut centered = y.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * self.components.transpose())
    }

    /// `W · components + mean`
    pub fn inverse(&self, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if w.ncols() != self.n_components() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights per row, PCA has {} components",
                w.ncols(),
                self.n_components()
            )));
        }
        let mut out = w * &self.components;
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PcaDocument {
            format_version: PCA_FORMAT_VERSION,
            mean: self.mean.iter().copied().collect(),
            components: io::matrix_rows(&self.components),
            explained_variance: self.explained_variance.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PcaDocument = serde_json::from_str(text)?;
        if doc.format_version != PCA_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: doc.format_version,
                expected: PCA_FORMAT_VERSION,
            });
        }
        let components = io::matrix_from_rows(&doc.components, doc.mean.len())?;
        if components.nrows() != doc.explained_variance.len() {
            return Err(Error::DimensionMismatch(
                "component and variance counts differ".into(),
            ));
        }
        Ok(Self {
            mean: DVector::from_vec(doc.mean),
            components,
            explained_variance: doc.explained_variance,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_json()?.as_bytes())
    }
}

#[derive(Serialize, Deserialize)]
struct PcaDocument {
    format_version: u32,
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
    explained_variance: Vec<f64>,
}
