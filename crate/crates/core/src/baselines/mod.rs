//! Comparison pipelines: ridge straight onto taxon distributions, and ridge
//! onto a `K`-component PCA of them.

mod pca;

pub use pca::{pca_fit, PcaModel, PCA_FORMAT_VERSION};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::regression::{
    project_to_simplex, run_direct, FoldTargets, PreparedFold, Protocol, ProtocolOutput,
};

/// Regresses the observed day distributions `y` directly and projects the
/// predictions back onto the simplex.
pub fn direct_regression_pipeline(protocol: &Protocol, y: &DMatrix<f64>) -> Result<ProtocolOutput> {
    run_direct(protocol, y)
}

struct PcaTargets<'a> {
    y: &'a DMatrix<f64>,
    k: usize,
}

impl FoldTargets for PcaTargets<'_> {
    fn prepare(&self, train_rows: &[usize]) -> Result<PreparedFold<'_>> {
        let y_train = self.y.select_rows(train_rows);
        let pca = pca_fit(&y_train, self.k)?;
        let targets = pca.transform(&y_train)?;
        Ok(PreparedFold {
            targets,
            decode: Box::new(move |raw| {
                let w = DMatrix::from_row_slice(1, raw.len(), raw);
                let back = pca.inverse(&w)?;
                Ok(project_to_simplex(back.as_slice()))
            }),
        })
    }
}

/// Fits PCA on each fold's training rows, regresses the component weights,
/// back-projects the predictions and clips them onto the simplex.
pub fn pca_regression_pipeline(
    protocol: &Protocol,
    y: &DMatrix<f64>,
    k: usize,
) -> Result<ProtocolOutput> {
    if y.nrows() != protocol.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} target rows for {} protocol rows",
            y.nrows(),
            protocol.n_rows()
        )));
    }
    protocol.run(&PcaTargets { y, k })
}
