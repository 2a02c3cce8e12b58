use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::preprocessing::FeatureEncoder;

pub const REGRESSOR_FORMAT_VERSION: u32 = 1;

/// Relative singular-value floor below which an unregularized system counts
/// as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Default regularization grid: 13 log-spaced values from 1e-3 to 1e3.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect()
}

/// Multi-output linear model `y = xᵀW + b` with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeRegressor {
    weights: DMatrix<f64>,
    intercept: DVector<f64>,
    lambda: f64,
    feature_names: Vec<String>,
    encoder: Option<FeatureEncoder>,
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

fn centered(m: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut c = m.clone();
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    c
}

fn check_fit_inputs(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows but {} target rows",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() < 2 {
        return Err(Error::InvalidInput(
            "ridge regression needs at least two rows".into(),
        ));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite value in regression data".into(),
        ));
    }
    Ok(())
}

fn rank_deficient(singular_values: &DVector<f64>, n_features: usize) -> bool {
    let max = singular_values.iter().cloned().fold(0.0, f64::max);
    singular_values.len() < n_features
        || max == 0.0
        || singular_values.iter().any(|&s| s <= RANK_TOLERANCE * max)
}

/// Fits ridge regression. Features and targets are centred on their training
/// means, the weights solve `(XcᵀXc + λI) W = Xcᵀ Yc`, and the intercept is
/// `ȳ − x̄ᵀW`, so it is never shrunk. On standardized features `x̄ = 0` and the
/// intercept is the target column means.
pub fn ridge_fit(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<RidgeRegressor> {
    check_fit_inputs(x, y, lambda)?;
    let d = x.ncols();
    let x_mean = column_means(x);
    let y_mean = column_means(y);
    if d == 0 {
        return Ok(RidgeRegressor::from_parts(
            DMatrix::zeros(0, y.ncols()),
            y_mean,
            lambda,
        ));
    }
    let xc = centered(x, &x_mean);
    let yc = centered(y, &y_mean);
    if lambda == 0.0 && rank_deficient(&xc.singular_values(), d) {
        return Err(Error::SingularSystem { lambda });
    }
    let mut gram = xc.transpose() * &xc;
    for i in 0..d {
        gram[(i, i)] += lambda;
    }
    let chol = gram.cholesky().ok_or(Error::SingularSystem { lambda })?;
    let weights = chol.solve(&(xc.transpose() * &yc));
    let intercept = &y_mean - weights.transpose() * &x_mean;
    Ok(RidgeRegressor::from_parts(weights, intercept, lambda))
}

/// Leave-one-out residuals for every row and target column, from the
/// hat-matrix identity `e_i = (y_i − ŷ_i) / (1 − h_ii)`.
///
/// With `Xc = U S Vᵀ`, the hat matrix of the centred ridge fit is
/// `11ᵀ/N + U diag(s²/(s²+λ)) Uᵀ`.
pub fn loo_residuals(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    check_fit_inputs(x, y, lambda)?;
    let svd = LooBasis::new(x, y)?;
    svd.residuals(lambda)
}

struct LooBasis {
    u: DMatrix<f64>,
    s2: Vec<f64>,
    singular_values: DVector<f64>,
    n_features: usize,
    yc: DMatrix<f64>,
    /// `Uᵀ Yc`
    uty: DMatrix<f64>,
}

impl LooBasis {
    fn new(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        let xc = centered(x, &column_means(x));
        let yc = centered(y, &column_means(y));
        let (u, singular_values) = if x.ncols() == 0 {
            (DMatrix::zeros(x.nrows(), 0), DVector::zeros(0))
        } else {
            let svd = xc.svd(true, false);
            let u = svd
                .u
                .ok_or_else(|| Error::InvalidInput("SVD did not return U".into()))?;
            (u, svd.singular_values)
        };
        let uty = u.transpose() * &yc;
        Ok(Self {
            s2: singular_values.iter().map(|s| s * s).collect(),
            singular_values,
            n_features: x.ncols(),
            u,
            yc,
            uty,
        })
    }

    fn residuals(&self, lambda: f64) -> Result<DMatrix<f64>> {
        if lambda == 0.0
            && self.n_features > 0
            && rank_deficient(&self.singular_values, self.n_features)
        {
            return Err(Error::SingularSystem { lambda });
        }
        let n = self.u.nrows();
        let shrink: Vec<f64> = self.s2.iter().map(|&s2| s2 / (s2 + lambda)).collect();
        let mut scaled = self.uty.clone();
        for (j, mut row) in scaled.row_iter_mut().enumerate() {
            row *= shrink[j];
        }
        // Centred fitted values; the intercept contributes ȳ to both sides.
        let fitted = &self.u * scaled;
        let mut out = &self.yc - fitted;
        for i in 0..n {
            let h = 1.0 / n as f64
                + (0..shrink.len())
                    .map(|j| self.u[(i, j)].powi(2) * shrink[j])
                    .sum::<f64>();
            let denom = 1.0 - h;
            let mut row = out.row_mut(i);
            if denom.abs() < 1e-12 {
                row.fill(f64::INFINITY);
            } else {
                row /= denom;
            }
        }
        Ok(out)
    }
}

/// Mean squared leave-one-out residual for each grid value.
pub fn loocv_errors(x: &DMatrix<f64>, y: &DMatrix<f64>, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("lambda grid is empty".into()));
    }
    for &l in grid {
        check_fit_inputs(x, y, l)?;
    }
    let basis = LooBasis::new(x, y)?;
    let cells = (y.nrows() * y.ncols()).max(1) as f64;
    grid.iter()
        .map(|&l| {
            basis
                .residuals(l)
                .map(|e| e.iter().map(|r| r * r).sum::<f64>() / cells)
        })
        .collect()
}

/// Grid value with the smallest leave-one-out error; ties go to the larger
/// value.
pub fn loocv_select_lambda(x: &DMatrix<f64>, y: &DMatrix<f64>, grid: &[f64]) -> Result<f64> {
    let errors = loocv_errors(x, y, grid)?;
    let mut best: Option<(f64, f64)> = None;
    for (&lambda, &err) in grid.iter().zip(&errors) {
        if !err.is_finite() {
            continue;
        }
        best = match best {
            None => Some((lambda, err)),
            Some((bl, be)) => {
                let tie = (err - be).abs() <= 1e-12 * be.abs().max(f64::MIN_POSITIVE);
                if err < be && !tie || tie && lambda > bl {
                    Some((lambda, err))
                } else {
                    Some((bl, be))
                }
            }
        };
    }
    best.map(|(l, _)| l).ok_or_else(|| {
        Error::InvalidInput("no lambda in the grid gives a finite leave-one-out error".into())
    })
}

impl RidgeRegressor {
    fn from_parts(weights: DMatrix<f64>, intercept: DVector<f64>, lambda: f64) -> Self {
        let feature_names = (0..weights.nrows()).map(|j| format!("x{j}")).collect();
        Self {
            weights,
            intercept,
            lambda,
            feature_names,
            encoder: None,
        }
    }

    /// Attaches the feature encoder used to standardize raw readings; its
    /// column names become the regressor's feature names.
    pub fn with_encoder(mut self, encoder: FeatureEncoder) -> Result<Self> {
        if encoder.columns.len() != self.weights.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "encoder has {} columns, regressor has {} features",
                encoder.columns.len(),
                self.weights.nrows()
            )));
        }
        self.feature_names = encoder.feature_names();
        self.encoder = Some(encoder);
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.weights.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} features",
                names.len(),
                self.weights.nrows()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    /// `D × K` weights.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn intercept(&self) -> &DVector<f64> {
        &self.intercept
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn encoder(&self) -> Option<&FeatureEncoder> {
        self.encoder.as_ref()
    }

    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch(format!(
                "{} features given, regressor expects {}",
                x.len(),
                self.n_features()
            )));
        }
        Ok((0..self.n_outputs())
            .map(|k| {
                self.intercept[k]
                    + x.iter()
                        .enumerate()
                        .map(|(j, xj)| xj * self.weights[(j, k)])
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn predict_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature columns, regressor expects {}",
                x.ncols(),
                self.n_features()
            )));
        }
        let mut out = x * &self.weights;
        for mut row in out.row_iter_mut() {
            row += self.intercept.transpose();
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = RegressorDocument {
            format_version: REGRESSOR_FORMAT_VERSION,
            lambda: self.lambda,
            feature_names: self.feature_names.clone(),
            weights: io::matrix_rows(&self.weights),
            intercept: self.intercept.iter().copied().collect(),
            encoder: self.encoder.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RegressorDocument = serde_json::from_str(text)?;
        if doc.format_version != REGRESSOR_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: doc.format_version,
                expected: REGRESSOR_FORMAT_VERSION,
            });
        }
        let weights = io::matrix_from_rows(&doc.weights, doc.intercept.len())?;
        let reg = Self::from_parts(weights, DVector::from_vec(doc.intercept), doc.lambda)
            .with_feature_names(doc.feature_names)?;
        match doc.encoder {
            Some(enc) => reg.with_encoder(enc),
            None => Ok(reg),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&io::read_to_string(path)?)
    }

    /// Weight matrix as CSV: one row per feature, one column per output.
    pub fn weights_csv(&self, output_prefix: &str) -> Result<Vec<u8>> {
        let header = std::iter::once("feature".to_string())
            .chain((0..self.n_outputs()).map(|k| format!("{output_prefix}{k}")));
        let rows = (0..self.n_features()).map(|j| {
            std::iter::once(self.feature_names[j].clone())
                .chain((0..self.n_outputs()).map(|k| io::fmt_f64(self.weights[(j, k)])))
                .collect::<Vec<_>>()
        });
        io::csv_bytes(header, rows)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RegressorDocument {
    format_version: u32,
    lambda: f64,
    feature_names: Vec<String>,
    weights: Vec<Vec<f64>>,
    intercept: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encoder: Option<FeatureEncoder>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Dense Gaussian elimination with partial pivoting, kept apart from the
    /// Cholesky route used by `ridge_fit`.
    fn gauss_solve(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let m = b[0].len();
        let mut aug: Vec<Vec<f64>> = (0..n)
            .map(|i| [a[i].clone(), b[i].clone()].concat())
            .collect();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
                .unwrap();
            aug.swap(col, piv);
            for row in 0..n {
                if row != col {
                    let f = aug[row][col] / aug[col][col];
                    for k in col..n + m {
                        aug[row][k] -= f * aug[col][k];
                    }
                }
            }
        }
        (0..n)
            .map(|i| (0..m).map(|k| aug[i][n + k] / aug[i][i]).collect())
            .collect()
    }

    #[test]
    fn default_grid_shape() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 13);
        assert!((g[0] - 1e-3).abs() < 1e-18 && (g[12] - 1e3).abs() < 1e-9);
    }

    #[test]
    fn matches_normal_equation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&mut rng, 20, 4);
        let y = random(&mut rng, 20, 3);
        let lambda = 0.5;
        let reg = ridge_fit(&x, &y, lambda).unwrap();

        // Augmented design [1, X] with penalty diag(0, λ, ..., λ).
        let n = 20;
        let z: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                std::iter::once(1.0)
                    .chain((0..4).map(|j| x[(i, j)]))
                    .collect()
            })
            .collect();
        let a: Vec<Vec<f64>> = (0..5)
            .map(|p| {
                (0..5)
                    .map(|q| {
                        (0..n).map(|i| z[i][p] * z[i][q]).sum::<f64>()
                            + if p == q && p > 0 { lambda } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let b: Vec<Vec<f64>> = (0..5)
            .map(|p| {
                (0..3)
                    .map(|k| (0..n).map(|i| z[i][p] * y[(i, k)]).sum::<f64>())
                    .collect()
            })
            .collect();
        let sol = gauss_solve(&a, &b);
        for k in 0..3 {
            assert!((reg.intercept()[k] - sol[0][k]).abs() < 1e-9);
            for j in 0..4 {
                assert!((reg.weights()[(j, k)] - sol[j + 1][k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn huge_lambda_shrinks_to_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random(&mut rng, 15, 3);
        let y = random(&mut rng, 15, 2);
        let reg = ridge_fit(&x, &y, 1e12).unwrap();
        assert!(reg.weights().amax() < 1e-9);
        let means = column_means(&y);
        let pred = reg.predict(&[0.3, -0.2, 0.9]).unwrap();
        for k in 0..2 {
            assert!((pred[k] - means[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn determined_system_interpolates() {
        // D features plus the intercept: D + 1 rows pin the fit exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random(&mut rng, 5, 4);
        let y = random(&mut rng, 5, 2);
        let reg = ridge_fit(&x, &y, 0.0).unwrap();
        let fitted = reg.predict_matrix(&x).unwrap();
        assert!((fitted - y).amax() < 1e-8);
    }

    #[test]
    fn collinear_unregularized_is_singular() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let y = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, 3.0, 5.0]);
        assert!(matches!(
            ridge_fit(&x, &y, 0.0),
            Err(Error::SingularSystem { .. })
        ));
        assert!(ridge_fit(&x, &y, 0.1).is_ok());
        assert!(matches!(
            loo_residuals(&x, &y, 0.0),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn closed_form_loo_matches_refits() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random(&mut rng, 15, 3);
        let y = random(&mut rng, 15, 2);
        for lambda in [0.0, 0.01, 1.0, 30.0] {
            let e = loo_residuals(&x, &y, lambda).unwrap();
            for i in 0..15 {
                let keep: Vec<usize> = (0..15).filter(|&r| r != i).collect();
                let reg = ridge_fit(&x.select_rows(&keep), &y.select_rows(&keep), lambda).unwrap();
                let xi: Vec<f64> = x.row(i).iter().copied().collect();
                let p = reg.predict(&xi).unwrap();
                for k in 0..2 {
                    assert!((e[(i, k)] - (y[(i, k)] - p[k])).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn single_grid_point_is_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random(&mut rng, 10, 2);
        let y = random(&mut rng, 10, 2);
        assert_eq!(loocv_select_lambda(&x, &y, &[0.7]).unwrap(), 0.7);
        assert!(loocv_select_lambda(&x, &y, &[]).is_err());
    }

    #[test]
    fn noiseless_linear_targets_pick_smallest_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random(&mut rng, 25, 3);
        let w = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 0.3, -1.5, 2.5]);
        let y = &x * &w;
        let grid = default_lambda_grid();
        let errs = loocv_errors(&x, &y, &grid).unwrap();
        assert!(errs.windows(2).all(|p| p[0] <= p[1]));
        assert_eq!(loocv_select_lambda(&x, &y, &grid).unwrap(), grid[0]);
    }

    #[test]
    fn ties_prefer_larger_lambda() {
        // Constant targets: every lambda gives the same LOO error.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&mut rng, 12, 2);
        let y = DMatrix::from_element(12, 2, 0.25);
        assert_eq!(
            loocv_select_lambda(&x, &y, &[0.1, 10.0, 1.0]).unwrap(),
            10.0
        );
    }

    #[test]
    fn weight_norm_shrinks_with_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random(&mut rng, 18, 5);
        let y = random(&mut rng, 18, 3);
        let norms: Vec<f64> = default_lambda_grid()
            .iter()
            .map(|&l| ridge_fit(&x, &y, l).unwrap().weights().norm())
            .collect();
        assert!(norms.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random(&mut rng, 8, 2);
        let y = random(&mut rng, 8, 3);
        let reg = ridge_fit(&x, &y, 0.3)
            .unwrap()
            .with_feature_names(vec!["temp".into(), "light".into()])
            .unwrap();
        let text = reg.to_json().unwrap();
        assert!(text.contains("\"format_version\": 1"));
        assert_eq!(RidgeRegressor::from_json(&text).unwrap(), reg);
        let csv = String::from_utf8(reg.weights_csv("community_").unwrap()).unwrap();
        assert!(csv.starts_with("feature,community_0,community_1,community_2\ntemp,"));
    }
}
