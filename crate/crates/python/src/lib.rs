//! Python bindings. Matrices cross the boundary as lists of rows and dates
//! as ISO `YYYY-MM-DD` strings.

use std::path::PathBuf;

use chrono::NaiveDate;
use ecotopics_core::baselines::{pca_fit as core_pca_fit, PcaModel};
use ecotopics_core::evaluation::{self, Method, MethodComparison, SweepConfig, SyntheticConfig};
use ecotopics_core::model::{self, ACTIVE_THRESHOLD};
use ecotopics_core::preprocessing::{build_feature_table, ingest_counts_csv, write_counts_csv};
use ecotopics_core::regression::{default_lambda_grid, loocv_select_lambda, ridge_fit};
use ecotopics_core::{
    CommunityModel, EnvironmentTable, FeatureConfig, Hyperparameters, ObservationCorpus,
    RidgeRegressor,
};
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(ecotopics, EcotopicsError, PyException);

fn err(e: ecotopics_core::Error) -> PyErr {
    EcotopicsError::new_err(e.to_string())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(EcotopicsError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

fn dates_out(d: &[NaiveDate]) -> Vec<String> {
    d.iter().map(NaiveDate::to_string).collect()
}

fn parse_date(s: &str) -> PyResult<NaiveDate> {
    s.parse()
        .map_err(|_| EcotopicsError::new_err(format!("invalid date {s:?}, expected YYYY-MM-DD")))
}

#[pyclass(
    name = "Hyperparameters",
    module = "ecotopics",
    get_all,
    set_all,
    from_py_object
)]
#[derive(Clone)]
struct PyHyperparameters {
    alpha: f64,
    beta: f64,
    gamma: f64,
    g_radius: u32,
    max_communities: usize,
    n_sweeps: usize,
    seed: u64,
}

impl PyHyperparameters {
    fn core(&self) -> Hyperparameters {
        Hyperparameters {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            g_radius: self.g_radius,
            max_communities: self.max_communities,
            n_sweeps: self.n_sweeps,
            seed: self.seed,
        }
    }
}

impl From<Hyperparameters> for PyHyperparameters {
    fn from(h: Hyperparameters) -> Self {
        Self {
            alpha: h.alpha,
            beta: h.beta,
            gamma: h.gamma,
            g_radius: h.g_radius,
            max_communities: h.max_communities,
            n_sweeps: h.n_sweeps,
            seed: h.seed,
        }
    }
}

#[pymethods]
impl PyHyperparameters {
    #[new]
    #[pyo3(signature = (alpha=None, beta=None, gamma=None, g_radius=None, max_communities=None, n_sweeps=None, seed=None))]
    fn new(
        alpha: Option<f64>,
        beta: Option<f64>,
        gamma: Option<f64>,
        g_radius: Option<u32>,
        max_communities: Option<usize>,
        n_sweeps: Option<usize>,
        seed: Option<u64>,
    ) -> PyResult<Self> {
        let d = Hyperparameters::default();
        let h = Hyperparameters {
            alpha: alpha.unwrap_or(d.alpha),
            beta: beta.unwrap_or(d.beta),
            gamma: gamma.unwrap_or(d.gamma),
            g_radius: g_radius.unwrap_or(d.g_radius),
            max_communities: max_communities.unwrap_or(d.max_communities),
            n_sweeps: n_sweeps.unwrap_or(d.n_sweeps),
            seed: seed.unwrap_or(d.seed),
        };
        h.validate().map_err(err)?;
        Ok(h.into())
    }

    fn __repr__(&self) -> String {
        format!(
            "Hyperparameters(alpha={}, beta={}, gamma={}, g_radius={}, max_communities={}, n_sweeps={}, seed={})",
            self.alpha, self.beta, self.gamma, self.g_radius, self.max_communities, self.n_sweeps, self.seed
        )
    }
}

#[pyclass(name = "Corpus", module = "ecotopics", frozen)]
struct PyCorpus {
    inner: ObservationCorpus,
}

#[pymethods]
impl PyCorpus {
    #[new]
    fn new(dates: Vec<String>, taxa: Vec<String>, counts: Vec<Vec<u32>>) -> PyResult<Self> {
        let dates = dates
            .iter()
            .map(|s| parse_date(s))
            .collect::<PyResult<_>>()?;
        let inner = ObservationCorpus::new(dates, taxa, counts).map_err(err)?;
        Ok(Self { inner })
    }

    /// Reads a wide or long count table.
    #[staticmethod]
    fn from_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ingest_counts_csv(&path).map_err(err)?,
        })
    }

    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        write_counts_csv(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn n_days(&self) -> usize {
        self.inner.n_days()
    }

    #[getter]
    fn n_taxa(&self) -> usize {
        self.inner.n_taxa()
    }

    #[getter]
    fn dates(&self) -> Vec<String> {
        dates_out(self.inner.dates())
    }

    #[getter]
    fn taxon_names(&self) -> Vec<String> {
        self.inner.taxon_names().to_vec()
    }

    #[getter]
    fn counts(&self) -> Vec<Vec<u32>> {
        (0..self.inner.n_days())
            .map(|t| self.inner.row(t).to_vec())
            .collect()
    }
}

#[pyclass(name = "Environment", module = "ecotopics", frozen)]
struct PyEnvironment {
    inner: EnvironmentTable,
}

#[pymethods]
impl PyEnvironment {
    /// Builds the daily standardized feature table from raw readings.
    /// `config` is a feature config as a JSON string.
    #[staticmethod]
    #[pyo3(signature = (path, config=None))]
    fn from_csv(path: PathBuf, config: Option<&str>) -> PyResult<Self> {
        let config: FeatureConfig = match config {
            Some(text) => {
                let c: FeatureConfig = serde_json_from_str(text)?;
                c.validate().map_err(err)?;
                c
            }
            None => FeatureConfig::default(),
        };
        Ok(Self {
            inner: build_feature_table(&path, &config).map_err(err)?,
        })
    }

    #[getter]
    fn dates(&self) -> Vec<String> {
        dates_out(self.inner.dates())
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        rows(self.inner.features())
    }

    #[getter]
    fn dropped_features(&self) -> Vec<String> {
        self.inner.dropped_features().to_vec()
    }

    fn trainable_rows(&self) -> Vec<bool> {
        self.inner.trainable_rows()
    }

    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_csv(&path).map_err(err)
    }
}

fn serde_json_from_str<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| EcotopicsError::new_err(format!("invalid JSON: {e}")))
}

#[pyclass(name = "CommunityModel", module = "ecotopics", frozen)]
struct PyCommunityModel {
    inner: CommunityModel,
}

#[pymethods]
impl PyCommunityModel {
    /// Day-by-community mixtures.
    #[getter]
    fn theta(&self) -> Vec<Vec<f64>> {
        rows(self.inner.theta())
    }

    /// Community-by-taxon distributions.
    #[getter]
    fn phi(&self) -> Vec<Vec<f64>> {
        rows(self.inner.phi())
    }

    #[getter]
    fn hyperparameters(&self) -> PyHyperparameters {
        (*self.inner.hyper()).into()
    }

    #[getter]
    fn dates(&self) -> Vec<String> {
        dates_out(self.inner.dates())
    }

    #[getter]
    fn taxon_names(&self) -> Vec<String> {
        self.inner.taxon_names().to_vec()
    }

    #[getter]
    fn n_communities(&self) -> usize {
        self.inner.n_communities()
    }

    fn mass_shares(&self) -> Vec<f64> {
        self.inner.mass_shares()
    }

    #[pyo3(signature = (threshold=ACTIVE_THRESHOLD))]
    fn active_communities(&self, threshold: f64) -> usize {
        self.inner.active_communities(threshold)
    }

    fn ml_taxon_distribution(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.ml_taxon_distribution().map_err(err)?))
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CommunityModel::from_json(text).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: CommunityModel::load(&path).map_err(err)?,
        })
    }
}

#[pyclass(name = "RidgeRegressor", module = "ecotopics", frozen)]
struct PyRidge {
    inner: RidgeRegressor,
}

#[pymethods]
impl PyRidge {
    /// Fits with a fixed penalty, or picks one from `lambda_grid` by
    /// leave-one-out error when `lam` is omitted.
    #[staticmethod]
    #[pyo3(signature = (x, y, lam=None, lambda_grid=None))]
    fn fit(
        x: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
        lam: Option<f64>,
        lambda_grid: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let x = matrix(x)?;
        let y = matrix(y)?;
        let lam = match lam {
            Some(l) => l,
            None => {
                let grid = lambda_grid.unwrap_or_else(default_lambda_grid);
                loocv_select_lambda(&x, &y, &grid).map_err(err)?
            }
        };
        Ok(Self {
            inner: ridge_fit(&x, &y, lam).map_err(err)?,
        })
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.predict_matrix(&matrix(x)?).map_err(err)?))
    }

    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        rows(self.inner.weights())
    }

    #[getter]
    fn intercept(&self) -> Vec<f64> {
        self.inner.intercept().iter().copied().collect()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RidgeRegressor::from_json(text).map_err(err)?,
        })
    }
}

#[pyclass(name = "PcaModel", module = "ecotopics", frozen)]
struct PyPca {
    inner: PcaModel,
}

#[pymethods]
impl PyPca {
    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean().iter().copied().collect()
    }

    /// One component per row.
    #[getter]
    fn components(&self) -> Vec<Vec<f64>> {
        rows(self.inner.components())
    }

    #[getter]
    fn explained_variance(&self) -> Vec<f64> {
        self.inner.explained_variance().to_vec()
    }

    fn transform(&self, y: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.transform(&matrix(y)?).map_err(err)?))
    }

    fn inverse(&self, w: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.inverse(&matrix(w)?).map_err(err)?))
    }
}

#[pyclass(name = "Comparison", module = "ecotopics", frozen)]
struct PyComparison {
    inner: MethodComparison,
}

fn method(name: &str) -> PyResult<Method> {
    Method::ALL
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| EcotopicsError::new_err(format!("unknown method {name:?}")))
}

#[pymethods]
impl PyComparison {
    #[getter]
    fn pca_components(&self) -> usize {
        self.inner.pca_components
    }

    /// Mean held-out KL divergence for `community`, `direct` or `pca`.
    fn mean_kl(&self, method_name: &str) -> PyResult<f64> {
        Ok(self.inner.report(method(method_name)?).overall_mean)
    }

    fn median_kl(&self, method_name: &str) -> PyResult<f64> {
        Ok(self.inner.report(method(method_name)?).median())
    }

    fn summary_json(&self) -> PyResult<String> {
        self.inner.summary_json().map_err(err)
    }

    fn per_day_csv(&self) -> PyResult<String> {
        let bytes = self.inner.per_day_csv().map_err(err)?;
        String::from_utf8(bytes).map_err(|e| EcotopicsError::new_err(e.to_string()))
    }
}

#[pyfunction]
fn train(
    py: Python<'_>,
    corpus: &PyCorpus,
    hyper: &PyHyperparameters,
) -> PyResult<PyCommunityModel> {
    let h = hyper.core();
    let inner = py.detach(|| model::train(&corpus.inner, &h)).map_err(err)?;
    Ok(PyCommunityModel { inner })
}

#[pyfunction]
#[pyo3(signature = (estimated, observed, epsilon=evaluation::DEFAULT_EPSILON))]
fn kl_divergence(estimated: Vec<f64>, observed: Vec<f64>, epsilon: f64) -> PyResult<f64> {
    evaluation::kl_divergence(&estimated, &observed, epsilon).map_err(err)
}

/// Principal components of the rows of `y`.
#[pyfunction]
fn pca_fit(y: Vec<Vec<f64>>, k: usize) -> PyResult<PyPca> {
    Ok(PyPca {
        inner: core_pca_fit(&matrix(y)?, k).map_err(err)?,
    })
}

type SyntheticTuple = (PyCorpus, PyEnvironment, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Returns `(corpus, environment, theta, phi)` for a seasonal synthetic
/// series with known communities.
#[pyfunction]
#[pyo3(signature = (k_true, n_days, n_taxa, obs_per_day, season_period=365.25, seed=0))]
fn synthetic_corpus(
    k_true: usize,
    n_days: usize,
    n_taxa: usize,
    obs_per_day: u32,
    season_period: f64,
    seed: u64,
) -> PyResult<SyntheticTuple> {
    let cfg = SyntheticConfig::new(k_true, n_days, n_taxa, obs_per_day, season_period, seed);
    let data = evaluation::synthetic_corpus(&cfg).map_err(err)?;
    Ok((
        PyCorpus { inner: data.corpus },
        PyEnvironment { inner: data.env },
        rows(&data.theta),
        rows(&data.phi),
    ))
}

/// Held-out comparison of the community, direct and PCA pipelines.
#[pyfunction]
#[pyo3(signature = (corpus, env, model, lambda_grid=None))]
fn compare_methods(
    py: Python<'_>,
    corpus: &PyCorpus,
    env: &PyEnvironment,
    model: &PyCommunityModel,
    lambda_grid: Option<Vec<f64>>,
) -> PyResult<PyComparison> {
    let grid = lambda_grid.unwrap_or_else(default_lambda_grid);
    let inner = py
        .detach(|| evaluation::compare_methods(&corpus.inner, &env.inner, &model.inner, grid))
        .map_err(err)?;
    Ok(PyComparison { inner })
}

/// Runs a grid sweep described by a JSON sweep config. Returns the best
/// model and the leaderboard as CSV text.
#[pyfunction]
fn hyperparameter_sweep(
    py: Python<'_>,
    corpus: &PyCorpus,
    env: &PyEnvironment,
    config: &str,
) -> PyResult<(PyCommunityModel, String)> {
    let config: SweepConfig = serde_json_from_str(config)?;
    let result = py
        .detach(|| evaluation::hyperparameter_sweep(&corpus.inner, &env.inner, &config))
        .map_err(err)?;
    let csv = evaluation::leaderboard_csv(&result.leaderboard).map_err(err)?;
    let csv = String::from_utf8(csv).map_err(|e| EcotopicsError::new_err(e.to_string()))?;
    Ok((PyCommunityModel { inner: result.best }, csv))
}

#[pymodule]
fn ecotopics(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EcotopicsError", m.py().get_type::<EcotopicsError>())?;
    m.add_class::<PyHyperparameters>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyEnvironment>()?;
    m.add_class::<PyCommunityModel>()?;
    m.add_class::<PyRidge>()?;
    m.add_class::<PyPca>()?;
    m.add_class::<PyComparison>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(pca_fit, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(compare_methods, m)?)?;
    m.add_function(wrap_pyfunction!(hyperparameter_sweep, m)?)?;
    Ok(())
}
